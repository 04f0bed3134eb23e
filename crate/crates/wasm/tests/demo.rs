use latticegraph_wasm::{block, preview, unit_cell_curve};

#[test]
fn preview_counts_simple_cubic() {
    let p = preview("sc", [1, 1, 1], 2.0, 2.5).unwrap();
    assert_eq!((p.nodes.len(), p.struts.len()), (8, 12));
    assert!((p.total_length - 120.0).abs() < 1e-9);
    assert!(p.reduced_nodes > 8 && p.reduced_edges > 12);
}

#[test]
fn preview_bcc_length() {
    let p = preview("body_centered_cubic", [1, 1, 1], 2.0, 2.5).unwrap();
    // 12 cube edges plus 8 half diagonals.
    let want = 120.0 + 8.0 * 5.0 * 3f64.sqrt();
    assert!((p.total_length - want).abs() < 1e-9);
}

#[test]
fn bad_inputs_are_reported() {
    assert!(preview("kelvin", [1, 1, 1], 2.0, 2.5).unwrap_err().contains("kelvin"));
    assert!(preview("sc", [0, 1, 1], 2.0, 2.5).is_err());
    assert!(preview("sc", [9, 1, 1], 2.0, 2.5).is_err());
    assert!(unit_cell_curve("sc", 2.0, 0.6, 4).is_err());
    assert!(block([1.0; 3], [1, 1, 1], 0.0).is_err());
}

#[test]
fn unit_cell_curve_rises_from_zero() {
    let c = unit_cell_curve("sc", 2.0, 0.1, 4).unwrap();
    assert_eq!(c.strain.len(), 5);
    assert_eq!(c.force[0], 0.0);
    assert!(c.force.windows(2).all(|w| w[1] > w[0]), "{:?}", c.force);
}

#[test]
fn block_force_near_linear_estimate_at_small_strain() {
    let b = block([2.0, 2.0, 4.0], [2, 2, 4], 0.01).unwrap();
    assert_eq!(b.vertices.len(), 3 * 3 * 5);
    let ratio = b.force / b.linear_force;
    // Bonded platens stiffen a block of aspect 2 a little.
    assert!((1.0..1.3).contains(&ratio), "{ratio}");
    assert!(b.vertices.iter().all(|p| p[2] <= 4.0 * 0.99 + 1e-9));
}
