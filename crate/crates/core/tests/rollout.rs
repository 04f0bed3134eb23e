use latticegraph::config::{BoundaryConfig, GeometryConfig};
use latticegraph::continuum::{pk_stress, Material, Tensor3};
use latticegraph::geometry::{
    assign_tets_to_strut_nodes, box_mesh, CellType, NodeType, Point3, TetMesh,
};
use latticegraph::lgn::{Lgn1Config, Lgn1Model, Lgn2Config, Lgn2Model};
use latticegraph::oracle::{run_compression, BoundaryCondition};
use latticegraph::pipeline::Specimen;
use latticegraph::rollout::{
    homogenized_force, plan_slices, rollout_full, rollout_lgn1, tet_plane_section, ReducedRollout,
    DEFAULT_FRACTIONS,
};
use proptest::prelude::*;

fn bcc() -> Specimen {
    Specimen::build(&GeometryConfig::default()).unwrap()
}

fn small_lgn1() -> Lgn1Model {
    Lgn1Model::new(
        Lgn1Config {
            latent: 8,
            hidden_layers: 1,
            message_passing_steps: 2,
            layer_norm: true,
        },
        1,
    )
}

fn small_lgn2() -> Lgn2Model {
    Lgn2Model::new(
        Lgn2Config {
            latent: 8,
            hidden_layers: 1,
            message_passing_steps: 2,
            layer_norm: true,
        },
        2,
    )
}

#[test]
fn zero_steps_keep_initial_state() {
    let specimen = bcc();
    let graph = specimen.reduced_graph(2.5, 1e-6).unwrap();
    let bc = specimen.boundary(&BoundaryConfig::default()).unwrap();
    let r = rollout_lgn1(&small_lgn1(), &graph, &bc, 0).unwrap();
    assert_eq!(r.displacements.len(), 1);
    assert_eq!(r.num_steps(), 0);
    assert!(r.displacements[0].iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn zero_decoder_moves_only_prescribed_nodes() {
    let specimen = bcc();
    let graph = specimen.reduced_graph(2.5, 1e-6).unwrap();
    let bc = specimen.boundary(&BoundaryConfig::default()).unwrap();
    let mut m = small_lgn1();
    m.disp_decoder.zero_output(&mut m.params);
    m.stress_decoder.zero_output(&mut m.params);
    let r = rollout_lgn1(&m, &graph, &bc, 4).unwrap();
    for (t, u) in r.displacements.iter().enumerate() {
        let delta = bc.prescribed_compression(t);
        for (i, ui) in u.iter().enumerate() {
            let want = match graph.node_kind(i) {
                NodeType::Loading => [0.0, 0.0, -delta],
                _ => [0.0; 3],
            };
            assert_eq!(*ui, want, "node {i} at step {t}");
        }
    }
    assert!(r.stress.iter().flatten().flatten().all(|&v| v == 0.0));
}

#[test]
fn zero_up_mapper_translates_tets_with_their_nodes() {
    let specimen = bcc();
    let graph = specimen.reduced_graph(2.5, 1e-6).unwrap();
    let assignment = assign_tets_to_strut_nodes(&specimen.mesh, &graph).unwrap();
    let mut m2 = small_lgn2();
    m2.decoder.zero_output(&mut m2.params);
    let shift: Point3 = [0.01, -0.02, -0.05];
    let n = graph.num_nodes();
    let steps = 3;
    let reduced = ReducedRollout {
        displacements: (0..=steps)
            .map(|t| vec![shift.map(|c| c * t as f64); n])
            .collect(),
        stress: vec![vec![[0.0; 2]; n]; steps + 1],
        increments: vec![vec![shift; n]; steps],
    };
    let field = rollout_full(&reduced, &graph, &specimen.mesh, &assignment, &m2, None).unwrap();
    assert_eq!(field.len(), steps + 1);
    for (t, u) in field.iter().enumerate() {
        for v in u {
            for j in 0..3 {
                assert!((v[j] - shift[j] * t as f64).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn regular_tet_mid_height_section() {
    let h = (2.0f64 / 3.0).sqrt();
    let tet = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.5, 3f64.sqrt() / 2.0, 0.0],
        [0.5, 3f64.sqrt() / 6.0, h],
    ];
    let area = tet_plane_section(&tet, 0.5 * h).unwrap();
    assert!((area - 3f64.sqrt() / 16.0).abs() < 1e-14);
    assert!(tet_plane_section(&tet, -0.1).is_none());
    assert!(tet_plane_section(&tet, 1.1 * h).is_none());
}

#[test]
fn plane_below_the_mesh_is_empty() {
    let mesh = box_mesh([1.0, 1.0, 1.0], [2, 2, 2]).unwrap();
    let plan = plan_slices(&mesh, &[-0.5, 0.5]);
    assert!(plan.slices[0].is_empty());
    assert!(!plan.slices[1].is_empty());
}

proptest! {
    #[test]
    fn box_sections_sum_to_the_cross_section(f in 0.001f64..0.999, nz in 1usize..5) {
        let mesh = box_mesh([2.0, 3.0, 1.5], [2, 3, nz]).unwrap();
        let plan = plan_slices(&mesh, &[f]);
        prop_assert!((plan.slices[0].area() - 6.0).abs() < 1e-9);
    }
}

fn affine(mesh: &TetMesh, f: &Tensor3) -> Vec<Point3> {
    mesh.vertices
        .iter()
        .map(|x| {
            let y = f * nalgebra::Vector3::new(x[0], x[1], x[2]);
            [y[0] - x[0], y[1] - x[1], y[2] - x[2]]
        })
        .collect()
}

#[test]
fn homogenized_force_examples() {
    let m = Material::default();
    let mesh = box_mesh([1.0, 2.0, 3.0], [2, 2, 3]).unwrap();
    let plan = plan_slices(&mesh, &DEFAULT_FRACTIONS);
    let zero = homogenized_force(&mesh, &vec![[0.0; 3]; mesh.num_vertices()], &m, &plan).unwrap();
    assert_eq!(zero.mean, 0.0);

    let f = Tensor3::new(1.01, 0.02, 0.0, -0.01, 0.98, 0.0, 0.0, 0.0, 0.92);
    let want = pk_stress(&f, &m).unwrap()[(2, 2)] * 2.0;
    let h = homogenized_force(&mesh, &affine(&mesh, &f), &m, &plan).unwrap();
    for s in h.per_slice.iter() {
        assert!((s.unwrap() - want).abs() < 1e-9 * want.abs());
    }
    assert!((h.mean - want).abs() < 1e-9 * want.abs());
    assert!(h.spread() < 1e-9);
}

#[test]
fn homogenized_force_tracks_platen_reaction() {
    let m = Material::default();
    let mesh = box_mesh([1.0, 1.0, 4.0], [2, 2, 8]).unwrap();
    let bc = BoundaryCondition::compression(&mesh, (0.0, 4.0), 1e-9, 20.0, 2, 0.02).unwrap();
    let traj = run_compression(&mesh, &m, &bc).unwrap();
    let plan = plan_slices(&mesh, &DEFAULT_FRACTIONS);
    for s in &traj.states[1..] {
        let h = homogenized_force(&mesh, &s.displacements, &m, &plan).unwrap();
        assert!(
            (h.mean / s.reaction_force - 1.0).abs() < 0.10,
            "{} vs {}",
            h.mean,
            s.reaction_force
        );
    }
}

#[test]
fn lattice_homogenization_tracks_reaction() {
    let specimen = Specimen::build(&GeometryConfig {
        cell_type: CellType::SimpleCubic,
        ..GeometryConfig::default()
    })
    .unwrap();
    let m = Material::default();
    let bc = specimen.boundary(&BoundaryConfig::default()).unwrap();
    let traj = run_compression(&specimen.mesh, &m, &bc).unwrap();
    let plan = plan_slices(&specimen.mesh, &DEFAULT_FRACTIONS);
    let s = &traj.states[2];
    let h = homogenized_force(&specimen.mesh, &s.displacements, &m, &plan).unwrap();
    assert!(
        (h.mean / s.reaction_force - 1.0).abs() < 0.10,
        "{} vs {}",
        h.mean,
        s.reaction_force
    );
}
