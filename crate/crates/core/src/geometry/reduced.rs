use super::{add, scale, sub, BeamLattice, NodeType, Point3, ReducedGraph};
use crate::error::GeometryError;

/// Splits every strut of length `L` into `ceil(L / target)` equal segments.
///
/// Lattice nodes keep their indices; inserted nodes follow in strut order.
/// Junction diameters take the largest incident strut diameter. All nodes
/// start as interior until [`classify_nodes`] runs.
pub fn subdivide_to_reduced_graph(
    lattice: &BeamLattice,
    target_segment_length: f64,
) -> Result<ReducedGraph, GeometryError> {
    if !(target_segment_length > 0.0) {
        return Err(GeometryError::InvalidParameter(format!(
            "target segment length must be positive, got {target_segment_length}"
        )));
    }
    let mut positions = lattice.nodes.clone();
    let mut diameter = vec![0.0f64; positions.len()];
    let mut undirected: Vec<[usize; 2]> = Vec::new();
    for (s, strut) in lattice.struts.iter().enumerate() {
        let [a, b] = strut.nodes;
        diameter[a] = diameter[a].max(strut.diameter);
        diameter[b] = diameter[b].max(strut.diameter);
        let len = lattice.strut_length(s);
        // Guard against ceil(10/2 + eps) = 6.
        let ratio = len / target_segment_length;
        let mut n = ratio.ceil().max(1.0) as usize;
        if n > 1 && ratio - (n - 1) as f64 <= 1e-9 * ratio {
            n -= 1;
        }
        let pa = lattice.nodes[a];
        let delta = sub(lattice.nodes[b], pa);
        let mut prev = a;
        for k in 1..n {
            let p: Point3 = add(pa, scale(delta, k as f64 / n as f64));
            positions.push(p);
            diameter.push(strut.diameter);
            let id = positions.len() - 1;
            undirected.push([prev, id]);
            prev = id;
        }
        undirected.push([prev, b]);
    }
    let mut edges = Vec::with_capacity(undirected.len() * 2);
    for [i, j] in undirected {
        edges.push([i, j]);
        edges.push([j, i]);
    }
    let mut degree = vec![0; positions.len()];
    for e in &edges {
        degree[e[0]] += 1;
    }
    let node_type = vec![NodeType::Interior.one_hot(); positions.len()];
    Ok(ReducedGraph {
        positions,
        node_type,
        diameter,
        degree,
        edges,
    })
}

fn classify_point(p: Point3, bbox: &[Point3; 2], tol: f64) -> NodeType {
    let [lo, hi] = bbox;
    if (p[2] - lo[2]).abs() <= tol {
        NodeType::Fixed
    } else if (p[2] - hi[2]).abs() <= tol {
        NodeType::Loading
    } else if (0..2).any(|k| (p[k] - lo[k]).abs() <= tol || (p[k] - hi[k]).abs() <= tol) {
        NodeType::FreeBoundary
    } else {
        NodeType::Interior
    }
}

/// Assigns exactly one node class per node: bottom face → fixed, top face →
/// loading, other box faces → free boundary, else interior.
pub fn classify_nodes(
    graph: &ReducedGraph,
    bbox: &[Point3; 2],
    tol: f64,
) -> Result<ReducedGraph, GeometryError> {
    if !(tol > 0.0) {
        return Err(GeometryError::InvalidParameter(format!(
            "classification tolerance must be positive, got {tol}"
        )));
    }
    let mut out = graph.clone();
    for (i, p) in graph.positions.iter().enumerate() {
        out.node_type[i] = classify_point(*p, bbox, tol).one_hot();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_beam_lattice, CellType, Strut, UnitCellSpec};

    fn single_strut(len: f64) -> BeamLattice {
        BeamLattice {
            nodes: vec![[0.0, 0.0, 0.0], [0.0, 0.0, len]],
            struts: vec![Strut {
                nodes: [0, 1],
                diameter: 1.0,
            }],
            bounding_box: [[0.0; 3], [0.0, 0.0, len]],
        }
    }

    #[test]
    fn ten_mm_strut_at_two_mm() {
        let g = subdivide_to_reduced_graph(&single_strut(10.0), 2.0).unwrap();
        assert_eq!(g.num_nodes(), 2 + 4);
        assert_eq!(g.edges.len(), 2 * 5);
    }

    #[test]
    fn ten_mm_strut_at_one_point_seven_five() {
        let g = subdivide_to_reduced_graph(&single_strut(10.0), 1.75).unwrap();
        assert_eq!(g.num_nodes(), 2 + 5);
        for e in &g.edges {
            let d = crate::geometry::norm(sub(g.positions[e[0]], g.positions[e[1]]));
            assert!((d - 10.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_target_leaves_strut_unchanged() {
        let g = subdivide_to_reduced_graph(&single_strut(10.0), 12.0).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges, vec![[0, 1], [1, 0]]);
    }

    #[test]
    fn rejects_non_positive_target() {
        assert!(subdivide_to_reduced_graph(&single_strut(1.0), 0.0).is_err());
    }

    #[test]
    fn subdivision_preserves_length_and_degree() {
        let spec = UnitCellSpec {
            cell_type: CellType::BodyCenteredCubic,
            cell_size: 7.0,
            strut_diameter: 1.0,
        };
        let l = generate_beam_lattice(&spec, 2, 1, 2).unwrap();
        for target in [1.25, 1.5, 1.75, 2.0] {
            let g = subdivide_to_reduced_graph(&l, target).unwrap();
            let rel = (g.total_edge_length() - l.total_length()).abs() / l.total_length();
            assert!(rel < 1e-9);
            assert_eq!(g.degree, g.recompute_degrees());
            for e in &g.edges {
                assert!(g.edges.contains(&[e[1], e[0]]));
            }
        }
    }

    #[test]
    fn classification_rules() {
        let bbox = [[0.0; 3], [10.0; 3]];
        let g = ReducedGraph {
            positions: vec![
                [5.0, 5.0, 0.0],
                [5.0, 5.0, 10.0],
                [10.0, 5.0, 5.0],
                [5.0, 5.0, 5.0],
            ],
            node_type: vec![NodeType::Interior.one_hot(); 4],
            diameter: vec![1.0; 4],
            degree: vec![0; 4],
            edges: vec![],
        };
        let c = classify_nodes(&g, &bbox, 0.01).unwrap();
        assert_eq!(c.node_type[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.node_type[1], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(c.node_type[2], [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(c.node_type[3], [0.0, 0.0, 0.0, 1.0]);
        let again = classify_nodes(&c, &bbox, 0.01).unwrap();
        assert_eq!(again, c);
        assert!(classify_nodes(&g, &bbox, 0.0).is_err());
    }
}
