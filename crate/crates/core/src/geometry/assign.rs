use serde::{Deserialize, Serialize};

use super::{dist2, ReducedGraph, TetMesh};
use crate::error::GeometryError;

/// Partition of tet vertices among reduced-graph nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub vertex_to_node: Vec<usize>,
    pub node_vertices: Vec<Vec<usize>>,
}

/// Assigns each tet vertex to its nearest reduced node by rest distance;
/// ties go to the lowest node index.
pub fn assign_tets_to_strut_nodes(
    mesh: &TetMesh,
    graph: &ReducedGraph,
) -> Result<Assignment, GeometryError> {
    if mesh.num_vertices() == 0 || graph.num_nodes() == 0 {
        return Err(GeometryError::InvalidParameter(
            "assignment needs a nonempty mesh and graph".into(),
        ));
    }
    let mut vertex_to_node = Vec::with_capacity(mesh.num_vertices());
    let mut node_vertices = vec![Vec::new(); graph.num_nodes()];
    for (v, p) in mesh.vertices.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (n, q) in graph.positions.iter().enumerate() {
            let d = dist2(*p, *q);
            if d < best_d {
                best_d = d;
                best = n;
            }
        }
        vertex_to_node.push(best);
        node_vertices[best].push(v);
    }
    Ok(Assignment {
        vertex_to_node,
        node_vertices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        subdivide_to_reduced_graph, tessellate_struts, BeamLattice, NodeType, Strut,
    };

    fn graph_of(positions: Vec<[f64; 3]>) -> ReducedGraph {
        let n = positions.len();
        ReducedGraph {
            positions,
            node_type: vec![NodeType::Interior.one_hot(); n],
            diameter: vec![1.0; n],
            degree: vec![0; n],
            edges: vec![],
        }
    }

    fn point_mesh(points: Vec<[f64; 3]>) -> TetMesh {
        let n = points.len();
        TetMesh {
            vertices: points,
            tets: vec![],
            surface_flags: vec![false; n],
            volumes: vec![],
        }
    }

    #[test]
    fn coincident_vertex_and_tie_break() {
        let mut nodes = vec![[100.0, 0.0, 0.0]; 8];
        nodes[3] = [-1.0, 0.0, 0.0];
        nodes[7] = [1.0, 0.0, 0.0];
        nodes[5] = [2.0, 2.0, 2.0];
        let g = graph_of(nodes);
        let m = point_mesh(vec![[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]]);
        let a = assign_tets_to_strut_nodes(&m, &g).unwrap();
        assert_eq!(a.vertex_to_node, vec![3, 5]);
    }

    #[test]
    fn single_strut_matches_exhaustive_search() {
        let l = BeamLattice {
            nodes: vec![[0.0; 3], [1.0, 2.0, 6.0]],
            struts: vec![Strut {
                nodes: [0, 1],
                diameter: 1.2,
            }],
            bounding_box: [[0.0; 3], [1.0, 2.0, 6.0]],
        };
        let mesh = tessellate_struts(&l, 6, 5).unwrap();
        let g = subdivide_to_reduced_graph(&l, 1.5).unwrap();
        let a = assign_tets_to_strut_nodes(&mesh, &g).unwrap();
        for (v, p) in mesh.vertices.iter().enumerate() {
            let d: Vec<f64> = g.positions.iter().map(|q| dist2(*p, *q)).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let expect = d.iter().position(|&x| x == min).unwrap();
            assert_eq!(a.vertex_to_node[v], expect);
        }
        let total: usize = a.node_vertices.iter().map(Vec::len).sum();
        assert_eq!(total, mesh.num_vertices());
    }
}
