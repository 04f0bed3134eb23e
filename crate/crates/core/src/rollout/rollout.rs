use crate::dataset::{
    current_positions, lgn1_edge_features, lgn1_node_features, subgraph_templates, SubgraphSample,
};
use crate::error::ModelError;
use crate::geometry::{Assignment, NodeType, Point3, ReducedGraph, TetMesh};
use crate::lgn::{Lgn1Model, Lgn2Model, SubgraphBatch};
use crate::oracle::BoundaryCondition;

/// Subgraphs evaluated per up-mapper batch during rollout.
pub const UPMAP_CHUNK: usize = 256;

/// Reduced-graph trajectory produced by the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRollout {
    pub displacements: Vec<Vec<Point3>>,
    pub stress: Vec<Vec<[f64; 2]>>,
    /// `increments[t] = displacements[t + 1] − displacements[t]`, after the
    /// boundary overwrite.
    pub increments: Vec<Vec<Point3>>,
}

impl ReducedRollout {
    pub fn num_steps(&self) -> usize {
        self.increments.len()
    }
}

fn prescribed(kind: NodeType, delta: f64) -> Option<Point3> {
    match kind {
        NodeType::Fixed => Some([0.0; 3]),
        NodeType::Loading => Some([0.0, 0.0, -delta]),
        _ => None,
    }
}

/// Rolls the predictor forward `steps` times from the rest state. Fixed
/// nodes stay at zero and loading nodes follow the platen exactly.
pub fn rollout_lgn1(
    model: &Lgn1Model,
    graph: &ReducedGraph,
    bc: &BoundaryCondition,
    steps: usize,
) -> Result<ReducedRollout, ModelError> {
    let n = graph.num_nodes();
    let mut u = vec![[0.0; 3]; n];
    let mut sigma = vec![[0.0; 2]; n];
    let mut out = ReducedRollout {
        displacements: vec![u.clone()],
        stress: vec![sigma.clone()],
        increments: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let current = current_positions(graph, &u);
        let nodes = lgn1_node_features(graph, &sigma);
        let edges = lgn1_edge_features(&graph.edges, &graph.positions, &current);
        let (du, ds) = model.predict(&nodes, &edges, &graph.edges)?;
        if du.iter().chain(ds.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { step: t });
        }
        let delta = bc.prescribed_compression(t + 1);
        let mut inc = Vec::with_capacity(n);
        for i in 0..n {
            let d = match prescribed(graph.node_kind(i), delta) {
                Some(p) => [p[0] - u[i][0], p[1] - u[i][1], p[2] - u[i][2]],
                None => [du[[i, 0]], du[[i, 1]], du[[i, 2]]],
            };
            for j in 0..3 {
                u[i][j] += d[j];
            }
            sigma[i][0] += ds[[i, 0]];
            sigma[i][1] += ds[[i, 1]];
            inc.push(d);
        }
        out.displacements.push(u.clone());
        out.stress.push(sigma.clone());
        out.increments.push(inc);
    }
    Ok(out)
}

/// Up-maps every rollout step to the tet mesh: `δu_T = δU + δũ_S` per
/// assigned vertex, integrated additively. With `bc`, mesh vertices on the
/// platens are overwritten by their prescribed values.
pub fn rollout_full(
    reduced: &ReducedRollout,
    graph: &ReducedGraph,
    mesh: &TetMesh,
    assignment: &Assignment,
    model: &Lgn2Model,
    bc: Option<&BoundaryCondition>,
) -> Result<Vec<Vec<Point3>>, ModelError> {
    let templates = subgraph_templates(graph, mesh, assignment);
    let mut u = vec![[0.0; 3]; mesh.num_vertices()];
    let mut out = vec![u.clone()];
    for (t, deltas) in reduced.increments.iter().enumerate() {
        let samples: Vec<SubgraphSample> = templates
            .iter()
            .flatten()
            .map(|tpl| tpl.instantiate(t, deltas, None))
            .collect();
        for chunk in samples.chunks(UPMAP_CHUNK) {
            let refs: Vec<&SubgraphSample> = chunk.iter().collect();
            let batch = SubgraphBatch::new(&refs);
            let du = model.predict_batch(&batch)?;
            if du.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { step: t });
            }
            for (s, &offset) in chunk.iter().zip(&batch.tet_offsets) {
                let c = deltas[s.center];
                for (row, &v) in s.tet_vertices.iter().enumerate() {
                    for j in 0..3 {
                        u[v][j] += du[[offset + row, j]] + c[j];
                    }
                }
            }
        }
        if let Some(bc) = bc {
            bc.apply(&mut u, bc.prescribed_compression(t + 1));
        }
        out.push(u.clone());
    }
    Ok(out)
}
