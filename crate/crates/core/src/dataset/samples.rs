use ndarray::{s, Array2};
use rand::seq::index;
use rand::Rng;

use super::idw::IdwStencil;
use crate::continuum::element_to_node_stress;
use crate::error::DatasetError;
use crate::geometry::{Assignment, Point3, ReducedGraph, TetMesh};
use crate::oracle::Trajectory;

pub const LGN1_NODE_WIDTH: usize = 8;
pub const LGN1_EDGE_WIDTH: usize = 8;
pub const LGN2_STRUT_WIDTH: usize = 4;
pub const LGN2_TET_WIDTH: usize = 1;
pub const LGN2_EDGE_WIDTH: usize = 7;

/// Columns of the LGN-i node features holding (Ĩ1, J̃2).
pub const STRESS_COLUMNS: std::ops::Range<usize> = 6..8;

/// Oracle trajectory resampled onto a reduced graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub displacements: Vec<Vec<Point3>>,
    /// Per state and node, (Ĩ1, J̃2).
    pub stress: Vec<Vec<[f64; 2]>>,
}

impl ReducedTrajectory {
    pub fn num_steps(&self) -> usize {
        self.displacements.len().saturating_sub(1)
    }

    /// `ũ_{t+1} − ũ_t` per node.
    pub fn delta(&self, t: usize) -> Vec<Point3> {
        self.displacements[t + 1]
            .iter()
            .zip(&self.displacements[t])
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect()
    }
}

/// Maps every recorded state onto `graph` by inverse-distance weighting from
/// the rest tet vertices. Stress invariants go element → vertex → node.
pub fn map_trajectory(
    traj: &Trajectory,
    mesh: &TetMesh,
    graph: &ReducedGraph,
    k: usize,
    power: f64,
) -> Result<ReducedTrajectory, DatasetError> {
    let stencil = IdwStencil::new(&mesh.vertices, &graph.positions, k, power);
    let mut displacements = Vec::with_capacity(traj.states.len());
    let mut stress = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        if s.displacements.len() != mesh.num_vertices() {
            return Err(DatasetError::Mismatch(format!(
                "trajectory has {} vertices, mesh has {}",
                s.displacements.len(),
                mesh.num_vertices()
            )));
        }
        displacements.push(stencil.apply(&s.displacements));
        let nodal = element_to_node_stress(mesh, &s.invariants)
            .map_err(|e| DatasetError::Mismatch(e.to_string()))?;
        let pairs: Vec<[f64; 2]> = nodal.iter().map(|v| [v.i1, v.j2]).collect();
        stress.push(stencil.apply(&pairs));
    }
    Ok(ReducedTrajectory {
        displacements,
        stress,
    })
}

/// Targets of a second, chained prediction step.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardTargets {
    pub disp: Array2<f64>,
    pub stress: Array2<f64>,
}

/// One LGN-i training datum in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub rest: Vec<Point3>,
    pub current: Vec<Point3>,
    /// `[receiver, sender]`.
    pub edges: Vec<[usize; 2]>,
    /// `[one-hot type (4), diameter, degree, Ĩ1, J̃2]`.
    pub node_features: Array2<f64>,
    /// `[rest Δ, |rest Δ|, current Δ, |current Δ|]`, Δ = receiver − sender.
    pub edge_features: Array2<f64>,
    pub target_disp: Array2<f64>,
    pub target_stress: Array2<f64>,
    pub pushforward: Option<PushforwardTargets>,
}

impl GraphSample {
    pub fn num_nodes(&self) -> usize {
        self.rest.len()
    }

    /// State after applying increments `du` (positions) and `dsigma` (Ĩ1, J̃2).
    pub fn advanced(
        &self,
        du: &Array2<f64>,
        dsigma: &Array2<f64>,
    ) -> (Vec<Point3>, Array2<f64>, Array2<f64>) {
        let current: Vec<Point3> = self
            .current
            .iter()
            .enumerate()
            .map(|(i, p)| [p[0] + du[[i, 0]], p[1] + du[[i, 1]], p[2] + du[[i, 2]]])
            .collect();
        let mut nodes = self.node_features.clone();
        let mut st = nodes.slice_mut(s![.., STRESS_COLUMNS]);
        st += dsigma;
        let edges = lgn1_edge_features(&self.edges, &self.rest, &current);
        (current, nodes, edges)
    }
}

fn push_delta(out: &mut Vec<f64>, a: Point3, b: Point3) {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    out.extend_from_slice(&d);
    out.push((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
}

pub fn lgn1_edge_features(
    edges: &[[usize; 2]],
    rest: &[Point3],
    current: &[Point3],
) -> Array2<f64> {
    let mut data = Vec::with_capacity(edges.len() * LGN1_EDGE_WIDTH);
    for &[r, s] in edges {
        push_delta(&mut data, rest[r], rest[s]);
        push_delta(&mut data, current[r], current[s]);
    }
    Array2::from_shape_vec((edges.len(), LGN1_EDGE_WIDTH), data).expect("edge feature layout")
}

pub fn lgn1_node_features(graph: &ReducedGraph, stress: &[[f64; 2]]) -> Array2<f64> {
    let n = graph.num_nodes();
    let mut x = Array2::zeros((n, LGN1_NODE_WIDTH));
    for i in 0..n {
        for c in 0..4 {
            x[[i, c]] = graph.node_type[i][c];
        }
        x[[i, 4]] = graph.diameter[i];
        x[[i, 5]] = graph.degree[i] as f64;
        x[[i, 6]] = stress[i][0];
        x[[i, 7]] = stress[i][1];
    }
    x
}

fn rows<const D: usize>(v: &[[f64; D]]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), D), v.iter().flatten().copied().collect()).expect("row layout")
}

fn stress_delta(r: &ReducedTrajectory, t: usize) -> Vec<[f64; 2]> {
    r.stress[t + 1]
        .iter()
        .zip(&r.stress[t])
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
        .collect()
}

/// Current positions at state `t`.
pub fn current_positions(graph: &ReducedGraph, u: &[Point3]) -> Vec<Point3> {
    graph
        .positions
        .iter()
        .zip(u)
        .map(|(x, u)| [x[0] + u[0], x[1] + u[1], x[2] + u[2]])
        .collect()
}

/// One sample per transition `t → t+1`, `t ∈ [0, T)`; the pushforward
/// targets for `t+1 → t+2` are attached whenever `t + 2 ≤ T`.
pub fn build_lgn1_samples(
    reduced: &ReducedTrajectory,
    graph: &ReducedGraph,
) -> Result<Vec<GraphSample>, DatasetError> {
    let steps = reduced.num_steps();
    if steps < 1 {
        return Err(DatasetError::TooFewStates {
            needed: 2,
            found: reduced.displacements.len(),
        });
    }
    if reduced.displacements[0].len() != graph.num_nodes() {
        return Err(DatasetError::Mismatch(format!(
            "reduced trajectory has {} nodes, graph has {}",
            reduced.displacements[0].len(),
            graph.num_nodes()
        )));
    }
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let current = current_positions(graph, &reduced.displacements[t]);
        let pushforward = (t + 2 <= steps).then(|| PushforwardTargets {
            disp: rows(&reduced.delta(t + 1)),
            stress: rows(&stress_delta(reduced, t + 1)),
        });
        out.push(GraphSample {
            edge_features: lgn1_edge_features(&graph.edges, &graph.positions, &current),
            node_features: lgn1_node_features(graph, &reduced.stress[t]),
            rest: graph.positions.clone(),
            current,
            edges: graph.edges.clone(),
            target_disp: rows(&reduced.delta(t)),
            target_stress: rows(&stress_delta(reduced, t)),
            pushforward,
        });
    }
    Ok(out)
}

/// Edge classes of an LGN-ii subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgraphEdge {
    StrutStrut = 0,
    StrutTet = 1,
    TetTet = 2,
}

/// One LGN-ii datum: the neighborhood of one strut node at one step.
///
/// Nodes are numbered strut nodes first (the center at 0), then tet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSample {
    pub center: usize,
    pub step: usize,
    /// Global reduced-node ids, center first.
    pub strut_nodes: Vec<usize>,
    /// Global mesh vertex ids of the tet nodes.
    pub tet_vertices: Vec<usize>,
    /// `[diameter, δũ_k − δũ_center]`.
    pub strut_features: Array2<f64>,
    /// `[diameter]`.
    pub tet_features: Array2<f64>,
    pub edges: Vec<[usize; 2]>,
    /// `[one-hot class (3), rest Δ, |rest Δ|]`.
    pub edge_features: Array2<f64>,
    /// `δU = δu_T − δũ_center` per tet node.
    pub target: Array2<f64>,
}

impl SubgraphSample {
    pub fn num_struts(&self) -> usize {
        self.strut_nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tet_vertices.len()
    }
}

/// Step-independent part of a strut node's subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphTemplate {
    pub center: usize,
    pub strut_nodes: Vec<usize>,
    pub tet_vertices: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub edge_features: Array2<f64>,
    strut_diameter: Vec<f64>,
    tet_diameter: f64,
}

impl SubgraphTemplate {
    /// Instantiates the sample for one step from reduced increments; the
    /// target is filled when tet increments are known.
    pub fn instantiate(
        &self,
        step: usize,
        reduced_delta: &[Point3],
        tet_delta: Option<&[Point3]>,
    ) -> SubgraphSample {
        let c = reduced_delta[self.center];
        let ns = self.strut_nodes.len();
        let mut strut = Array2::zeros((ns, LGN2_STRUT_WIDTH));
        for (row, &k) in self.strut_nodes.iter().enumerate() {
            strut[[row, 0]] = self.strut_diameter[row];
            for j in 0..3 {
                strut[[row, 1 + j]] = reduced_delta[k][j] - c[j];
            }
        }
        let nt = self.tet_vertices.len();
        let mut target = Array2::zeros((nt, 3));
        if let Some(d) = tet_delta {
            for (row, &v) in self.tet_vertices.iter().enumerate() {
                for j in 0..3 {
                    target[[row, j]] = d[v][j] - c[j];
                }
            }
        }
        SubgraphSample {
            center: self.center,
            step,
            strut_nodes: self.strut_nodes.clone(),
            tet_vertices: self.tet_vertices.clone(),
            strut_features: strut,
            tet_features: Array2::from_elem((nt, LGN2_TET_WIDTH), self.tet_diameter),
            edges: self.edges.clone(),
            edge_features: self.edge_features.clone(),
            target,
        }
    }
}

/// Builds one template per reduced node; nodes without assigned tet
/// vertices yield `None`.
pub fn subgraph_templates(
    graph: &ReducedGraph,
    mesh: &TetMesh,
    assignment: &Assignment,
) -> Vec<Option<SubgraphTemplate>> {
    let neighbors = graph.neighbors();
    let mut vertex_edges: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for [a, b] in mesh.edges() {
        vertex_edges[a].push(b);
    }
    let mut local = vec![usize::MAX; mesh.num_vertices()];
    (0..graph.num_nodes())
        .map(|i| {
            let tets = &assignment.node_vertices[i];
            if tets.is_empty() {
                return None;
            }
            let mut strut_nodes = vec![i];
            strut_nodes.extend(neighbors[i].iter().copied().filter(|&k| k != i));
            let ns = strut_nodes.len();
            let mut pos: Vec<Point3> = strut_nodes.iter().map(|&k| graph.positions[k]).collect();
            pos.extend(tets.iter().map(|&v| mesh.vertices[v]));
            for (row, &v) in tets.iter().enumerate() {
                local[v] = ns + row;
            }
            let mut pairs: Vec<([usize; 2], SubgraphEdge)> = Vec::new();
            for k in 1..ns {
                pairs.push(([0, k], SubgraphEdge::StrutStrut));
            }
            for t in ns..ns + tets.len() {
                pairs.push(([0, t], SubgraphEdge::StrutTet));
            }
            for &v in tets {
                for &w in &vertex_edges[v] {
                    if local[w] != usize::MAX {
                        pairs.push(([local[v], local[w]], SubgraphEdge::TetTet));
                    }
                }
            }
            for &v in tets {
                local[v] = usize::MAX;
            }
            let mut edges = Vec::with_capacity(2 * pairs.len());
            let mut data = Vec::with_capacity(2 * pairs.len() * LGN2_EDGE_WIDTH);
            for ([a, b], kind) in pairs {
                for [r, s] in [[a, b], [b, a]] {
                    edges.push([r, s]);
                    let mut hot = [0.0; 3];
                    hot[kind as usize] = 1.0;
                    data.extend_from_slice(&hot);
                    push_delta(&mut data, pos[r], pos[s]);
                }
            }
            Some(SubgraphTemplate {
                center: i,
                strut_diameter: strut_nodes.iter().map(|&k| graph.diameter[k]).collect(),
                tet_diameter: graph.diameter[i],
                strut_nodes,
                tet_vertices: tets.clone(),
                edge_features: Array2::from_shape_vec((edges.len(), LGN2_EDGE_WIDTH), data)
                    .expect("edge feature layout"),
                edges,
            })
        })
        .collect()
}

/// One sample per (strut node with tets, step), using `reduced_deltas[t]`
/// as the reduced increment of step `t`.
pub fn build_lgn2_samples(
    traj: &Trajectory,
    graph: &ReducedGraph,
    mesh: &TetMesh,
    assignment: &Assignment,
    reduced_deltas: &[Vec<Point3>],
) -> Result<Vec<SubgraphSample>, DatasetError> {
    if reduced_deltas.len() > traj.num_steps() {
        return Err(DatasetError::Mismatch(format!(
            "{} reduced increments for {} steps",
            reduced_deltas.len(),
            traj.num_steps()
        )));
    }
    let templates = subgraph_templates(graph, mesh, assignment);
    let mut out = Vec::new();
    for (t, deltas) in reduced_deltas.iter().enumerate() {
        let tet_delta: Vec<Point3> = traj.states[t + 1]
            .displacements
            .iter()
            .zip(&traj.states[t].displacements)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
            .collect();
        for tpl in templates.iter().flatten() {
            out.push(tpl.instantiate(t, deltas, Some(&tet_delta)));
        }
    }
    Ok(out)
}

/// Uniform subsample without replacement that keeps the original order.
pub fn subsample<T, R: Rng>(items: Vec<T>, cap: usize, rng: &mut R) -> Vec<T> {
    if items.len() <= cap {
        return items;
    }
    let mut keep = index::sample(rng, items.len(), cap).into_vec();
    keep.sort_unstable();
    let mut flags = vec![false; items.len()];
    for k in keep {
        flags[k] = true;
    }
    items
        .into_iter()
        .zip(flags)
        .filter_map(|(x, f)| f.then_some(x))
        .collect()
}
