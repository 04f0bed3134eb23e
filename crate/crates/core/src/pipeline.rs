//! End-to-end glue from a [`PipelineConfig`] to samples, rollouts and
//! force curves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{BoundaryConfig, DatasetConfig, GeometryConfig, PipelineConfig};
use crate::continuum::Material;
use crate::dataset::{
    build_lgn1_samples, build_lgn2_samples, map_trajectory, subsample, GraphSample, SubgraphSample,
};
use crate::geometry::{
    assign_tets_to_strut_nodes, classify_nodes, generate_beam_lattice, subdivide_to_reduced_graph,
    tessellate_struts, Assignment, BeamLattice, Point3, ReducedGraph, TetMesh,
};
use crate::lgn::{Lgn1Model, Lgn2Model};
use crate::oracle::{run_compression, BoundaryCondition, Trajectory};
use crate::rollout::{homogenized_force, plan_slices, rollout_full, rollout_lgn1, ReducedRollout};
use crate::Result;

/// A lattice together with its tetrahedral mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Specimen {
    pub lattice: BeamLattice,
    pub mesh: TetMesh,
}

impl Specimen {
    pub fn build(g: &GeometryConfig) -> Result<Specimen> {
        let lattice = generate_beam_lattice(&g.unit_cell(), g.cells[0], g.cells[1], g.cells[2])?;
        let mesh = tessellate_struts(&lattice, g.sides, g.axial)?;
        Ok(Specimen { lattice, mesh })
    }

    /// Platens sit on the lattice node planes `z = 0` and `z = height`.
    pub fn boundary(&self, b: &BoundaryConfig) -> Result<BoundaryCondition> {
        let bb = self.lattice.bounding_box;
        Ok(BoundaryCondition::compression(
            &self.mesh,
            (bb[0][2], bb[1][2]),
            b.platen_tolerance,
            b.rate,
            b.n_steps,
            b.strain,
        )?)
    }

    pub fn height(&self) -> f64 {
        self.lattice.height()
    }

    pub fn reduced_graph(&self, segment_length: f64, tol: f64) -> Result<ReducedGraph> {
        let g = subdivide_to_reduced_graph(&self.lattice, segment_length)?;
        Ok(classify_nodes(&g, &self.lattice.bounding_box, tol)?)
    }

    /// One reduced graph per configured segment length.
    pub fn discretizations(&self, d: &DatasetConfig, tol: f64) -> Result<Vec<Discretization>> {
        d.scaled_segment_lengths()
            .into_iter()
            .map(|l| {
                let graph = self.reduced_graph(l, tol)?;
                let assignment = assign_tets_to_strut_nodes(&self.mesh, &graph)?;
                Ok(Discretization {
                    segment_length: l,
                    graph,
                    assignment,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub segment_length: f64,
    pub graph: ReducedGraph,
    pub assignment: Assignment,
}

pub fn simulate(
    specimen: &Specimen,
    material: &Material,
    b: &BoundaryConfig,
) -> Result<Trajectory> {
    let bc = specimen.boundary(b)?;
    Ok(run_compression(&specimen.mesh, material, &bc)?)
}

/// Both sample kinds of one trajectory over every discretization, before capping.
pub fn trajectory_samples(
    specimen: &Specimen,
    traj: &Trajectory,
    discs: &[Discretization],
    d: &DatasetConfig,
) -> Result<(Vec<GraphSample>, Vec<SubgraphSample>)> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for disc in discs {
        let reduced = map_trajectory(traj, &specimen.mesh, &disc.graph, d.idw_k, d.idw_power)?;
        a.extend(build_lgn1_samples(&reduced, &disc.graph)?);
        let deltas: Vec<Vec<Point3>> = (0..reduced.num_steps()).map(|t| reduced.delta(t)).collect();
        b.extend(build_lgn2_samples(
            traj,
            &disc.graph,
            &specimen.mesh,
            &disc.assignment,
            &deltas,
        )?);
    }
    Ok((a, b))
}

/// Applies the corpus-wide caps by uniform subsampling.
pub fn cap_samples(
    lgn1: Vec<GraphSample>,
    lgn2: Vec<SubgraphSample>,
    d: &DatasetConfig,
    seed: u64,
) -> (Vec<GraphSample>, Vec<SubgraphSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = subsample(lgn1, d.lgn1_cap, &mut rng);
    let b = subsample(lgn2, d.lgn2_cap, &mut rng);
    (a, b)
}

/// Reduced and full-mesh rollout on one discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub reduced: ReducedRollout,
    /// Full-mesh displacements, `steps + 1` states starting at rest.
    pub displacements: Vec<Vec<Point3>>,
}

pub fn predict(
    lgn1: &Lgn1Model,
    lgn2: &Lgn2Model,
    specimen: &Specimen,
    disc: &Discretization,
    bc: &BoundaryCondition,
    cfg: &PipelineConfig,
) -> Result<Prediction> {
    let reduced = rollout_lgn1(lgn1, &disc.graph, bc, cfg.rollout_steps())?;
    let mesh_bc = cfg.rollout.enforce_mesh_boundary.then_some(bc);
    let displacements = rollout_full(
        &reduced,
        &disc.graph,
        &specimen.mesh,
        &disc.assignment,
        lgn2,
        mesh_bc,
    )?;
    Ok(Prediction {
        reduced,
        displacements,
    })
}

/// Point-by-point displacement error between two full-mesh trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Mean vertex error per state (mm).
    pub mean_per_step: Vec<f64>,
    /// Max vertex error per state (mm).
    pub max_per_step: Vec<f64>,
    /// Final-state mean (mm).
    pub mean: f64,
    /// Final-state max (mm).
    pub max: f64,
    /// Largest ground-truth displacement magnitude at the final state (mm).
    pub max_reference: f64,
}

fn norm(p: Point3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Compares the common prefix of `pred` and `truth`.
pub fn point_errors(pred: &[Vec<Point3>], truth: &[Vec<Point3>]) -> ErrorStats {
    let n = pred.len().min(truth.len());
    let (mut mean_per_step, mut max_per_step) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (p, t) in pred.iter().zip(truth) {
        let errs: Vec<f64> = p
            .iter()
            .zip(t)
            .map(|(a, b)| norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]]))
            .collect();
        mean_per_step.push(if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        });
        max_per_step.push(errs.iter().copied().fold(0.0, f64::max));
    }
    let max_reference = truth
        .get(n.saturating_sub(1))
        .map(|s| s.iter().map(|&u| norm(u)).fold(0.0, f64::max))
        .unwrap_or(0.0);
    ErrorStats {
        mean: mean_per_step.last().copied().unwrap_or(0.0),
        max: max_per_step.last().copied().unwrap_or(0.0),
        mean_per_step,
        max_per_step,
        max_reference,
    }
}

/// Homogenized force at every state of `displacements`.
pub fn force_curve(
    mesh: &TetMesh,
    displacements: &[Vec<Point3>],
    material: &Material,
    fractions: &[f64],
) -> Result<Vec<f64>> {
    let plan = plan_slices(mesh, fractions);
    displacements
        .iter()
        .map(|u| homogenized_force(mesh, u, material, &plan).map(|h| h.mean))
        .collect()
}

/// Population standard deviation of each column across `curves`.
pub fn band_spread(curves: &[Vec<f64>]) -> Vec<f64> {
    let n = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let m = curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64;
            (curves.iter().map(|c| (c[i] - m).powi(2)).sum::<f64>() / curves.len() as f64).sqrt()
        })
        .collect()
}
