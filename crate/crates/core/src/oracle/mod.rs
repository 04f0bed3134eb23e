//! Quasistatic Neo-Hookean tetrahedral FEM used as the ground-truth oracle.
//!
//! Inertia is dropped: each load step is an energy minimization with the
//! bottom platen clamped and the top platen displaced downward.

mod fem;
mod skyline;
mod solver;

pub use fem::{DofMap, FemModel, Inverted};
pub use skyline::{reverse_cuthill_mckee, SkylineMatrix};
pub use solver::{
    internal_forces, newton_solve, reaction_force, run_compression, NewtonReport, NewtonSettings,
    StepSolver,
};

use serde::{Deserialize, Serialize};

use crate::continuum::{Material, StressInvariants};
use crate::error::SolverError;
use crate::geometry::{Point3, TetMesh};

/// Default platen speed (mm/s).
pub const DEFAULT_RATE: f64 = 20.0;
/// Default number of recorded load steps.
pub const DEFAULT_STEPS: usize = 12;
/// Default final nominal compressive strain.
pub const DEFAULT_STRAIN: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    /// Vertices held at `u = 0`.
    pub fixed_set: Vec<usize>,
    /// Vertices with prescribed `u = (0, 0, −δ(t))`.
    pub loading_set: Vec<usize>,
    /// Platen speed (mm/s).
    pub rate: f64,
    /// Time step (s).
    pub dt: f64,
    pub n_steps: usize,
}

impl BoundaryCondition {
    /// Clamps vertices at or below `z_range.0 + tol` and drives those at or
    /// above `z_range.1 − tol`, with `dt` chosen so that `n_steps` steps reach
    /// `strain · height`.
    pub fn compression(
        mesh: &TetMesh,
        z_range: (f64, f64),
        tol: f64,
        rate: f64,
        n_steps: usize,
        strain: f64,
    ) -> Result<Self, SolverError> {
        let height = z_range.1 - z_range.0;
        if !(height > 0.0) || !(rate > 0.0) || !(strain >= 0.0) {
            return Err(SolverError::InvalidBoundary(format!(
                "need positive height and rate, got height {height}, rate {rate}, strain {strain}"
            )));
        }
        let fixed_set = (0..mesh.num_vertices())
            .filter(|&v| mesh.vertices[v][2] <= z_range.0 + tol)
            .collect();
        let loading_set = (0..mesh.num_vertices())
            .filter(|&v| mesh.vertices[v][2] >= z_range.1 - tol)
            .collect();
        let dt = if n_steps == 0 {
            0.0
        } else {
            strain * height / (rate * n_steps as f64)
        };
        let bc = BoundaryCondition {
            fixed_set,
            loading_set,
            rate,
            dt,
            n_steps,
        };
        bc.validate(mesh.num_vertices())?;
        Ok(bc)
    }

    pub fn validate(&self, n_vertices: usize) -> Result<(), SolverError> {
        if !(self.rate > 0.0) {
            return Err(SolverError::InvalidBoundary(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if self.fixed_set.is_empty() || self.loading_set.is_empty() {
            return Err(SolverError::InvalidBoundary(
                "fixed and loading sets must be nonempty".into(),
            ));
        }
        let mut mark = vec![0u8; n_vertices];
        for &v in &self.fixed_set {
            if v >= n_vertices {
                return Err(SolverError::InvalidBoundary(format!(
                    "fixed vertex {v} out of range"
                )));
            }
            mark[v] = 1;
        }
        for &v in &self.loading_set {
            if v >= n_vertices {
                return Err(SolverError::InvalidBoundary(format!(
                    "loading vertex {v} out of range"
                )));
            }
            if mark[v] == 1 {
                return Err(SolverError::InvalidBoundary(format!(
                    "vertex {v} is both fixed and loaded"
                )));
            }
        }
        Ok(())
    }

    /// Platen travel `δ(t) = rate·dt·t` (mm).
    pub fn prescribed_compression(&self, step: usize) -> f64 {
        self.rate * self.dt * step as f64
    }

    pub fn constrained_mask(&self, n_vertices: usize) -> Vec<bool> {
        let mut mask = vec![false; n_vertices];
        for &v in self.fixed_set.iter().chain(&self.loading_set) {
            mask[v] = true;
        }
        mask
    }

    /// Writes the Dirichlet values for platen travel `delta` into `u`.
    pub fn apply(&self, u: &mut [Point3], delta: f64) {
        for &v in &self.fixed_set {
            u[v] = [0.0; 3];
        }
        for &v in &self.loading_set {
            u[v] = [0.0, 0.0, -delta];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub displacements: Vec<Point3>,
    pub invariants: Vec<StressInvariants>,
    /// Force transmitted through the loading platen (N), negative in compression.
    pub reaction_force: f64,
}

/// Oracle time series; `states[0]` is the undeformed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    pub bc: BoundaryCondition,
    pub material: Material,
}

impl Trajectory {
    pub fn num_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn forces(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.reaction_force).collect()
    }
}
