use crate::continuum::Material;
use crate::error::{ContinuumError, SolverError};
use crate::geometry::{Point3, TetMesh};

use super::fem::{DofMap, FemModel};
use super::skyline::SkylineMatrix;
use super::{BoundaryCondition, Trajectory, TrajectoryState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Convergence threshold on the ∞-norm of free-vertex forces (N).
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Initial diagonal shift, relative to the mean stiffness diagonal.
    pub initial_shift: f64,
    /// Energy slack allowed for an accepted iterate, relative to the energy.
    pub energy_slack: f64,
    /// Maximum recursive splits of a load increment when the step fails.
    pub max_bisections: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tolerance: 1e-8,
            max_iterations: 50,
            max_halvings: 20,
            initial_shift: 1e-8,
            energy_slack: 1e-12,
            max_bisections: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Energy of every accepted iterate, starting with the initial state.
    pub energies: Vec<f64>,
    pub factorizations: usize,
}

/// Reusable solver state for one mesh and boundary condition.
pub struct StepSolver<'m> {
    pub model: FemModel<'m>,
    pub bc: BoundaryCondition,
    pub dofs: DofMap,
    pub settings: NewtonSettings,
    matrix: SkylineMatrix,
}

impl<'m> StepSolver<'m> {
    pub fn new(
        mesh: &'m TetMesh,
        material: Material,
        bc: &BoundaryCondition,
    ) -> Result<Self, SolverError> {
        bc.validate(mesh.num_vertices())?;
        let model = FemModel::new(mesh, material)?;
        let dofs = DofMap::new(mesh, &bc.constrained_mask(mesh.num_vertices()));
        let matrix = dofs.empty_matrix();
        Ok(StepSolver {
            model,
            bc: bc.clone(),
            dofs,
            settings: NewtonSettings::default(),
            matrix,
        })
    }

    fn residual_norm(&self, forces: &[Point3]) -> f64 {
        self.dofs
            .free_vertices
            .iter()
            .flat_map(|&v| forces[v])
            .fold(0.0, |m, f| m.max(f.abs()))
    }

    /// Factorizes `K + τ·s·I`, with `s` the mean diagonal and `τ` growing ×10
    /// from the initial shift until the factorization succeeds.
    fn factorize(&mut self, step: usize, report: &mut NewtonReport) -> Result<(), SolverError> {
        let n = self.dofs.num_dofs();
        let scale = if n == 0 {
            1.0
        } else {
            self.matrix.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64
        };
        let base = self.matrix.clone();
        let mut tau = self.settings.initial_shift;
        for _ in 0..24 {
            self.matrix.clone_from(&base);
            self.matrix
                .add_to_diagonal(tau * scale.max(f64::MIN_POSITIVE));
            report.factorizations += 1;
            if self.matrix.cholesky().is_ok() {
                return Ok(());
            }
            tau *= 10.0;
        }
        Err(SolverError::SingularSystem { step })
    }

    /// Newton iterations with energy backtracking from a state that already
    /// satisfies the Dirichlet values.
    pub fn equilibrate(
        &mut self,
        u: &mut Vec<Point3>,
        step: usize,
    ) -> Result<NewtonReport, SolverError> {
        let s = self.settings;
        let mut report = NewtonReport::default();
        let nonconv = |iterations: usize, residual: f64| SolverError::NonConvergence {
            step,
            iterations,
            residual,
        };
        let mut energy = self
            .model
            .energy(u)
            .map_err(|_| nonconv(0, f64::INFINITY))?;
        report.energies.push(energy);
        for it in 0..=s.max_iterations {
            let forces = self
                .model
                .internal_forces(u)
                .map_err(|_| nonconv(it, f64::INFINITY))?;
            let residual = self.residual_norm(&forces);
            report.iterations = it;
            report.residual = residual;
            if residual <= s.tolerance {
                return Ok(report);
            }
            if it == s.max_iterations {
                break;
            }
            let _ = self
                .model
                .assemble(u, &self.dofs, &mut self.matrix, None)
                .map_err(|e| SolverError::InvertedElement {
                    step,
                    element: e.element,
                })?;
            self.factorize(step, &mut report)?;
            let rhs = self.dofs.gather(&forces);
            let du = self.matrix.solve(&rhs);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=s.max_halvings {
                let mut trial = u.clone();
                for (k, &v) in self.dofs.free_vertices.iter().enumerate() {
                    for i in 0..3 {
                        trial[v][i] += alpha * du[3 * k + i];
                    }
                }
                if let Ok(e) = self.model.energy(&trial) {
                    if e <= energy + s.energy_slack * energy.abs() {
                        *u = trial;
                        energy = e;
                        report.energies.push(e);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(nonconv(it + 1, residual));
            }
        }
        Err(nonconv(report.iterations, report.residual))
    }

    /// Linear boundary predictor: moves the platen from `u`'s current travel
    /// to `delta` and corrects the free vertices with the tangent at `u`.
    fn predict(
        &mut self,
        u: &[Point3],
        delta: f64,
        step: usize,
    ) -> Result<Vec<Point3>, SolverError> {
        let mut target = u.to_vec();
        self.bc.apply(&mut target, delta);
        let dc: Vec<Point3> = target
            .iter()
            .zip(u)
            .map(|(t, c)| [t[0] - c[0], t[1] - c[1], t[2] - c[2]])
            .collect();
        let coupling = self
            .model
            .assemble(u, &self.dofs, &mut self.matrix, Some(&dc))
            .map_err(|e| SolverError::InvertedElement {
                step,
                element: e.element,
            })?;
        let mut scratch = NewtonReport::default();
        self.factorize(step, &mut scratch)?;
        let forces = self
            .model
            .internal_forces(u)
            .map_err(|e| SolverError::InvertedElement {
                step,
                element: e.element,
            })?;
        let rhs: Vec<f64> = self
            .dofs
            .gather(&forces)
            .iter()
            .zip(&coupling)
            .map(|(f, c)| f + c)
            .collect();
        let du = self.matrix.solve(&rhs);
        for (k, &v) in self.dofs.free_vertices.iter().enumerate() {
            for i in 0..3 {
                target[v][i] += du[3 * k + i];
            }
        }
        Ok(target)
    }

    /// Advances an equilibrium state from travel `from` to travel `to`,
    /// bisecting the increment when the predictor or Newton fails.
    pub fn advance(
        &mut self,
        u: &[Point3],
        from: f64,
        to: f64,
        step: usize,
        depth: usize,
    ) -> Result<(Vec<Point3>, NewtonReport), SolverError> {
        let attempt = |this: &mut Self| -> Result<(Vec<Point3>, NewtonReport), SolverError> {
            let mut guess = this.predict(u, to, step)?;
            if this.model.energy(&guess).is_err() {
                guess = u.to_vec();
                this.bc.apply(&mut guess, to);
            }
            let report = this.equilibrate(&mut guess, step)?;
            Ok((guess, report))
        };
        match attempt(self) {
            Ok(r) => Ok(r),
            Err(e @ SolverError::InvalidBoundary(_)) => Err(e),
            Err(e) if depth >= self.settings.max_bisections => Err(e),
            Err(_) => {
                let mid = 0.5 * (from + to);
                let (half, _) = self.advance(u, from, mid, step, depth + 1)?;
                self.advance(&half, mid, to, step, depth + 1)
            }
        }
    }
}

/// Internal nodal forces `−∂E/∂u`.
pub fn internal_forces(
    mesh: &TetMesh,
    disp: &[Point3],
    mat: &Material,
) -> Result<Vec<Point3>, ContinuumError> {
    let model = FemModel::new(mesh, *mat)?;
    model.internal_forces(disp).map_err(ContinuumError::from)
}

/// Solves load step `step` from `u_init`, which is first projected onto the
/// step's Dirichlet values.
pub fn newton_solve(
    mesh: &TetMesh,
    mat: &Material,
    bc: &BoundaryCondition,
    u_init: &[Point3],
    step: usize,
) -> Result<(Vec<Point3>, NewtonReport), SolverError> {
    let mut solver = StepSolver::new(mesh, *mat, bc)?;
    let mut u = u_init.to_vec();
    bc.apply(&mut u, bc.prescribed_compression(step));
    let report = solver.equilibrate(&mut u, step)?;
    Ok((u, report))
}

/// Transmitted platen force `−Σ_{v∈set} f_z` (N); negative in compression
/// when evaluated on the loading set.
pub fn reaction_force(
    mesh: &TetMesh,
    disp: &[Point3],
    mat: &Material,
    vertex_set: &[usize],
) -> Result<f64, ContinuumError> {
    let forces = internal_forces(mesh, disp, mat)?;
    Ok(-vertex_set.iter().map(|&v| forces[v][2]).sum::<f64>())
}

fn record(
    solver: &StepSolver<'_>,
    u: Vec<Point3>,
    step: usize,
) -> Result<TrajectoryState, SolverError> {
    let inverted = |e: super::Inverted| SolverError::InvertedElement {
        step,
        element: e.element,
    };
    let invariants = solver.model.per_tet_invariants(&u).map_err(inverted)?;
    let forces = solver.model.internal_forces(&u).map_err(inverted)?;
    let reaction_force = -solver
        .bc
        .loading_set
        .iter()
        .map(|&v| forces[v][2])
        .sum::<f64>();
    Ok(TrajectoryState {
        displacements: u,
        invariants,
        reaction_force,
    })
}

/// Runs the full compression schedule, warm-starting each step from the
/// previous equilibrium.
pub fn run_compression(
    mesh: &TetMesh,
    mat: &Material,
    bc: &BoundaryCondition,
) -> Result<Trajectory, SolverError> {
    let mut solver = StepSolver::new(mesh, *mat, bc)?;
    let mut u = vec![[0.0; 3]; mesh.num_vertices()];
    let mut states = vec![record(&solver, u.clone(), 0)?];
    for step in 1..=bc.n_steps {
        let from = bc.prescribed_compression(step - 1);
        let to = bc.prescribed_compression(step);
        let (next, _) = solver.advance(&u, from, to, step, 0)?;
        u = next;
        states.push(record(&solver, u.clone(), step)?);
    }
    Ok(Trajectory {
        states,
        bc: bc.clone(),
        material: *mat,
    })
}
