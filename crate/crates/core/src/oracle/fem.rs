use crate::continuum::{
    neo_hookean_energy, pk_stress, rest_edge_inverse, stress_invariants, stress_tangent, Material,
    StressInvariants, Tensor3,
};
use crate::error::ContinuumError;
use crate::geometry::{Point3, TetMesh};

use super::skyline::SkylineMatrix;

/// Element whose deformation gradient left the admissible set `det F > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub element: usize,
    pub det: f64,
}

impl From<Inverted> for ContinuumError {
    fn from(e: Inverted) -> Self {
        ContinuumError::InvertedElement { det: e.det }
    }
}

/// Precomputed constant-strain tet data: `F = I + Σ_a u_a ⊗ g_a`.
#[derive(Debug, Clone)]
pub struct FemModel<'m> {
    pub mesh: &'m TetMesh,
    pub material: Material,
    grads: Vec<[Point3; 4]>,
}

impl<'m> FemModel<'m> {
    pub fn new(mesh: &'m TetMesh, material: Material) -> Result<Self, ContinuumError> {
        let mut grads = Vec::with_capacity(mesh.num_tets());
        for t in 0..mesh.num_tets() {
            let b = rest_edge_inverse(&mesh.tet_positions(t))?;
            let mut g = [[0.0; 3]; 4];
            for a in 1..4 {
                for j in 0..3 {
                    g[a][j] = b[(a - 1, j)];
                    g[0][j] -= b[(a - 1, j)];
                }
            }
            grads.push(g);
        }
        Ok(FemModel {
            mesh,
            material,
            grads,
        })
    }

    pub fn deformation_gradient(&self, e: usize, u: &[Point3]) -> Tensor3 {
        let tet = self.mesh.tets[e];
        let g = &self.grads[e];
        let mut f = Tensor3::identity();
        for a in 0..4 {
            let ua = u[tet[a]];
            for i in 0..3 {
                for j in 0..3 {
                    f[(i, j)] += ua[i] * g[a][j];
                }
            }
        }
        f
    }

    /// Total stored energy `Σ_e V_e Ψ(F_e)`.
    pub fn energy(&self, u: &[Point3]) -> Result<f64, Inverted> {
        let mut total = 0.0;
        for e in 0..self.mesh.num_tets() {
            let f = self.deformation_gradient(e, u);
            let psi = neo_hookean_energy(&f, &self.material).map_err(|_| Inverted {
                element: e,
                det: f.determinant(),
            })?;
            total += self.mesh.volumes[e] * psi;
        }
        Ok(total)
    }

    /// `f = −∂E/∂u`, scattered per element as `−V_e P_e g_a`.
    pub fn internal_forces(&self, u: &[Point3]) -> Result<Vec<Point3>, Inverted> {
        let mut out = vec![[0.0; 3]; self.mesh.num_vertices()];
        for e in 0..self.mesh.num_tets() {
            let f = self.deformation_gradient(e, u);
            let p = pk_stress(&f, &self.material).map_err(|_| Inverted {
                element: e,
                det: f.determinant(),
            })?;
            let vol = self.mesh.volumes[e];
            for (a, &v) in self.mesh.tets[e].iter().enumerate() {
                let g = self.grads[e][a];
                for i in 0..3 {
                    out[v][i] -= vol * (p[(i, 0)] * g[0] + p[(i, 1)] * g[1] + p[(i, 2)] * g[2]);
                }
            }
        }
        Ok(out)
    }

    pub fn per_tet_invariants(&self, u: &[Point3]) -> Result<Vec<StressInvariants>, Inverted> {
        (0..self.mesh.num_tets())
            .map(|e| {
                let f = self.deformation_gradient(e, u);
                pk_stress(&f, &self.material)
                    .map(|p| stress_invariants(&p))
                    .map_err(|_| Inverted {
                        element: e,
                        det: f.determinant(),
                    })
            })
            .collect()
    }

    /// 12×12 element stiffness `V Σ_jl A_ij,kl g_a,j g_b,l`, rows `3a + i`.
    pub fn element_hessian(&self, e: usize, u: &[Point3]) -> Result<[[f64; 12]; 12], Inverted> {
        let f = self.deformation_gradient(e, u);
        let a = stress_tangent(&f, &self.material).map_err(|_| Inverted {
            element: e,
            det: f.determinant(),
        })?;
        let g = &self.grads[e];
        let vol = self.mesh.volumes[e];
        let mut k = [[0.0; 12]; 12];
        // c[a][ij][k][b] contraction split in two passes to stay O(4·9·9 + 16·81).
        let mut ag = [[[0.0; 4]; 3]; 9];
        for ij in 0..9 {
            for kk in 0..3 {
                for b in 0..4 {
                    ag[ij][kk][b] = (0..3).map(|l| a[ij][3 * kk + l] * g[b][l]).sum();
                }
            }
        }
        for aa in 0..4 {
            for i in 0..3 {
                for b in 0..4 {
                    for kk in 0..3 {
                        let s: f64 = (0..3).map(|j| g[aa][j] * ag[3 * i + j][kk][b]).sum();
                        k[3 * aa + i][3 * b + kk] = vol * s;
                    }
                }
            }
        }
        Ok(k)
    }
}

/// Map from mesh vertices to free-DOF blocks, ordered for a narrow profile.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// `slot[v]` is the position of free vertex `v` in the solve ordering.
    pub slot: Vec<Option<usize>>,
    pub free_vertices: Vec<usize>,
    first: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TetMesh, constrained: &[bool]) -> DofMap {
        let n = mesh.num_vertices();
        let mut local = vec![usize::MAX; n];
        let mut free = Vec::new();
        for v in 0..n {
            if !constrained[v] {
                local[v] = free.len();
                free.push(v);
            }
        }
        let mut adj = vec![Vec::new(); free.len()];
        for tet in &mesh.tets {
            for &a in tet {
                for &b in tet {
                    if a != b && !constrained[a] && !constrained[b] {
                        adj[local[a]].push(local[b]);
                    }
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        let order = super::skyline::reverse_cuthill_mckee(&adj);
        let mut slot = vec![None; n];
        let mut free_vertices = Vec::with_capacity(free.len());
        for (pos, &loc) in order.iter().enumerate() {
            slot[free[loc]] = Some(pos);
            free_vertices.push(free[loc]);
        }
        let mut first_block = (0..free_vertices.len()).collect::<Vec<_>>();
        for (loc, nbrs) in adj.iter().enumerate() {
            let p = slot[free[loc]].expect("free vertex has a slot");
            for &w in nbrs {
                let q = slot[free[w]].expect("free vertex has a slot");
                first_block[p] = first_block[p].min(q);
            }
        }
        let first = (0..3 * free_vertices.len())
            .map(|dof| 3 * first_block[dof / 3])
            .collect();
        DofMap {
            slot,
            free_vertices,
            first,
        }
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.free_vertices.len()
    }

    pub fn empty_matrix(&self) -> SkylineMatrix {
        SkylineMatrix::with_profile(self.first.clone())
    }

    pub fn gather(&self, field: &[Point3]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_dofs());
        for &v in &self.free_vertices {
            out.extend_from_slice(&field[v]);
        }
        out
    }
}

impl FemModel<'_> {
    /// Assembles the free-free stiffness block. When `constrained_step` is
    /// given, also returns `−K_fc·Δc` for a linear boundary predictor.
    pub fn assemble(
        &self,
        u: &[Point3],
        dofs: &DofMap,
        matrix: &mut SkylineMatrix,
        constrained_step: Option<&[Point3]>,
    ) -> Result<Vec<f64>, Inverted> {
        matrix.clear();
        let mut coupling = vec![0.0; dofs.num_dofs()];
        for e in 0..self.mesh.num_tets() {
            let k = self.element_hessian(e, u)?;
            let tet = self.mesh.tets[e];
            for a in 0..4 {
                let Some(pa) = dofs.slot[tet[a]] else {
                    continue;
                };
                for b in 0..4 {
                    match dofs.slot[tet[b]] {
                        Some(pb) => {
                            if pb > pa {
                                continue;
                            }
                            for i in 0..3 {
                                for kk in 0..3 {
                                    matrix.add(3 * pa + i, 3 * pb + kk, k[3 * a + i][3 * b + kk]);
                                }
                            }
                        }
                        None => {
                            if let Some(dc) = constrained_step {
                                let d = dc[tet[b]];
                                for i in 0..3 {
                                    coupling[3 * pa + i] -= (0..3)
                                        .map(|kk| k[3 * a + i][3 * b + kk] * d[kk])
                                        .sum::<f64>();
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(coupling)
    }
}
