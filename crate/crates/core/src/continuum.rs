//! Neo-Hookean kinematics and stress on constant-strain tetrahedra.
//!
//! Energy density `Ψ = ½λ(ln J)² − μ ln J + ½μ(F:F − 3)` and first
//! Piola-Kirchhoff stress `P = λ ln J F⁻ᵀ + μ(F − F⁻ᵀ)`, with `J = det F`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::ContinuumError;
use crate::geometry::{Point3, TetMesh};

pub type Tensor3 = Matrix3<f64>;

/// Smallest `J` used when stresses are evaluated on network-predicted fields.
pub const J_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// First Lamé parameter (MPa).
    pub lambda: f64,
    /// Shear modulus (MPa).
    pub mu: f64,
    /// Rest density (g/mm³). Carried for completeness; the quasistatic solver ignores it.
    pub rho0: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            lambda: 3.0,
            mu: 1.0,
            rho0: 1.1e-3,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu > 0.0) {
            return Err(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.lambda >= 0.0) {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressInvariants {
    /// `tr P` (MPa).
    pub i1: f64,
    /// `½ P:P` (MPa²).
    pub j2: f64,
}

/// Rest edge matrix `Dm = [X1−X0, X2−X0, X3−X0]` (edges as columns).
pub fn rest_edge_matrix(rest: &[Point3; 4]) -> Tensor3 {
    let mut dm = Tensor3::zeros();
    for a in 0..3 {
        for i in 0..3 {
            dm[(i, a)] = rest[a + 1][i] - rest[0][i];
        }
    }
    dm
}

pub fn rest_edge_inverse(rest: &[Point3; 4]) -> Result<Tensor3, ContinuumError> {
    let dm = rest_edge_matrix(rest);
    let det = dm.determinant();
    let scale = dm.norm().powi(3).max(f64::MIN_POSITIVE);
    if det.abs() <= 1e-14 * scale {
        return Err(ContinuumError::SingularElement { det });
    }
    dm.try_inverse()
        .ok_or(ContinuumError::SingularElement { det })
}

/// `F = I + Du·Dm⁻¹`; exact for affine displacement fields.
pub fn deformation_gradient(
    rest: &[Point3; 4],
    disp: &[Point3; 4],
) -> Result<Tensor3, ContinuumError> {
    let dm_inv = rest_edge_inverse(rest)?;
    let mut du = Tensor3::zeros();
    for a in 0..3 {
        for i in 0..3 {
            du[(i, a)] = disp[a + 1][i] - disp[0][i];
        }
    }
    Ok(Tensor3::identity() + du * dm_inv)
}

fn checked_det(f: &Tensor3) -> Result<f64, ContinuumError> {
    let j = f.determinant();
    if j > 0.0 && j.is_finite() {
        Ok(j)
    } else {
        Err(ContinuumError::InvertedElement { det: j })
    }
}

/// Transpose of the cofactor matrix divided by `j`: equals `F⁻ᵀ` when `j = det F`.
fn inverse_transpose_with(f: &Tensor3, j: f64) -> Tensor3 {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        f[(r1, s1)] * f[(r2, s2)] - f[(r1, s2)] * f[(r2, s1)]
    };
    Tensor3::from_fn(|r, s| c(r, s) / j)
}

pub fn neo_hookean_energy(f: &Tensor3, mat: &Material) -> Result<f64, ContinuumError> {
    let j = checked_det(f)?;
    let lnj = j.ln();
    Ok(0.5 * mat.lambda * lnj * lnj - mat.mu * lnj + 0.5 * mat.mu * (f.norm_squared() - 3.0))
}

pub fn pk_stress(f: &Tensor3, mat: &Material) -> Result<Tensor3, ContinuumError> {
    let j = checked_det(f)?;
    let f_it = inverse_transpose_with(f, j);
    Ok(f_it * (mat.lambda * j.ln()) + (f - f_it) * mat.mu)
}

/// First PK stress with `J ← max(J, J_CLAMP)`, for fields produced by a
/// network where inverted elements must not abort evaluation.
pub fn pk_stress_clamped(f: &Tensor3, mat: &Material) -> Tensor3 {
    let j = f.determinant();
    let j = if j.is_finite() {
        j.max(J_CLAMP)
    } else {
        J_CLAMP
    };
    let f_it = inverse_transpose_with(f, j);
    f_it * (mat.lambda * j.ln()) + (f - f_it) * mat.mu
}

/// `∂P_ij/∂F_kl` laid out as `[3i+j][3k+l]`.
pub fn stress_tangent(f: &Tensor3, mat: &Material) -> Result<[[f64; 9]; 9], ContinuumError> {
    let j = checked_det(f)?;
    let f_it = inverse_transpose_with(f, j);
    let f_inv = f_it.transpose();
    let coef = mat.lambda * j.ln() - mat.mu;
    let mut a = [[0.0; 9]; 9];
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut v = mat.lambda * f_it[(i, jj)] * f_it[(k, l)]
                        - coef * f_inv[(jj, k)] * f_inv[(l, i)];
                    if i == k && jj == l {
                        v += mat.mu;
                    }
                    a[3 * i + jj][3 * k + l] = v;
                }
            }
        }
    }
    Ok(a)
}

pub fn stress_invariants(p: &Tensor3) -> StressInvariants {
    StressInvariants {
        i1: p.trace(),
        j2: 0.5 * p.norm_squared(),
    }
}

/// Rest-volume-weighted average of per-tet invariants at each vertex;
/// vertices with no incident tet get zeros.
pub fn element_to_node_stress(
    mesh: &TetMesh,
    per_tet: &[StressInvariants],
) -> Result<Vec<StressInvariants>, ContinuumError> {
    if per_tet.len() != mesh.num_tets() {
        return Err(ContinuumError::LengthMismatch {
            expected: mesh.num_tets(),
            found: per_tet.len(),
        });
    }
    let n = mesh.num_vertices();
    let mut acc = vec![StressInvariants::default(); n];
    let mut weight = vec![0.0; n];
    for (t, tet) in mesh.tets.iter().enumerate() {
        let w = mesh.volumes[t];
        for &v in tet {
            acc[v].i1 += w * per_tet[t].i1;
            acc[v].j2 += w * per_tet[t].j2;
            weight[v] += w;
        }
    }
    for (s, w) in acc.iter_mut().zip(&weight) {
        if *w > 0.0 {
            s.i1 /= w;
            s.j2 /= w;
        }
    }
    Ok(acc)
}
