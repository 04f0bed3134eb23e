use serde::{Deserialize, Serialize};

use crate::continuum::{pk_stress_clamped, Material};
use crate::error::ModelError;
use crate::geometry::{Point3, TetMesh};
use crate::oracle::FemModel;

/// Slice heights as fractions of the mesh height.
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.10, 0.15, 0.20, 0.25, 0.50, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub fraction: f64,
    pub z: f64,
    /// `(tet, rest cross-section area)` for every tet the plane cuts.
    pub tets: Vec<(usize, f64)>,
}

impl Slice {
    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.tets.iter().map(|t| t.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePlan {
    pub slices: Vec<Slice>,
}

/// Cross-section of a tet with the plane `z = z0`: `None` unless the plane
/// passes through it (`min z < z0 ≤ max z`), otherwise the area of the
/// triangle or quadrilateral cut.
pub fn tet_plane_section(p: &[Point3; 4], z0: f64) -> Option<f64> {
    let s: Vec<f64> = p.iter().map(|q| q[2] - z0).collect();
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < 0.0 && hi >= 0.0) {
        return None;
    }
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4);
    for a in 0..4 {
        for b in 0..4 {
            if s[a] < 0.0 && s[b] >= 0.0 {
                let t = s[a] / (s[a] - s[b]);
                pts.push([
                    p[a][0] + t * (p[b][0] - p[a][0]),
                    p[a][1] + t * (p[b][1] - p[a][1]),
                ]);
            }
        }
    }
    let n = pts.len() as f64;
    let c = pts
        .iter()
        .fold([0.0, 0.0], |acc, q| [acc[0] + q[0] / n, acc[1] + q[1] / n]);
    pts.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.total_cmp(&tb)
    });
    let mut twice = 0.0;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        twice += a[0] * b[1] - a[1] * b[0];
    }
    Some(0.5 * twice.abs())
}

/// Horizontal rest-configuration planes at `z_min + f · height`.
pub fn plan_slices(mesh: &TetMesh, fractions: &[f64]) -> SlicePlan {
    let [lo, hi] = mesh.bounds();
    let height = hi[2] - lo[2];
    let slices = fractions
        .iter()
        .map(|&f| {
            let z = lo[2] + f * height;
            let tets = (0..mesh.num_tets())
                .filter_map(|t| tet_plane_section(&mesh.tet_positions(t), z).map(|a| (t, a)))
                .collect();
            Slice {
                fraction: f,
                z,
                tets,
            }
        })
        .collect();
    SlicePlan { slices }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedForce {
    /// Mean over non-empty slices (N); negative in compression.
    pub mean: f64,
    /// Per slice `Σ P_zz · area`, `None` for empty slices.
    pub per_slice: Vec<Option<f64>>,
}

impl HomogenizedForce {
    /// Population standard deviation across non-empty slices.
    pub fn spread(&self) -> f64 {
        let v: Vec<f64> = self.per_slice.iter().flatten().copied().collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    }
}

/// Traction force through each planned slice from per-tet first
/// Piola-Kirchhoff stress, with `J` clamped for inverted rollout elements.
pub fn homogenized_force(
    mesh: &TetMesh,
    disp: &[Point3],
    mat: &Material,
    plan: &SlicePlan,
) -> crate::Result<HomogenizedForce> {
    let model = FemModel::new(mesh, *mat)?;
    let mut pzz = vec![None; mesh.num_tets()];
    let mut per_slice = Vec::with_capacity(plan.slices.len());
    for slice in &plan.slices {
        if slice.is_empty() {
            per_slice.push(None);
            continue;
        }
        let mut f = 0.0;
        for &(t, area) in &slice.tets {
            let p = *pzz[t].get_or_insert_with(|| {
                pk_stress_clamped(&model.deformation_gradient(t, disp), mat)[(2, 2)]
            });
            f += p * area;
        }
        per_slice.push(Some(f));
    }
    let vals: Vec<f64> = per_slice.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(ModelError::AllSlicesEmpty.into());
    }
    Ok(HomogenizedForce {
        mean: vals.iter().sum::<f64>() / vals.len() as f64,
        per_slice,
    })
}
