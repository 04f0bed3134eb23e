use serde::{Deserialize, Serialize};

use crate::geometry::{dist2, Point3};

/// Below this source distance the source value is returned verbatim.
pub const EXACT_DISTANCE: f64 = 1e-12;

/// Precomputed inverse-distance weights from a source cloud to a set of
/// targets; reusable across every field and time step on the same pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdwStencil {
    /// Per target, `(source index, normalized weight)` pairs.
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl IdwStencil {
    /// Selects the `k` nearest sources (ties broken by lower index) and
    /// weights them by `d^−power`. Fewer than `k` sources means all are used.
    pub fn new(sources: &[Point3], targets: &[Point3], k: usize, power: f64) -> IdwStencil {
        assert!(k >= 1 && power > 0.0, "idw needs k >= 1 and power > 0");
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(sources.len());
        let entries = targets
            .iter()
            .map(|t| {
                order.clear();
                order.extend(sources.iter().enumerate().map(|(i, s)| (dist2(*s, *t), i)));
                let k = k.min(order.len());
                if k < order.len() {
                    order.select_nth_unstable_by(k - 1, |a, b| {
                        a.partial_cmp(b).expect("finite distance")
                    });
                }
                let near = &mut order[..k];
                near.sort_by(|a, b| a.partial_cmp(b).expect("finite distance"));
                if let Some(&(_, i)) = near.iter().find(|(d2, _)| d2.sqrt() < EXACT_DISTANCE) {
                    return vec![(i, 1.0)];
                }
                let w: Vec<f64> = near.iter().map(|(d2, _)| d2.sqrt().powf(-power)).collect();
                let total: f64 = w.iter().sum();
                near.iter()
                    .zip(&w)
                    .map(|(&(_, i), wi)| (i, wi / total))
                    .collect()
            })
            .collect();
        IdwStencil { entries }
    }

    pub fn num_targets(&self) -> usize {
        self.entries.len()
    }

    pub fn apply<const D: usize>(&self, values: &[[f64; D]]) -> Vec<[f64; D]> {
        self.entries
            .iter()
            .map(|row| {
                let mut out = [0.0; D];
                for &(i, w) in row {
                    for c in 0..D {
                        out[c] += w * values[i][c];
                    }
                }
                out
            })
            .collect()
    }

    pub fn apply_scalar(&self, values: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&(i, w)| w * values[i]).sum())
            .collect()
    }
}

/// One-shot inverse-distance mapping of a vector field.
pub fn idw_map<const D: usize>(
    values: &[[f64; D]],
    source_positions: &[Point3],
    target_positions: &[Point3],
    k: usize,
    power: f64,
) -> Vec<[f64; D]> {
    IdwStencil::new(source_positions, target_positions, k, power).apply(values)
}
