use std::f64::consts::TAU;

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::samples::{lgn1_edge_features, GraphSample, SubgraphSample};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub rotate: bool,
    /// Standard deviation of position noise (mm); 0 disables it.
    pub noise_std: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotate: true,
            noise_std: 0.003,
        }
    }
}

fn rotate_point(p: Point3, c: f64, s: f64) -> Point3 {
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Rotates three consecutive columns starting at `col` as xyz vectors.
fn rotate_columns(x: &mut Array2<f64>, col: usize, c: f64, s: f64) {
    for mut r in x.rows_mut() {
        let (a, b) = (r[col], r[col + 1]);
        r[col] = c * a - s * b;
        r[col + 1] = s * a + c * b;
    }
}

/// Rotates every vector quantity of `sample` by `angle` about +Z. Norm
/// columns are copied, so they are preserved exactly.
pub fn rotate_sample(sample: &GraphSample, angle: f64) -> GraphSample {
    let (s, c) = angle.sin_cos();
    let mut out = sample.clone();
    out.rest = sample.rest.iter().map(|p| rotate_point(*p, c, s)).collect();
    out.current = sample
        .current
        .iter()
        .map(|p| rotate_point(*p, c, s))
        .collect();
    rotate_columns(&mut out.edge_features, 0, c, s);
    rotate_columns(&mut out.edge_features, 4, c, s);
    rotate_columns(&mut out.target_disp, 0, c, s);
    if let Some(pf) = &mut out.pushforward {
        rotate_columns(&mut pf.disp, 0, c, s);
    }
    out
}

/// Perturbs current positions by `noise` and corrects the first-step target
/// so that the pair (noisy state, true next state) stays consistent.
pub fn perturb_positions(sample: &GraphSample, noise: &[Point3]) -> GraphSample {
    let mut out = sample.clone();
    for (i, n) in noise.iter().enumerate() {
        for j in 0..3 {
            out.current[i][j] += n[j];
            out.target_disp[[i, j]] -= n[j];
        }
    }
    let fresh = lgn1_edge_features(&out.edges, &out.rest, &out.current);
    out.edge_features
        .slice_mut(s![.., 4..8])
        .assign(&fresh.slice(s![.., 4..8]));
    out
}

/// Random Z rotation followed by Gaussian position noise.
pub fn augment<R: Rng>(sample: &GraphSample, config: &AugmentConfig, rng: &mut R) -> GraphSample {
    let mut out = if config.rotate {
        rotate_sample(sample, rng.random_range(0.0..TAU))
    } else {
        sample.clone()
    };
    if config.noise_std > 0.0 {
        let normal = Normal::new(0.0, config.noise_std).expect("finite noise std");
        let noise: Vec<Point3> = (0..out.num_nodes())
            .map(|_| [normal.sample(rng), normal.sample(rng), normal.sample(rng)])
            .collect();
        out = perturb_positions(&out, &noise);
    }
    out
}

pub fn rotate_subgraph(sample: &SubgraphSample, angle: f64) -> SubgraphSample {
    let (s, c) = angle.sin_cos();
    let mut out = sample.clone();
    rotate_columns(&mut out.strut_features, 1, c, s);
    rotate_columns(&mut out.edge_features, 3, c, s);
    rotate_columns(&mut out.target, 0, c, s);
    out
}
