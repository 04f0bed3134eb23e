use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Lower bound on a finalized channel standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Running per-channel moments (Welford), mergeable across shards.
///
/// Channels flagged in `bypass` (one-hot codes) pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub name: String,
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub bypass: Vec<bool>,
}

impl ChannelStats {
    /// `bypass_prefix` leading channels are left un-normalized.
    pub fn new(name: &str, width: usize, bypass_prefix: usize) -> Self {
        ChannelStats {
            name: name.to_string(),
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
            bypass: (0..width).map(|c| c < bypass_prefix).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width());
        self.count += 1;
        let n = self.count as f64;
        for (c, &x) in row.iter().enumerate() {
            let d = x - self.mean[c];
            self.mean[c] += d / n;
            self.m2[c] += d * (x - self.mean[c]);
        }
    }

    pub fn push_rows(&mut self, rows: ArrayView2<'_, f64>) {
        for r in rows.rows() {
            match r.as_slice() {
                Some(s) => self.push(s),
                None => self.push(&r.to_vec()),
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &ChannelStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for c in 0..self.width() {
            let d = other.mean[c] - self.mean[c];
            self.mean[c] += d * nb / n;
            self.m2[c] += other.m2[c] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    /// Population standard deviation, floored.
    pub fn std(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|m| {
                if self.count == 0 {
                    1.0
                } else {
                    (m / self.count as f64).sqrt().max(STD_FLOOR)
                }
            })
            .collect()
    }

    pub fn apply(&self, x: &mut Array2<f64>, dir: Direction) {
        let std = self.std();
        for mut r in x.rows_mut() {
            for (c, v) in r.iter_mut().enumerate() {
                if self.bypass[c] {
                    continue;
                }
                *v = match dir {
                    Direction::Forward => (*v - self.mean[c]) / std[c],
                    Direction::Inverse => *v * std[c] + self.mean[c],
                };
            }
        }
    }

    pub fn normalized(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.clone();
        self.apply(&mut y, Direction::Forward);
        y
    }

    pub fn denormalized(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.clone();
        self.apply(&mut y, Direction::Inverse);
        y
    }

    /// Per-channel scale such that `raw = normalized · scale + mean`.
    pub fn scale(&self) -> Vec<f64> {
        let std = self.std();
        (0..self.width())
            .map(|c| if self.bypass[c] { 1.0 } else { std[c] })
            .collect()
    }

    pub fn offset(&self) -> Vec<f64> {
        (0..self.width())
            .map(|c| if self.bypass[c] { 0.0 } else { self.mean[c] })
            .collect()
    }
}

/// Named channel groups for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub groups: Vec<ChannelStats>,
}

impl NormStats {
    pub fn get(&self, name: &str) -> &ChannelStats {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .unwrap_or_else(|| panic!("no normalization group {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut ChannelStats {
        self.groups
            .iter_mut()
            .find(|g| g.name == name)
            .unwrap_or_else(|| panic!("no normalization group {name}"))
    }

    pub fn merge(&mut self, other: &NormStats) {
        for g in &other.groups {
            self.get_mut(&g.name).merge(g);
        }
    }

    /// Flattened `(count, mean, m2)` per group, for binary checkpoints.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.groups {
            out.push(g.count as f64);
            out.extend(&g.mean);
            out.extend(&g.m2);
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat) into a stats object of the same layout.
    pub fn load_flat(&mut self, data: &[f64]) -> Option<usize> {
        let mut at = 0;
        for g in &mut self.groups {
            let w = g.width();
            if data.len() < at + 1 + 2 * w {
                return None;
            }
            g.count = data[at] as u64;
            g.mean.copy_from_slice(&data[at + 1..at + 1 + w]);
            g.m2.copy_from_slice(&data[at + 1 + w..at + 1 + 2 * w]);
            at += 1 + 2 * w;
        }
        Some(at)
    }
}
