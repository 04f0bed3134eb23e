use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::tape::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// Per-step multiplicative learning-rate decay.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, decay: f64) -> Self {
        AdamConfig {
            lr,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// `lr₀ · decay^t`.
    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr * self.decay.powf(step as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: store
                .values
                .iter()
                .map(|p| Array2::zeros(p.raw_dim()))
                .collect(),
            v: store
                .values
                .iter()
                .map(|p| Array2::zeros(p.raw_dim()))
                .collect(),
        }
    }

    /// One bias-corrected update. The learning rate comes from the schedule
    /// at the pre-increment counter. Parameters with `trainable[i] == false`
    /// are skipped entirely (values and moments); a missing gradient for a
    /// trainable parameter counts as zero.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &[Option<Array2<f64>>],
        trainable: Option<&[bool]>,
    ) {
        let c = self.config;
        let lr = c.lr_at(self.step);
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        for i in 0..store.len() {
            if trainable.is_some_and(|t| !t[i]) {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            match &grads[i] {
                Some(g) => Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                }),
                None => {
                    m.mapv_inplace(|x| c.beta1 * x);
                    v.mapv_inplace(|x| c.beta2 * x);
                }
            }
            Zip::from(&mut store.values[i])
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    *p -= lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
                });
        }
    }

    /// Moments flattened as `m` then `v`, parameter by parameter.
    pub fn to_flat(&self) -> Vec<f64> {
        self.m
            .iter()
            .chain(&self.v)
            .flat_map(|a| a.iter().copied())
            .collect()
    }

    pub fn load_flat(&mut self, data: &[f64]) -> bool {
        let total: usize = self.m.iter().chain(&self.v).map(|a| a.len()).sum();
        if data.len() != total {
            return false;
        }
        let mut at = 0;
        for a in self.m.iter_mut().chain(self.v.iter_mut()) {
            let n = a.len();
            a.iter_mut()
                .zip(&data[at..at + n])
                .for_each(|(d, s)| *d = *s);
            at += n;
        }
        true
    }
}
