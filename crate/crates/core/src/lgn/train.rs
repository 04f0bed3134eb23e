use std::f64::consts::TAU;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lgn1::{lgn1_displacement_loss, lgn1_stress_loss, Lgn1Model};
use super::lgn2::{lgn2_loss, Lgn2Model, SubgraphBatch};
use crate::dataset::{augment, rotate_subgraph, AugmentConfig, GraphSample, SubgraphSample};
use crate::error::ModelError;
use crate::nn::{AdamConfig, AdamState, Tape};

/// Augmented passes over the corpus used to fit normalization statistics.
const STATS_DRAWS: usize = 4;
const STATS_SEED: u64 = 0x5eed_57a7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Displacement,
    Stress,
    Lgn2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay: f64,
    pub batch_size: usize,
    /// Optimizer steps (reduced predictor).
    pub steps: u64,
    /// Passes over the corpus (up-mapper).
    pub epochs: usize,
    pub pushforward: bool,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl TrainConfig {
    pub fn lgn1() -> Self {
        TrainConfig {
            lr: 1e-4,
            decay: 0.999995,
            batch_size: 1,
            steps: 200_000,
            epochs: 0,
            pushforward: true,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }

    pub fn lgn2() -> Self {
        TrainConfig {
            lr: 5e-4,
            decay: 0.99999,
            batch_size: 256,
            steps: 0,
            epochs: 300,
            pushforward: false,
            seed: 0,
            augment: AugmentConfig {
                rotate: true,
                noise_std: 0.0,
            },
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::lgn1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    /// Single-step term (equals `loss` without pushforward).
    pub first: f64,
    /// Chained-step term, 0 when absent.
    pub second: f64,
}

/// `⌈n / batch⌉`.
pub fn steps_per_epoch(n: usize, batch: usize) -> usize {
    n.div_ceil(batch.max(1))
}

fn add_grads(acc: &mut [Option<Array2<f64>>], g: Vec<Option<Array2<f64>>>, scale: f64) {
    for (a, g) in acc.iter_mut().zip(g) {
        if let Some(g) = g {
            match a {
                Some(a) => a.scaled_add(scale, &g),
                None => *a = Some(g * scale),
            }
        }
    }
}

/// Trains one phase of the reduced predictor. The displacement phase
/// updates everything but the stress decoder; the stress phase updates only
/// the stress decoder and needs a displacement-trained model.
pub fn train_lgn1(
    model: &mut Lgn1Model,
    samples: &[GraphSample],
    config: &TrainConfig,
    phase: Phase,
    mut on_step: impl FnMut(&LossRecord),
) -> Result<Vec<LossRecord>, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mask = match phase {
        Phase::Displacement => {
            if model.stats.get("node").count == 0 {
                model.fit_stats_augmented(
                    samples,
                    &config.augment,
                    STATS_DRAWS,
                    config.seed ^ STATS_SEED,
                );
            }
            model.displacement_mask()
        }
        Phase::Stress => {
            if model.displacement_steps == 0 {
                return Err(ModelError::PhaseOrder("stress"));
            }
            model.stress_mask()
        }
        Phase::Lgn2 => return Err(ModelError::PhaseOrder("lgn2")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&model.params, AdamConfig::new(config.lr, config.decay));
    let batch = config.batch_size.max(1);
    let mut log = Vec::with_capacity(config.steps as usize);
    for step in 0..config.steps {
        let mut grads = vec![None; model.params.len()];
        let (mut loss, mut first, mut second) = (0.0, 0.0, 0.0);
        for _ in 0..batch {
            let sample = &samples[rng.random_range(0..samples.len())];
            let sample = augment(sample, &config.augment, &mut rng);
            let mut tape = Tape::with_trainable(&model.params, &mask);
            let root = match phase {
                Phase::Displacement => {
                    let l = lgn1_displacement_loss(&mut tape, model, &sample, config.pushforward)?;
                    first += tape.scalar(l.first);
                    second += l.second.map_or(0.0, |v| tape.scalar(v));
                    l.total
                }
                _ => {
                    let l = lgn1_stress_loss(&mut tape, model, &sample)?;
                    first += tape.scalar(l);
                    l
                }
            };
            loss += tape.scalar(root);
            add_grads(&mut grads, tape.backward(root).params, 1.0 / batch as f64);
        }
        let b = batch as f64;
        let record = LossRecord {
            step,
            lr: adam.config.lr_at(adam.step),
            loss: loss / b,
            first: first / b,
            second: second / b,
        };
        if !record.loss.is_finite() {
            return Err(ModelError::NonFinite {
                step: step as usize,
            });
        }
        adam.step(&mut model.params, &grads, Some(&mask));
        on_step(&record);
        log.push(record);
    }
    match phase {
        Phase::Displacement => model.displacement_steps += config.steps,
        _ => model.stress_steps += config.steps,
    }
    Ok(log)
}

/// Minibatch training of the up-mapper; one record per optimizer step.
pub fn train_lgn2(
    model: &mut Lgn2Model,
    samples: &[SubgraphSample],
    config: &TrainConfig,
    mut on_step: impl FnMut(&LossRecord),
) -> Result<Vec<LossRecord>, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if model.stats.get("target").count == 0 {
        model.fit_stats(samples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&model.params, AdamConfig::new(config.lr, config.decay));
    let batch = config.batch_size.max(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(config.epochs * steps_per_epoch(samples.len(), batch));
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let rotated: Vec<SubgraphSample> = chunk
                .iter()
                .map(|&i| {
                    if config.augment.rotate {
                        rotate_subgraph(&samples[i], rng.random_range(0.0..TAU))
                    } else {
                        samples[i].clone()
                    }
                })
                .collect();
            let refs: Vec<&SubgraphSample> = rotated.iter().collect();
            let data = SubgraphBatch::new(&refs);
            let mut tape = Tape::new(&model.params);
            let root = lgn2_loss(&mut tape, model, &data)?;
            let loss = tape.scalar(root);
            let record = LossRecord {
                step: adam.step,
                lr: adam.config.lr_at(adam.step),
                loss,
                first: loss,
                second: 0.0,
            };
            if !loss.is_finite() {
                return Err(ModelError::NonFinite {
                    step: adam.step as usize,
                });
            }
            let grads = tape.backward(root).params;
            drop(tape);
            adam.step(&mut model.params, &grads, None);
            on_step(&record);
            log.push(record);
        }
    }
    Ok(log)
}
