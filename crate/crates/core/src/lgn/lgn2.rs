use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lgn1::dims;
use crate::dataset::{
    ChannelStats, NormStats, SubgraphSample, LGN2_EDGE_WIDTH, LGN2_STRUT_WIDTH, LGN2_TET_WIDTH,
};
use crate::error::{ModelError, NnError};
use crate::nn::{GraphIndex, MessageBlock, Mlp, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lgn2Config {
    pub latent: usize,
    pub hidden_layers: usize,
    pub message_passing_steps: usize,
    pub layer_norm: bool,
}

impl Default for Lgn2Config {
    fn default() -> Self {
        Lgn2Config {
            latent: 64,
            hidden_layers: 2,
            message_passing_steps: 4,
            layer_norm: true,
        }
    }
}

/// Up-mapper from reduced increments to tet-vertex increments relative to
/// the owning strut node.
#[derive(Debug, Clone, PartialEq)]
pub struct Lgn2Model {
    pub config: Lgn2Config,
    pub params: ParamStore,
    pub strut_encoder: Mlp,
    pub tet_encoder: Mlp,
    pub edge_encoder: Mlp,
    pub processor: Vec<MessageBlock>,
    pub decoder: Mlp,
    pub stats: NormStats,
}

pub fn lgn2_stats() -> NormStats {
    NormStats {
        groups: vec![
            ChannelStats::new("strut", LGN2_STRUT_WIDTH, 0),
            ChannelStats::new("tet", LGN2_TET_WIDTH, 0),
            ChannelStats::new("edge", LGN2_EDGE_WIDTH, 3),
            ChannelStats::new("target", 3, 0),
        ],
    }
}

/// Disjoint union of subgraphs: all strut rows, then all tet rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphBatch {
    pub strut_features: Array2<f64>,
    pub tet_features: Array2<f64>,
    pub edge_features: Array2<f64>,
    pub edges: Vec<[usize; 2]>,
    pub target: Array2<f64>,
    /// Start row of each sample's tet block within `tet_features`.
    pub tet_offsets: Vec<usize>,
}

impl SubgraphBatch {
    pub fn new(samples: &[&SubgraphSample]) -> SubgraphBatch {
        let total_struts: usize = samples.iter().map(|s| s.num_struts()).sum();
        let mut edges = Vec::new();
        let mut tet_offsets = Vec::with_capacity(samples.len());
        let (mut so, mut to) = (0, 0);
        for s in samples {
            let ns = s.num_struts();
            let map = |l: usize| {
                if l < ns {
                    so + l
                } else {
                    total_struts + to + (l - ns)
                }
            };
            edges.extend(s.edges.iter().map(|&[r, t]| [map(r), map(t)]));
            tet_offsets.push(to);
            so += ns;
            to += s.num_tets();
        }
        let stack = |f: &dyn Fn(&SubgraphSample) -> ArrayView2<'_, f64>, width: usize| {
            if samples.is_empty() {
                return Array2::zeros((0, width));
            }
            let views: Vec<_> = samples.iter().map(|s| f(s)).collect();
            concatenate(Axis(0), &views).expect("uniform widths")
        };
        SubgraphBatch {
            strut_features: stack(&|s| s.strut_features.view(), LGN2_STRUT_WIDTH),
            tet_features: stack(&|s| s.tet_features.view(), LGN2_TET_WIDTH),
            edge_features: stack(&|s| s.edge_features.view(), LGN2_EDGE_WIDTH),
            target: stack(&|s| s.target.view(), 3),
            edges,
            tet_offsets,
        }
    }

    pub fn num_struts(&self) -> usize {
        self.strut_features.nrows()
    }

    pub fn num_tets(&self) -> usize {
        self.tet_features.nrows()
    }
}

impl Lgn2Model {
    pub fn new(config: Lgn2Config, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let (l, h, ln) = (config.latent, config.hidden_layers, config.layer_norm);
        let strut_encoder = Mlp::new(
            &mut params,
            "lgn2.enc.strut",
            &dims(LGN2_STRUT_WIDTH, l, h, l),
            ln,
            &mut rng,
        );
        let tet_encoder = Mlp::new(
            &mut params,
            "lgn2.enc.tet",
            &dims(LGN2_TET_WIDTH, l, h, l),
            ln,
            &mut rng,
        );
        let edge_encoder = Mlp::new(
            &mut params,
            "lgn2.enc.edge",
            &dims(LGN2_EDGE_WIDTH, l, h, l),
            ln,
            &mut rng,
        );
        let processor = (0..config.message_passing_steps)
            .map(|b| {
                MessageBlock::new(
                    &mut params,
                    &format!("lgn2.proc{b}"),
                    l,
                    &vec![l; h],
                    ln,
                    &mut rng,
                )
            })
            .collect();
        let decoder = Mlp::new(&mut params, "lgn2.dec", &dims(l, l, h, 3), false, &mut rng);
        Lgn2Model {
            config,
            params,
            strut_encoder,
            tet_encoder,
            edge_encoder,
            processor,
            decoder,
            stats: lgn2_stats(),
        }
    }

    pub fn fit_stats(&mut self, samples: &[SubgraphSample]) {
        let mut stats = lgn2_stats();
        for s in samples {
            stats.get_mut("strut").push_rows(s.strut_features.view());
            stats.get_mut("tet").push_rows(s.tet_features.view());
            stats.get_mut("edge").push_rows(s.edge_features.view());
            stats.get_mut("target").push_rows(s.target.view());
        }
        self.stats = stats;
    }

    /// Normalized δU for every tet row of the batch.
    pub fn forward_tape(&self, tape: &mut Tape<'_>, batch: &SubgraphBatch) -> Result<Var, NnError> {
        let widths = (
            batch.strut_features.ncols(),
            batch.tet_features.ncols(),
            batch.edge_features.ncols(),
        );
        if widths != (LGN2_STRUT_WIDTH, LGN2_TET_WIDTH, LGN2_EDGE_WIDTH) {
            return Err(NnError::shape(
                "lgn2 input",
                format!("widths {widths:?}, want ({LGN2_STRUT_WIDTH}, {LGN2_TET_WIDTH}, {LGN2_EDGE_WIDTH})"),
            ));
        }
        let ns = batch.num_struts();
        let graph = GraphIndex::new(&batch.edges, ns + batch.num_tets())?;
        let xs = tape.constant(self.stats.get("strut").normalized(&batch.strut_features));
        let xt = tape.constant(self.stats.get("tet").normalized(&batch.tet_features));
        let xe = tape.constant(self.stats.get("edge").normalized(&batch.edge_features));
        let hs = self.strut_encoder.apply(tape, xs)?;
        let ht = self.tet_encoder.apply(tape, xt)?;
        let mut n = tape.concat_rows(&[hs, ht])?;
        let mut e = self.edge_encoder.apply(tape, xe)?;
        for block in &self.processor {
            (n, e) = block.apply(tape, n, e, &graph)?;
        }
        let tets = tape.row_slice(n, ns, ns + batch.num_tets())?;
        self.decoder.apply(tape, tets)
    }

    /// Physical δU for every tet row of the batch.
    pub fn predict_batch(&self, batch: &SubgraphBatch) -> Result<Array2<f64>, ModelError> {
        let mut tape = Tape::new(&self.params);
        let out = self.forward_tape(&mut tape, batch)?;
        Ok(self.stats.get("target").denormalized(tape.value(out)))
    }
}

pub fn lgn2_forward(model: &Lgn2Model, sample: &SubgraphSample) -> Result<Array2<f64>, ModelError> {
    model.predict_batch(&SubgraphBatch::new(&[sample]))
}

/// Mean over tet rows and channels of the normalized squared error.
pub fn lgn2_loss(
    tape: &mut Tape<'_>,
    model: &Lgn2Model,
    batch: &SubgraphBatch,
) -> Result<Var, ModelError> {
    let pred = model.forward_tape(tape, batch)?;
    let t = tape.constant(model.stats.get("target").normalized(&batch.target));
    let d = tape.sub(pred, t)?;
    Ok(tape.mean_square(d))
}
