use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    lgn1_edge_features, AugmentConfig, ChannelStats, GraphSample, NormStats, LGN1_EDGE_WIDTH,
    LGN1_NODE_WIDTH, STRESS_COLUMNS,
};
use crate::error::{ModelError, NnError};
use crate::geometry::NodeType;
use crate::nn::{GraphIndex, MessageBlock, Mlp, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lgn1Config {
    pub latent: usize,
    /// Hidden layers per MLP, each `latent` wide.
    pub hidden_layers: usize,
    pub message_passing_steps: usize,
    pub layer_norm: bool,
}

impl Default for Lgn1Config {
    fn default() -> Self {
        Lgn1Config {
            latent: 128,
            hidden_layers: 2,
            message_passing_steps: 15,
            layer_norm: true,
        }
    }
}

/// Reduced-graph predictor of displacement and stress-invariant increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Lgn1Model {
    pub config: Lgn1Config,
    pub params: ParamStore,
    pub node_encoder: Mlp,
    pub edge_encoder: Mlp,
    pub processor: Vec<MessageBlock>,
    pub disp_decoder: Mlp,
    pub stress_decoder: Mlp,
    pub stats: NormStats,
    /// Optimizer steps taken in each training phase so far.
    pub displacement_steps: u64,
    pub stress_steps: u64,
}

pub(crate) fn dims(input: usize, hidden: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend(std::iter::repeat_n(hidden, layers));
    d.push(output);
    d
}

pub fn lgn1_stats() -> NormStats {
    NormStats {
        groups: vec![
            ChannelStats::new("node", LGN1_NODE_WIDTH, NodeType::COUNT),
            ChannelStats::new("edge", LGN1_EDGE_WIDTH, 0),
            ChannelStats::new("disp", 3, 0),
            ChannelStats::new("stress", 2, 0),
        ],
    }
}

fn push_sample(stats: &mut NormStats, s: &GraphSample) {
    stats.get_mut("node").push_rows(s.node_features.view());
    stats.get_mut("edge").push_rows(s.edge_features.view());
    stats.get_mut("disp").push_rows(s.target_disp.view());
    stats.get_mut("stress").push_rows(s.target_stress.view());
}

/// Normalized outputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Lgn1Outputs {
    pub latent: Var,
    pub disp: Var,
}

impl Lgn1Model {
    pub fn new(config: Lgn1Config, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::default();
        let (l, h) = (config.latent, config.hidden_layers);
        let ln = config.layer_norm;
        let node_encoder = Mlp::new(
            &mut params,
            "lgn1.enc.node",
            &dims(LGN1_NODE_WIDTH, l, h, l),
            ln,
            &mut rng,
        );
        let edge_encoder = Mlp::new(
            &mut params,
            "lgn1.enc.edge",
            &dims(LGN1_EDGE_WIDTH, l, h, l),
            ln,
            &mut rng,
        );
        let processor = (0..config.message_passing_steps)
            .map(|b| {
                MessageBlock::new(
                    &mut params,
                    &format!("lgn1.proc{b}"),
                    l,
                    &vec![l; h],
                    ln,
                    &mut rng,
                )
            })
            .collect();
        let disp_decoder = Mlp::new(
            &mut params,
            "lgn1.dec.disp",
            &dims(l, l, h, 3),
            false,
            &mut rng,
        );
        let stress_decoder = Mlp::new(
            &mut params,
            "lgn1.dec.stress",
            &dims(l + 3, l, h, 2),
            false,
            &mut rng,
        );
        Lgn1Model {
            config,
            params,
            node_encoder,
            edge_encoder,
            processor,
            disp_decoder,
            stress_decoder,
            stats: lgn1_stats(),
            displacement_steps: 0,
            stress_steps: 0,
        }
    }

    /// Accumulates normalization statistics over a corpus.
    pub fn fit_stats(&mut self, samples: &[GraphSample]) {
        let mut stats = lgn1_stats();
        for s in samples {
            push_sample(&mut stats, s);
        }
        self.stats = stats;
    }

    /// Statistics over `draws` augmented copies of every sample, so that the
    /// normalization matches what training actually feeds the network.
    pub fn fit_stats_augmented(
        &mut self,
        samples: &[GraphSample],
        augment: &AugmentConfig,
        draws: usize,
        seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stats = lgn1_stats();
        for _ in 0..draws.max(1) {
            for s in samples {
                push_sample(&mut stats, &crate::dataset::augment(s, augment, &mut rng));
            }
        }
        self.stats = stats;
    }

    /// Only the stress decoder is trainable.
    pub fn stress_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.params.len()];
        for id in self.stress_decoder.param_ids() {
            mask[id] = true;
        }
        mask
    }

    /// Everything except the stress decoder is trainable.
    pub fn displacement_mask(&self) -> Vec<bool> {
        self.stress_mask().iter().map(|m| !m).collect()
    }

    fn check_widths(
        &self,
        nodes: &Array2<f64>,
        edges: &Array2<f64>,
        n_edges: usize,
    ) -> Result<(), NnError> {
        if nodes.ncols() != LGN1_NODE_WIDTH
            || edges.ncols() != LGN1_EDGE_WIDTH
            || edges.nrows() != n_edges
        {
            return Err(NnError::ShapeMismatch {
                op: "lgn1 input",
                detail: format!(
                    "node width {} (want {LGN1_NODE_WIDTH}), edge width {} (want {LGN1_EDGE_WIDTH}), {} edge rows for {n_edges} edges",
                    nodes.ncols(),
                    edges.ncols(),
                    edges.nrows()
                ),
            });
        }
        Ok(())
    }

    /// Encoder, processor and displacement decoder on raw features.
    pub fn forward_tape(
        &self,
        tape: &mut Tape<'_>,
        node_features: &Array2<f64>,
        edge_features: &Array2<f64>,
        graph: &GraphIndex,
    ) -> Result<Lgn1Outputs, NnError> {
        self.check_widths(node_features, edge_features, graph.num_edges())?;
        if node_features.nrows() != graph.num_nodes {
            return Err(NnError::shape(
                "lgn1 input",
                format!(
                    "{} node rows for {} nodes",
                    node_features.nrows(),
                    graph.num_nodes
                ),
            ));
        }
        let xn = tape.constant(self.stats.get("node").normalized(node_features));
        let xe = tape.constant(self.stats.get("edge").normalized(edge_features));
        let mut n = self.node_encoder.apply(tape, xn)?;
        let mut e = self.edge_encoder.apply(tape, xe)?;
        for block in &self.processor {
            (n, e) = block.apply(tape, n, e, graph)?;
        }
        let disp = self.disp_decoder.apply(tape, n)?;
        Ok(Lgn1Outputs { latent: n, disp })
    }

    /// Stress decoder on `[latent ‖ normalized δũ]`.
    pub fn stress_tape(&self, tape: &mut Tape<'_>, out: Lgn1Outputs) -> Result<Var, NnError> {
        self.stress_decoder
            .apply_blocks(tape, &[(out.latent, None), (out.disp, None)])
    }

    /// Physical-unit increments `(δũ, δσ̃)` for raw features.
    pub fn predict(
        &self,
        node_features: &Array2<f64>,
        edge_features: &Array2<f64>,
        edges: &[[usize; 2]],
    ) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
        let graph = GraphIndex::new(edges, node_features.nrows())?;
        let mut tape = Tape::new(&self.params);
        let out = self.forward_tape(&mut tape, node_features, edge_features, &graph)?;
        let sigma = self.stress_tape(&mut tape, out)?;
        Ok((
            self.stats.get("disp").denormalized(tape.value(out.disp)),
            self.stats.get("stress").denormalized(tape.value(sigma)),
        ))
    }
}

pub fn lgn1_forward(
    model: &Lgn1Model,
    sample: &GraphSample,
) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
    model.predict(&sample.node_features, &sample.edge_features, &sample.edges)
}

/// Loss terms of one displacement-phase evaluation.
#[derive(Debug, Clone, Copy)]
pub struct DisplacementLoss {
    pub total: Var,
    pub first: Var,
    pub second: Option<Var>,
    /// Normalized first-pass prediction (for truncation probes).
    pub first_prediction: Var,
}

fn is_prescribed(node_features: &Array2<f64>, i: usize) -> bool {
    node_features[[i, NodeType::Fixed.index()]] == 1.0
        || node_features[[i, NodeType::Loading.index()]] == 1.0
}

/// Input of the chained second step: positions advanced by the severed
/// first prediction (true increments on prescribed nodes), stresses by the
/// true increment. Returns the advanced features and the second target.
pub fn pushforward_state(
    sample: &GraphSample,
    predicted: &Array2<f64>,
) -> Option<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let pf = sample.pushforward.as_ref()?;
    let mut used = predicted.clone();
    for i in 0..sample.num_nodes() {
        if is_prescribed(&sample.node_features, i) {
            used.row_mut(i).assign(&sample.target_disp.row(i));
        }
    }
    let current: Vec<_> = sample
        .current
        .iter()
        .enumerate()
        .map(|(i, p)| {
            [
                p[0] + used[[i, 0]],
                p[1] + used[[i, 1]],
                p[2] + used[[i, 2]],
            ]
        })
        .collect();
    let mut nodes = sample.node_features.clone();
    let mut st = nodes.slice_mut(s![.., STRESS_COLUMNS]);
    st += &sample.target_stress;
    let edges = lgn1_edge_features(&sample.edges, &sample.rest, &current);
    let target = &pf.disp + &sample.target_disp - &used;
    Some((nodes, edges, target))
}

/// `MSE(δũ, target)` plus, when pushforward targets exist and `pushforward`
/// is set, the MSE of a second step run from the severed first prediction.
/// Both terms are means over nodes and channels in normalized units.
pub fn lgn1_displacement_loss(
    tape: &mut Tape<'_>,
    model: &Lgn1Model,
    sample: &GraphSample,
    pushforward: bool,
) -> Result<DisplacementLoss, ModelError> {
    let graph = GraphIndex::new(&sample.edges, sample.num_nodes())?;
    let disp_stats = model.stats.get("disp");
    let out = model.forward_tape(tape, &sample.node_features, &sample.edge_features, &graph)?;
    let t1 = tape.constant(disp_stats.normalized(&sample.target_disp));
    let d1 = tape.sub(out.disp, t1)?;
    let first = tape.mean_square(d1);
    let mut loss = DisplacementLoss {
        total: first,
        first,
        second: None,
        first_prediction: out.disp,
    };
    if !pushforward {
        return Ok(loss);
    }
    let severed = tape.detach(out.disp);
    let predicted = disp_stats.denormalized(tape.value(severed));
    if let Some((nodes, edges, target)) = pushforward_state(sample, &predicted) {
        let out2 = model.forward_tape(tape, &nodes, &edges, &graph)?;
        let t2 = tape.constant(disp_stats.normalized(&target));
        let d2 = tape.sub(out2.disp, t2)?;
        let second = tape.mean_square(d2);
        loss.second = Some(second);
        loss.total = tape.add(first, second)?;
    }
    Ok(loss)
}

/// `MSE(δσ̃, target)` in normalized units, mean over nodes and channels.
pub fn lgn1_stress_loss(
    tape: &mut Tape<'_>,
    model: &Lgn1Model,
    sample: &GraphSample,
) -> Result<Var, ModelError> {
    let graph = GraphIndex::new(&sample.edges, sample.num_nodes())?;
    let out = model.forward_tape(tape, &sample.node_features, &sample.edge_features, &graph)?;
    let sigma = model.stress_tape(tape, out)?;
    let t = tape.constant(model.stats.get("stress").normalized(&sample.target_stress));
    let d = tape.sub(sigma, t)?;
    Ok(tape.mean_square(d))
}
