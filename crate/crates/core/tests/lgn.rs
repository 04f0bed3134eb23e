use latticegraph::config::{BoundaryConfig, GeometryConfig};
use latticegraph::continuum::Material;
use latticegraph::dataset::{
    build_lgn1_samples, build_lgn2_samples, lgn1_edge_features, map_trajectory, AugmentConfig,
    GraphSample, SubgraphSample,
};
use latticegraph::error::ModelError;
use latticegraph::geometry::{assign_tets_to_strut_nodes, CellType, Point3};
use latticegraph::lgn::{
    lgn1_displacement_loss, lgn1_forward, lgn1_stress_loss, lgn2_forward, steps_per_epoch,
    train_lgn1, train_lgn2, Lgn1Config, Lgn1Model, Lgn2Config, Lgn2Model, Phase, SubgraphBatch,
    TrainConfig,
};
use latticegraph::nn::Tape;
use latticegraph::pipeline::{simulate, Specimen};
use ndarray::{array, Array2};

const NO_AUGMENT: AugmentConfig = AugmentConfig {
    rotate: false,
    noise_std: 0.0,
};

fn tiny1() -> Lgn1Config {
    Lgn1Config {
        latent: 8,
        hidden_layers: 1,
        message_passing_steps: 2,
        layer_norm: true,
    }
}

fn tiny2(depth: usize) -> Lgn2Config {
    Lgn2Config {
        latent: 8,
        hidden_layers: 1,
        message_passing_steps: depth,
        layer_norm: true,
    }
}

fn toy_corpus() -> (Vec<GraphSample>, Vec<SubgraphSample>) {
    let specimen = Specimen::build(&GeometryConfig {
        cell_type: CellType::SimpleCubic,
        ..GeometryConfig::default()
    })
    .unwrap();
    let traj = simulate(&specimen, &Material::default(), &BoundaryConfig::default()).unwrap();
    let graph = specimen.reduced_graph(5.0, 1e-6).unwrap();
    let reduced = map_trajectory(&traj, &specimen.mesh, &graph, 8, 2.0).unwrap();
    let lgn1 = build_lgn1_samples(&reduced, &graph).unwrap();
    let assignment = assign_tets_to_strut_nodes(&specimen.mesh, &graph).unwrap();
    let deltas: Vec<Vec<Point3>> = (0..reduced.num_steps()).map(|t| reduced.delta(t)).collect();
    let lgn2 = build_lgn2_samples(&traj, &graph, &specimen.mesh, &assignment, &deltas).unwrap();
    (lgn1, lgn2)
}

/// Two free nodes joined both ways, with explicit targets.
fn two_node_sample(target_disp: Array2<f64>, target_stress: Array2<f64>) -> GraphSample {
    let rest: Vec<Point3> = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
    let edges = vec![[0, 1], [1, 0]];
    let mut nodes = Array2::zeros((2, 8));
    for i in 0..2 {
        nodes[[i, 3]] = 1.0;
        nodes[[i, 4]] = 2.0;
        nodes[[i, 5]] = 1.0;
    }
    GraphSample {
        edge_features: lgn1_edge_features(&edges, &rest, &rest),
        current: rest.clone(),
        rest,
        edges,
        node_features: nodes,
        target_disp,
        target_stress,
        pushforward: None,
    }
}

fn zero_decoders(m: &mut Lgn1Model) {
    m.disp_decoder.zero_output(&mut m.params);
    m.stress_decoder.zero_output(&mut m.params);
}

#[test]
fn zero_decoders_predict_no_increment() {
    let (lgn1, _) = toy_corpus();
    let mut m = Lgn1Model::new(tiny1(), 1);
    zero_decoders(&mut m);
    let (du, ds) = lgn1_forward(&m, &lgn1[5]).unwrap();
    assert!(du.iter().chain(ds.iter()).all(|&v| v == 0.0));
}

#[test]
fn displacement_loss_is_mean_squared_error() {
    let mut m = Lgn1Model::new(tiny1(), 2);
    zero_decoders(&mut m);
    let perfect = two_node_sample(Array2::zeros((2, 3)), Array2::zeros((2, 2)));
    let mut tape = Tape::new(&m.params);
    let l = lgn1_displacement_loss(&mut tape, &m, &perfect, true).unwrap();
    assert_eq!(tape.scalar(l.total), 0.0);

    let b = [0.5, -0.25, 1.0];
    let bias = m.disp_decoder.biases[m.disp_decoder.biases.len() - 1];
    m.params.values[bias] = array![[b[0], b[1], b[2]]];
    let t = array![[1.0, 0.0, -1.0], [0.5, 0.5, 2.0]];
    let mut want = 0.0;
    for i in 0..2 {
        for j in 0..3 {
            want += (b[j] - t[[i, j]]).powi(2);
        }
    }
    want /= 6.0;
    let s = two_node_sample(t, Array2::zeros((2, 2)));
    let mut tape = Tape::new(&m.params);
    let l = lgn1_displacement_loss(&mut tape, &m, &s, true).unwrap();
    assert!((tape.scalar(l.total) - want).abs() < 1e-15);
    assert!(l.second.is_none());
}

#[test]
fn stress_loss_reduction_and_recomputation() {
    let mut m = Lgn1Model::new(tiny1(), 3);
    zero_decoders(&mut m);
    let s = two_node_sample(Array2::zeros((2, 3)), Array2::ones((2, 2)));
    let mut tape = Tape::new(&m.params);
    let l = lgn1_stress_loss(&mut tape, &m, &s).unwrap();
    assert_eq!(tape.scalar(l), 1.0);

    let (lgn1, _) = toy_corpus();
    let mut m = Lgn1Model::new(tiny1(), 4);
    m.fit_stats(&lgn1);
    let sample = &lgn1[7];
    let (_, ds) = lgn1_forward(&m, sample).unwrap();
    let std = m.stats.get("stress").std();
    let mut want = 0.0;
    for i in 0..ds.nrows() {
        for c in 0..2 {
            want += ((ds[[i, c]] - sample.target_stress[[i, c]]) / std[c]).powi(2);
        }
    }
    want /= (2 * ds.nrows()) as f64;
    let mut tape = Tape::new(&m.params);
    let l = lgn1_stress_loss(&mut tape, &m, sample).unwrap();
    assert!(
        (tape.scalar(l) - want).abs() < 1e-10 * want.max(1.0),
        "{} vs {want}",
        tape.scalar(l)
    );
}

#[test]
fn chained_term_does_not_reach_first_prediction() {
    let (lgn1, _) = toy_corpus();
    let mut m = Lgn1Model::new(tiny1(), 5);
    m.fit_stats(&lgn1);
    let sample = &lgn1[3];
    let mut tape = Tape::new(&m.params);
    let l = lgn1_displacement_loss(&mut tape, &m, sample, true).unwrap();
    let second = l.second.expect("chained targets exist");
    let g = tape.backward_with(second, true);
    assert!(g
        .wrt(l.first_prediction)
        .is_none_or(|g| g.iter().all(|&v| v == 0.0)));
    let g_total = tape.backward_with(l.total, true);
    assert!(g_total
        .wrt(l.first_prediction)
        .unwrap()
        .iter()
        .any(|&v| v != 0.0));
}

fn smoke_config(steps: u64) -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        decay: 1.0,
        steps,
        augment: NO_AUGMENT,
        seed: 7,
        ..TrainConfig::lgn1()
    }
}

#[test]
fn smoke_training_reduces_displacement_loss() {
    let (lgn1, _) = toy_corpus();
    let toy = &lgn1[2..6];
    let mut m = Lgn1Model::new(tiny1(), 6);
    train_lgn1(&mut m, toy, &smoke_config(200), Phase::Displacement, |_| {}).unwrap();
    let mean_loss = |m: &Lgn1Model| {
        toy.iter()
            .map(|s| {
                let mut tape = Tape::new(&m.params);
                let l = lgn1_displacement_loss(&mut tape, m, s, true).unwrap();
                tape.scalar(l.total)
            })
            .sum::<f64>()
    };
    let mut fresh = Lgn1Model::new(tiny1(), 6);
    fresh.stats = m.stats.clone();
    let (before, after) = (mean_loss(&fresh), mean_loss(&m));
    assert!(after < 0.1 * before, "loss {before} -> {after}");
}

#[test]
fn training_is_deterministic() {
    let (lgn1, _) = toy_corpus();
    let run = || {
        let mut m = Lgn1Model::new(tiny1(), 8);
        let log = train_lgn1(
            &mut m,
            &lgn1,
            &smoke_config(25),
            Phase::Displacement,
            |_| {},
        )
        .unwrap();
        (log, m.params)
    };
    assert_eq!(run(), run());
}

#[test]
fn stress_phase_needs_displacement_phase_and_freezes_the_rest() {
    let (lgn1, _) = toy_corpus();
    let mut m = Lgn1Model::new(tiny1(), 9);
    let err = train_lgn1(&mut m, &lgn1, &smoke_config(2), Phase::Stress, |_| {}).unwrap_err();
    assert!(matches!(err, ModelError::PhaseOrder(_)));

    train_lgn1(&mut m, &lgn1, &smoke_config(5), Phase::Displacement, |_| {}).unwrap();
    let before = m.params.clone();
    train_lgn1(&mut m, &lgn1, &smoke_config(5), Phase::Stress, |_| {}).unwrap();
    let trainable = m.stress_mask();
    for (i, t) in trainable.iter().enumerate() {
        if !t {
            assert_eq!(
                m.params.values[i], before.values[i],
                "{} moved",
                m.params.names[i]
            );
        }
    }
    assert!(trainable
        .iter()
        .enumerate()
        .any(|(i, &t)| t && m.params.values[i] != before.values[i]));
    assert_eq!((m.displacement_steps, m.stress_steps), (5, 5));
}

#[test]
fn empty_corpus_is_rejected() {
    let mut m = Lgn1Model::new(tiny1(), 1);
    assert!(matches!(
        train_lgn1(&mut m, &[], &smoke_config(1), Phase::Displacement, |_| {}),
        Err(ModelError::EmptyDataset)
    ));
}

#[test]
fn one_step_regression_fixture() {
    let rest: Vec<Point3> = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 2.0]];
    let current: Vec<Point3> = vec![[0.0, 0.0, 0.0], [1.0, 0.1, 0.9], [0.0, 1.0, 1.8]];
    let edges = vec![[0, 1], [1, 0], [1, 2], [2, 1]];
    let mut nodes = Array2::zeros((3, 8));
    for (i, kind) in [0, 3, 1].into_iter().enumerate() {
        nodes[[i, kind]] = 1.0;
        nodes[[i, 4]] = 2.0;
        nodes[[i, 6]] = -0.1 * i as f64;
        nodes[[i, 7]] = 0.01 * i as f64;
    }
    nodes[[1, 5]] = 2.0;
    nodes[[0, 5]] = 1.0;
    nodes[[2, 5]] = 1.0;
    let sample = GraphSample {
        edge_features: lgn1_edge_features(&edges, &rest, &current),
        rest,
        current,
        edges,
        node_features: nodes,
        target_disp: array![[0.0, 0.0, 0.0], [0.01, -0.02, -0.1], [0.0, 0.0, -0.2]],
        target_stress: array![[0.0, 0.0], [-0.05, 0.002], [-0.1, 0.004]],
        pushforward: None,
    };
    let mut m = Lgn1Model::new(
        Lgn1Config {
            latent: 4,
            hidden_layers: 1,
            message_passing_steps: 1,
            layer_norm: true,
        },
        11,
    );
    let cfg = TrainConfig {
        steps: 1,
        lr: 1e-3,
        augment: NO_AUGMENT,
        pushforward: false,
        ..TrainConfig::lgn1()
    };
    train_lgn1(
        &mut m,
        std::slice::from_ref(&sample),
        &cfg,
        Phase::Displacement,
        |_| {},
    )
    .unwrap();
    let (du, _) = lgn1_forward(&m, &sample).unwrap();
    for (i, row) in du.rows().into_iter().enumerate() {
        for j in 0..3 {
            assert!((row[j] - GOLDEN[i][j]).abs() < 1e-12, "row {i}: {:?}", du);
        }
    }
}

const GOLDEN: [[f64; 3]; 3] = [
    [
        0.006602674177432984,
        -0.010388503002356832,
        0.0016197355878121017,
    ],
    [
        0.0003269521903485617,
        -0.01155968862578224,
        -0.16646336203128093,
    ],
    [
        0.00632062724239018,
        -0.0036974733614837142,
        -0.02045835439828715,
    ],
];

#[test]
fn up_mapper_zero_decoder_and_depths() {
    let (_, lgn2) = toy_corpus();
    for depth in [2, 4] {
        let mut m = Lgn2Model::new(tiny2(depth), 1);
        assert_eq!(m.processor.len(), depth);
        m.decoder.zero_output(&mut m.params);
        let du = lgn2_forward(&m, &lgn2[0]).unwrap();
        assert!(du.iter().all(|&v| v == 0.0));
    }
    let shallow = Lgn2Model::new(tiny2(2), 1).params.num_scalars();
    let deep = Lgn2Model::new(tiny2(4), 1).params.num_scalars();
    assert!(deep > shallow);
}

fn lgn2_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        decay: 1.0,
        batch_size: 10,
        epochs,
        augment: NO_AUGMENT,
        seed: 3,
        ..TrainConfig::lgn2()
    }
}

fn physical_mse(m: &Lgn2Model, samples: &[SubgraphSample]) -> f64 {
    let refs: Vec<&SubgraphSample> = samples.iter().collect();
    let batch = SubgraphBatch::new(&refs);
    let pred = m.predict_batch(&batch).unwrap();
    (&pred - &batch.target).mapv(|v| v * v).mean().unwrap()
}

#[test]
fn up_mapper_overfits_ten_samples() {
    let (_, lgn2) = toy_corpus();
    let ten: Vec<SubgraphSample> = lgn2
        .iter()
        .step_by(lgn2.len() / 10)
        .take(10)
        .cloned()
        .collect();
    let mut m = Lgn2Model::new(tiny2(2), 2);
    let log = train_lgn2(&mut m, &ten, &lgn2_config(500), |_| {}).unwrap();
    assert_eq!(log.len(), 500);
    let mse = physical_mse(&m, &ten);
    assert!(mse < 1e-4, "mse {mse} mm²");
}

#[test]
fn up_mapper_learns_rigid_translation() {
    let (_, lgn2) = toy_corpus();
    let mut s = lgn2[4].clone();
    s.strut_features.column_mut(1).fill(0.0);
    s.strut_features.column_mut(2).fill(0.0);
    s.strut_features.column_mut(3).fill(0.0);
    s.target.fill(0.0);
    let mut m = Lgn2Model::new(tiny2(2), 3);
    m.fit_stats(&lgn2);
    train_lgn2(&mut m, std::slice::from_ref(&s), &lgn2_config(300), |_| {}).unwrap();
    let du = lgn2_forward(&m, &s).unwrap();
    assert!(du.iter().all(|v| v.abs() < 1e-3), "{du:?}");
}

#[test]
fn up_mapper_training_is_deterministic() {
    let (_, lgn2) = toy_corpus();
    let run = || {
        let mut m = Lgn2Model::new(tiny2(2), 5);
        let mut cfg = lgn2_config(2);
        cfg.augment.rotate = true;
        train_lgn2(&mut m, &lgn2[..40], &cfg, |_| {}).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn steps_per_epoch_rounds_up() {
    assert_eq!(steps_per_epoch(120_000, 256), 469);
    assert_eq!(steps_per_epoch(256, 256), 1);
    assert_eq!(steps_per_epoch(0, 256), 0);
}
