use latticegraph::config::{BoundaryConfig, GeometryConfig};
use latticegraph::continuum::{Material, StressInvariants};
use latticegraph::dataset::{
    build_lgn1_samples, build_lgn2_samples, idw_map, map_trajectory, rotate_sample, subsample,
    GraphSample, STRESS_COLUMNS,
};
use latticegraph::geometry::{assign_tets_to_strut_nodes, CellType, Point3};
use latticegraph::lgn::{Lgn1Config, Lgn1Model};
use latticegraph::oracle::{Trajectory, TrajectoryState};
use latticegraph::pipeline::{simulate, Specimen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sc_specimen() -> Specimen {
    Specimen::build(&GeometryConfig {
        cell_type: CellType::SimpleCubic,
        ..GeometryConfig::default()
    })
    .unwrap()
}

fn lgn1_corpus(specimen: &Specimen, traj: &Trajectory, segment: f64) -> Vec<GraphSample> {
    let graph = specimen.reduced_graph(segment, 1e-6).unwrap();
    let reduced = map_trajectory(traj, &specimen.mesh, &graph, 8, 2.0).unwrap();
    build_lgn1_samples(&reduced, &graph).unwrap()
}

#[test]
fn one_sample_per_transition_with_chained_targets() {
    let specimen = sc_specimen();
    let traj = simulate(&specimen, &Material::default(), &BoundaryConfig::default()).unwrap();
    let samples = lgn1_corpus(&specimen, &traj, 2.0);
    assert_eq!(samples.len(), 12);
    assert_eq!(
        samples.iter().filter(|s| s.pushforward.is_some()).count(),
        11
    );
    assert!(samples[11].pushforward.is_none());

    let s0 = &samples[0];
    assert_eq!(s0.current, s0.rest);
    for row in s0.edge_features.rows() {
        for j in 0..4 {
            assert_eq!(row[j], row[4 + j]);
        }
    }
    assert!(s0
        .node_features
        .slice(ndarray::s![.., STRESS_COLUMNS])
        .iter()
        .all(|&v| v == 0.0));
    // Chained targets of step t are the first-step targets of step t + 1.
    for t in 0..11 {
        let pf = samples[t].pushforward.as_ref().unwrap();
        assert_eq!(pf.disp, samples[t + 1].target_disp);
        assert_eq!(pf.stress, samples[t + 1].target_stress);
    }
}

fn synthetic(specimen: &Specimen, per_step: impl Fn(usize) -> Point3) -> Trajectory {
    let bc = specimen.boundary(&BoundaryConfig::default()).unwrap();
    let nt = specimen.mesh.num_tets();
    let states = (0..=bc.n_steps)
        .map(|t| TrajectoryState {
            displacements: vec![per_step(t); specimen.mesh.num_vertices()],
            invariants: vec![StressInvariants { i1: 0.0, j2: 0.0 }; nt],
            reaction_force: 0.0,
        })
        .collect();
    Trajectory {
        states,
        bc,
        material: Material::default(),
    }
}

#[test]
fn motionless_steps_have_zero_targets() {
    let specimen = sc_specimen();
    let traj = synthetic(&specimen, |_| [0.0; 3]);
    for s in lgn1_corpus(&specimen, &traj, 2.5) {
        assert!(s.target_disp.iter().all(|&v| v == 0.0));
        assert!(s.target_stress.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn rigid_translation_gives_zero_relative_increments() {
    let specimen = sc_specimen();
    let traj = synthetic(&specimen, |t| {
        [0.1 * t as f64, -0.05 * t as f64, 0.2 * t as f64]
    });
    let graph = specimen.reduced_graph(2.5, 1e-6).unwrap();
    let reduced = map_trajectory(&traj, &specimen.mesh, &graph, 8, 2.0).unwrap();
    let assignment = assign_tets_to_strut_nodes(&specimen.mesh, &graph).unwrap();
    let deltas: Vec<Vec<Point3>> = (0..reduced.num_steps()).map(|t| reduced.delta(t)).collect();
    let samples = build_lgn2_samples(&traj, &graph, &specimen.mesh, &assignment, &deltas).unwrap();
    let owners = assignment
        .node_vertices
        .iter()
        .filter(|v| !v.is_empty())
        .count();
    assert_eq!(samples.len(), owners * reduced.num_steps());
    for s in &samples {
        assert!(s.target.iter().all(|v| v.abs() < 1e-12));
        assert!(s.strut_features.column(1).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(s.strut_nodes[0], s.center);
        assert!(!s.tet_vertices.is_empty());
    }
}

#[test]
fn subsample_respects_cap_and_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kept = subsample((0..1000).collect::<Vec<_>>(), 120, &mut rng);
    assert_eq!(kept.len(), 120);
    assert!(kept.windows(2).all(|w| w[0] < w[1]));
    let all = subsample((0..10).collect::<Vec<_>>(), 120, &mut rng);
    assert_eq!(all, (0..10).collect::<Vec<_>>());
}

#[test]
fn normalized_corpus_has_unit_moments() {
    let specimen = sc_specimen();
    let traj = simulate(&specimen, &Material::default(), &BoundaryConfig::default()).unwrap();
    let mut samples = Vec::new();
    for seg in [1.25, 1.5, 1.75, 2.0] {
        samples.extend(lgn1_corpus(&specimen, &traj, seg));
    }
    let mut model = Lgn1Model::new(Lgn1Config::default(), 0);
    model.fit_stats(&samples);
    let check = |name: &str, rows: Vec<ndarray::Array2<f64>>, skip: usize| {
        let stats = model.stats.get(name);
        let all = ndarray::concatenate(
            ndarray::Axis(0),
            &rows.iter().map(|r| r.view()).collect::<Vec<_>>(),
        )
        .unwrap();
        let z = stats.normalized(&all);
        for c in skip..z.ncols() {
            let col = z.column(c);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if all.column(c).iter().all(|&v| v == all[[0, c]]) {
                assert!(
                    col.iter().all(|&v| v == 0.0),
                    "{name}[{c}] constant channel not mapped to 0"
                );
                continue;
            }
            assert!(mean.abs() < 0.05, "{name}[{c}] mean {mean}");
            assert!((0.9..=1.1).contains(&std), "{name}[{c}] std {std}");
        }
    };
    check(
        "node",
        samples.iter().map(|s| s.node_features.clone()).collect(),
        4,
    );
    check(
        "edge",
        samples.iter().map(|s| s.edge_features.clone()).collect(),
        0,
    );
    check(
        "disp",
        samples.iter().map(|s| s.target_disp.clone()).collect(),
        0,
    );
    check(
        "stress",
        samples.iter().map(|s| s.target_stress.clone()).collect(),
        0,
    );
}

fn brute_force(
    sources: &[Point3],
    values: &[[f64; 2]],
    target: Point3,
    k: usize,
    power: f64,
) -> [f64; 2] {
    let mut d: Vec<(f64, usize)> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                ((s[0] - target[0]).powi(2)
                    + (s[1] - target[1]).powi(2)
                    + (s[2] - target[2]).powi(2))
                .sqrt(),
                i,
            )
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut num, mut den) = ([0.0; 2], 0.0);
    for &(dist, i) in d.iter().take(k) {
        let w = dist.powf(-power);
        num[0] += w * values[i][0];
        num[1] += w * values[i][1];
        den += w;
    }
    [num[0] / den, num[1] / den]
}

proptest! {
    #[test]
    fn idw_matches_sort_and_weigh(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pt = || [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
        let sources: Vec<Point3> = (0..20).map(|_| pt()).collect();
        let targets: Vec<Point3> = (0..6).map(|_| pt()).collect();
        let values: Vec<[f64; 2]> = sources.iter().map(|s| [s[0] - 2.0 * s[2], s[1] * s[1]]).collect();
        let got = idw_map(&values, &sources, &targets, 4, 2.0);
        for (g, &t) in got.iter().zip(&targets) {
            let want = brute_force(&sources, &values, t, 4, 2.0);
            prop_assert!((g[0] - want[0]).abs() < 1e-12 && (g[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn mapped_values_stay_within_source_range(seed in 0u64..10_000, k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pt = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let sources: Vec<Point3> = (0..15).map(|_| pt()).collect();
        let targets: Vec<Point3> = (0..5).map(|_| pt()).collect();
        let values: Vec<[f64; 1]> = (0..15).map(|i| [(i as f64).sin()]).collect();
        let lo = values.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        for v in idw_map(&values, &sources, &targets, k, 2.0) {
            prop_assert!(v[0] >= lo - 1e-12 && v[0] <= hi + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn rotation_preserves_edge_lengths(angle in 0.0f64..std::f64::consts::TAU, t in 0usize..12) {
        let specimen = sc_specimen();
        let traj = simulate(&specimen, &Material::default(), &BoundaryConfig::default()).unwrap();
        let s = &lgn1_corpus(&specimen, &traj, 5.0)[t];
        let r = rotate_sample(s, angle);
        for (a, b) in s.edge_features.rows().into_iter().zip(r.edge_features.rows()) {
            prop_assert!((a[3] - b[3]).abs() < 1e-12 && (a[7] - b[7]).abs() < 1e-12);
        }
        prop_assert_eq!(&s.node_features, &r.node_features);
        prop_assert_eq!(&s.target_stress, &r.target_stress);
    }
}
