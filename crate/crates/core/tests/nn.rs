#![allow(clippy::needless_range_loop)]

use latticegraph::nn::{
    scatter_sum, AdamConfig, AdamState, GraphIndex, MessageBlock, Mlp, ParamStore, Tape,
};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

fn mlp_output(store: &ParamStore, mlp: &Mlp, x: &Array2<f64>) -> Array2<f64> {
    let mut tape = Tape::new(store);
    let v = tape.constant(x.clone());
    let y = mlp.apply(&mut tape, v).unwrap();
    tape.value(y).clone()
}

#[test]
fn zero_weights_output_the_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::default();
    let mlp = Mlp::new(&mut store, "m", &[3, 5, 2], false, &mut rng);
    for v in &mut store.values {
        v.fill(0.0);
    }
    store.values[mlp.biases[1]] = array![[0.25, -1.5]];
    let y = mlp_output(&store, &mlp, &random(&mut rng, 4, 3));
    for row in y.rows() {
        assert_eq!(row.to_vec(), vec![0.25, -1.5]);
    }
}

#[test]
fn identity_layer_passes_input_through() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::default();
    let mlp = Mlp::new(&mut store, "m", &[3, 3], false, &mut rng);
    store.values[mlp.weights[0]] = Array2::eye(3);
    let x = random(&mut rng, 5, 3);
    assert_eq!(mlp_output(&store, &mlp, &x), x);
}

#[test]
fn scatter_sum_examples() {
    let store = ParamStore::default();
    let graph = GraphIndex::new(&[], 4).unwrap();
    let mut tape = Tape::new(&store);
    let e = tape.constant(Array2::zeros((0, 2)));
    let s = scatter_sum(&mut tape, e, &graph).unwrap();
    assert_eq!(tape.value(s), &Array2::<f64>::zeros((4, 2)));

    let graph = GraphIndex::new(&[[3, 0]], 5).unwrap();
    let mut tape = Tape::new(&store);
    let e = tape.constant(array![[2.0, -7.0]]);
    let s = scatter_sum(&mut tape, e, &graph).unwrap();
    let mut want = Array2::zeros((5, 2));
    want[[3, 0]] = 2.0;
    want[[3, 1]] = -7.0;
    assert_eq!(tape.value(s), &want);
}

#[test]
fn out_of_range_receiver_is_rejected() {
    assert!(GraphIndex::new(&[[0, 4]], 4).is_err());
}

proptest! {
    #[test]
    fn scatter_sum_equals_dense_incidence_product(seed in 0u64..1000, n in 1usize..8, m in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<[usize; 2]> = (0..m).map(|_| [rng.random_range(0..n), rng.random_range(0..n)]).collect();
        let values = random(&mut rng, m, 3);
        let mut incidence = Array2::<f64>::zeros((n, m));
        for (k, e) in edges.iter().enumerate() {
            incidence[[e[0], k]] = 1.0;
        }
        let dense = incidence.dot(&values);
        let store = ParamStore::default();
        let graph = GraphIndex::new(&edges, n).unwrap();
        let mut tape = Tape::new(&store);
        let e = tape.constant(values);
        let s = scatter_sum(&mut tape, e, &graph).unwrap();
        for (a, b) in tape.value(s).iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn reused_variable_accumulates_gradient() {
    // y = mean((x ⊙ x + x)²) reuses x three times.
    let mut store = ParamStore::default();
    let x0 = array![[0.3, -1.2, 2.0]];
    let pid = store.add("x", x0.clone());
    let mut tape = Tape::new(&store);
    let x = tape.param(pid);
    let sq = tape.mul(x, x).unwrap();
    let s = tape.add(sq, x).unwrap();
    let y = tape.mean_square(s);
    let g = tape.backward(y).params[pid].clone().unwrap();
    for j in 0..3 {
        let xv = x0[[0, j]];
        let want = 2.0 * (xv * xv + xv) * (2.0 * xv + 1.0) / 3.0;
        assert!((g[[0, j]] - want).abs() < 1e-14);
    }
}

#[test]
fn zero_message_mlps_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::default();
    let block = MessageBlock::new(&mut store, "b", 4, &[4], false, &mut rng);
    block.edge.zero_output(&mut store);
    block.node.zero_output(&mut store);
    let edges = [[0, 1], [1, 0], [1, 2], [2, 1]];
    let graph = GraphIndex::new(&edges, 3).unwrap();
    let n0 = random(&mut rng, 3, 4);
    let e0 = random(&mut rng, 4, 4);
    let mut tape = Tape::new(&store);
    let n = tape.constant(n0.clone());
    let e = tape.constant(e0.clone());
    let (n2, e2) = block.apply(&mut tape, n, e, &graph).unwrap();
    assert_eq!(tape.value(n2), &n0);
    assert_eq!(tape.value(e2), &e0);
}

fn hand_mlp(x: &Array2<f64>, store: &ParamStore, mlp: &Mlp) -> Array2<f64> {
    let w0 = &store.values[mlp.weights[0]];
    let b0 = &store.values[mlp.biases[0]];
    let w1 = &store.values[mlp.weights[1]];
    let b1 = &store.values[mlp.biases[1]];
    let mut out = Array2::zeros((x.nrows(), w1.ncols()));
    for r in 0..x.nrows() {
        let mut h = vec![0.0; w0.ncols()];
        for (k, hk) in h.iter_mut().enumerate() {
            let mut s = b0[[0, k]];
            for i in 0..x.ncols() {
                s += x[[r, i]] * w0[[i, k]];
            }
            *hk = s.tanh();
        }
        for c in 0..w1.ncols() {
            let mut s = b1[[0, c]];
            for (k, hk) in h.iter().enumerate() {
                s += hk * w1[[k, c]];
            }
            out[[r, c]] = s;
        }
    }
    out
}

#[test]
fn line_graph_matches_hand_unrolled_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::default();
    let latent = 2;
    let block = MessageBlock::new(&mut store, "b", latent, &[3], false, &mut rng);
    for v in &mut store.values {
        v.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    let edges = [[0, 1], [1, 0], [1, 2], [2, 1]];
    let graph = GraphIndex::new(&edges, 3).unwrap();
    let n0 = random(&mut rng, 3, latent);
    let e0 = random(&mut rng, 4, latent);

    let mut edge_in = Array2::zeros((4, 3 * latent));
    for (k, &[r, s]) in edges.iter().enumerate() {
        for j in 0..latent {
            edge_in[[k, j]] = e0[[k, j]];
            edge_in[[k, latent + j]] = n0[[r, j]];
            edge_in[[k, 2 * latent + j]] = n0[[s, j]];
        }
    }
    let e1 = &e0 + &hand_mlp(&edge_in, &store, &block.edge);
    let mut node_in = Array2::zeros((3, 2 * latent));
    for (k, &[r, _]) in edges.iter().enumerate() {
        for j in 0..latent {
            node_in[[r, j]] += e1[[k, j]];
        }
    }
    for i in 0..3 {
        for j in 0..latent {
            node_in[[i, latent + j]] = n0[[i, j]];
        }
    }
    let n1 = &n0 + &hand_mlp(&node_in, &store, &block.node);

    let mut tape = Tape::new(&store);
    let n = tape.constant(n0);
    let e = tape.constant(e0);
    let (n2, e2) = block.apply(&mut tape, n, e, &graph).unwrap();
    for (a, b) in tape.value(n2).iter().zip(n1.iter()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    for (a, b) in tape.value(e2).iter().zip(e1.iter()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn message_block_is_permutation_equivariant(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mut store = ParamStore::default();
        let block = MessageBlock::new(&mut store, "b", 3, &[3], true, &mut rng);
        let edges: Vec<[usize; 2]> = (0..10).map(|_| [rng.random_range(0..n), rng.random_range(0..n)]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let n0 = random(&mut rng, n, 3);
        let e0 = random(&mut rng, edges.len(), 3);
        let mut pn = Array2::zeros((n, 3));
        for i in 0..n {
            pn.row_mut(perm[i]).assign(&n0.row(i));
        }
        let pedges: Vec<[usize; 2]> = edges.iter().map(|e| [perm[e[0]], perm[e[1]]]).collect();

        let run = |nodes: Array2<f64>, edges: &[[usize; 2]]| {
            let graph = GraphIndex::new(edges, n).unwrap();
            let mut tape = Tape::new(&store);
            let nv = tape.constant(nodes);
            let ev = tape.constant(e0.clone());
            let (a, b) = block.apply(&mut tape, nv, ev, &graph).unwrap();
            (tape.value(a).clone(), tape.value(b).clone())
        };
        let (na, ea) = run(n0.clone(), &edges);
        let (nb, eb) = run(pn, &pedges);
        prop_assert_eq!(ea, eb);
        for i in 0..n {
            prop_assert_eq!(na.row(i), nb.row(perm[i]));
        }
    }
}

#[test]
fn adam_first_step_and_decay() {
    let mut store = ParamStore::default();
    store.add("theta", array![[0.0]]);
    let mut adam = AdamState::new(&store, AdamConfig::new(1e-4, 0.999995));
    adam.step(&mut store, &[Some(array![[1.0]])], None);
    assert!((store.values[0][[0, 0]] + 9.99999990e-5).abs() < 1e-15);
    let lr = adam.config.lr_at(200_000);
    assert!((lr - 1e-4 * 0.999995f64.powi(200_000)).abs() < 1e-18);
    assert!((lr - 3.679e-5).abs() < 1e-8);
}

#[test]
fn frozen_parameters_keep_values_and_moments() {
    let mut store = ParamStore::default();
    store.add("a", array![[1.0, 2.0]]);
    store.add("b", array![[3.0]]);
    let mut adam = AdamState::new(&store, AdamConfig::new(1e-2, 1.0));
    let grads = vec![Some(array![[0.5, 0.5]]), Some(array![[1.0]])];
    adam.step(&mut store, &grads, Some(&[false, true]));
    assert_eq!(store.values[0], array![[1.0, 2.0]]);
    assert_eq!(adam.m[0], array![[0.0, 0.0]]);
    assert!(store.values[1][[0, 0]] < 3.0);
}
