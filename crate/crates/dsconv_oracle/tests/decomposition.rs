//! Equivalence sweeps at test scale plus the S-UGC specialization property:
//! the learned depthwise step only degenerates to a channel-constant kernel
//! when the channels themselves are indistinguishable.

use dsconv_oracle::{
    dconv_generic, neighborhoods, run_verification, verify_gat_decomposition,
    verify_gc_decomposition, DepthwiseKernel,
};
use graph_core::{add_self_loops, Graph};
use layers::{sugc_dconv, BatchData, GatParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::{Tape, LEAKY_SLOPE};

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize, c: usize) -> (Graph, Array2<f64>) {
    let n = rng.gen_range(1..=max_n);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    let x = Array2::from_shape_fn((n, c), |_| rng.gen_range(-1.0..1.0));
    (
        add_self_loops(&Graph::new(n, &edges, x.clone(), 0).unwrap()),
        x,
    )
}

#[test]
fn gc_decomposition_holds_on_twenty_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let c = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=4);
        let (g, x) = random_graph(&mut rng, 20, c);
        let w = Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.0..1.0));
        let dev = verify_gc_decomposition(&g, &x, &w);
        assert!(dev <= 1e-10, "deviation {dev}");
    }
}

#[test]
fn gat_decomposition_holds_on_twenty_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let c = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=4);
        let (g, x) = random_graph(&mut rng, 20, c);
        let params = GatParams::init(c, d, &mut rng);
        let dev = verify_gat_decomposition(&g, &x, &params);
        assert!(dev <= 1e-10, "deviation {dev}");
    }
}

#[test]
fn full_suite_passes_at_acceptance_scale() {
    let report = run_verification(100, 42);
    for check in &report.checks {
        assert!(
            check.passed(),
            "{} failed: deviation {} vs threshold {}",
            check.name,
            check.deviation,
            check.threshold
        );
    }
}

/// Builds the effective per-channel kernel the S-UGC depthwise step applies,
/// by the direct scalar computation, and returns it as a `DepthwiseKernel`.
fn effective_sugc_kernel(
    x: &Array2<f64>,
    nbrs: &[Vec<usize>],
    theta: &Array2<f64>,
) -> DepthwiseKernel {
    let c = x.ncols();
    let mut kernel = DepthwiseKernel::new(c);
    for (p, ns) in nbrs.iter().enumerate() {
        // Per channel: LeakyReLU of the 2-parameter score, then softmax.
        let mut weights: Vec<Vec<f64>> = vec![Vec::new(); ns.len()];
        for ch in 0..c {
            let acts: Vec<f64> = ns
                .iter()
                .map(|&v| {
                    let s = theta[[0, ch]] * x[[p, ch]] + theta[[1, ch]] * x[[v, ch]];
                    if s >= 0.0 {
                        s
                    } else {
                        LEAKY_SLOPE * s
                    }
                })
                .collect();
            let mx = acts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = acts.iter().map(|&a| (a - mx).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for (i, e) in exps.iter().enumerate() {
                weights[i].push(e / denom);
            }
        }
        for (i, &v) in ns.iter().enumerate() {
            kernel.set(p, v, weights[i].clone());
        }
    }
    kernel
}

#[test]
fn sugc_specializes_to_channel_constant_only_on_copied_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (g, base) = random_graph(&mut rng, 12, 1);
    let n = g.num_nodes();

    // Copy-channel construction: every channel carries the same signal.
    let c = 3;
    let copied = Array2::from_shape_fn((n, c), |(i, _)| base[[i, 0]]);
    let g_copied = g.clone().with_features(copied.clone()).unwrap();
    let nbrs = neighborhoods(&g_copied);
    let theta_equal = Array2::from_shape_fn((2, c), |(i, _)| if i == 0 { 0.8 } else { -0.5 });

    let kernel = effective_sugc_kernel(&copied, &nbrs, &theta_equal);
    assert_eq!(kernel.max_channel_spread(), 0.0);

    // The oracle kernel reproduces the layer itself.
    let data = BatchData::from_batch(&graph_core::batch_graphs(&[g_copied]).unwrap()).unwrap();
    let tape = Tape::new();
    let xt = tape.leaf(copied.clone());
    let tt = tape.leaf(theta_equal.clone());
    let layer = sugc_dconv(&tape, &xt, &data.edges, &tt, true);
    let oracle = dconv_generic(&copied, &nbrs, &kernel).unwrap();
    let diff = layer
        .value()
        .iter()
        .zip(oracle.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-12);

    // Distinct per-channel signals break the constancy even with equal
    // filters: the kernel is data-dependent, unlike GC/GAT.
    let distinct = Array2::from_shape_fn((n, c), |(i, j)| base[[i, 0]] + j as f64 * 0.7);
    let g_distinct = g.clone().with_features(distinct.clone()).unwrap();
    if n > 1 && g_distinct.edges().len() > n {
        let kernel = effective_sugc_kernel(&distinct, &neighborhoods(&g_distinct), &theta_equal);
        assert!(kernel.max_channel_spread() > 1e-6);
    }
}

#[test]
fn single_node_deviations_are_zero() {
    let g = add_self_loops(&Graph::new(1, &[], Array2::ones((1, 4)), 0).unwrap());
    let x = Array2::from_shape_fn((1, 4), |(_, j)| j as f64 - 1.5);
    let w = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64 * 0.25 - 0.5);
    assert_eq!(verify_gc_decomposition(&g, &x, &w), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let params = GatParams::init(4, 2, &mut rng);
    assert!(verify_gat_decomposition(&g, &x, &params) < 1e-15);
}
