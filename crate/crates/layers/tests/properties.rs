//! Structural properties: attention weights form distributions, layers are
//! permutation-equivariant, the network is permutation-invariant, and
//! batching is a homomorphism.

mod common;

use common::{batch_of, max_abs_diff, permute_graph, random_graph, random_permutation, rng, single};
use graph_core::batch_graphs;
use layers::{
    gat_attention, gugc_forward, sugc_dconv, sugc_forward, BatchData, GatParams, GugcParams,
    ModelKind, SugcParams, UgcnConfig, UgcnModel,
};
use ndarray::Array2;
use tensor_autodiff::{Mode, Tape};

#[test]
fn gat_attention_rows_sum_to_one() {
    let mut r = rng(30);
    for _ in 0..25 {
        let g = random_graph(&mut r, 14, 3);
        let data = single(&g);
        let tape = Tape::new();
        let x = tape.leaf(data.x0.clone());
        let alpha = gat_attention(&tape, &x, &data.edges, &GatParams::init(3, 4, &mut r));
        let av = alpha.value();
        for p in 0..g.num_nodes() {
            let (lo, hi) = data.edges.segments.bounds(p);
            let sum: f64 = (lo..hi).map(|k| av[[k, 0]]).sum();
            assert!((sum - 1.0).abs() < 1e-12, "node {p} sums to {sum}");
        }
    }
}

#[test]
fn normalized_ugc_weights_sum_to_one_via_constant_features() {
    // Feeding all-ones features through the normalized depthwise step makes
    // each output entry the plain sum of its neighborhood weights, so a
    // correct softmax yields exactly 1 (S-UGC) and C (G-UGC).
    let mut r = rng(31);
    for _ in 0..25 {
        let g = random_graph(&mut r, 14, 3);
        let ones = Array2::ones((g.num_nodes(), 3));
        let g = g.with_features(ones.clone()).unwrap();
        let data = single(&g);

        let tape = Tape::new();
        let x = tape.leaf(ones.clone());
        let theta = tape.leaf(Array2::from_shape_fn((2, 3), |_| {
            rand::Rng::gen_range(&mut r, -1.0..1.0)
        }));
        let y = sugc_dconv(&tape, &x, &data.edges, &theta, true);
        assert!(y.value().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let params = GugcParams::init(3, 4, &mut r);
        let z = gugc_forward(&tape, &x, &data.edges, &params, true);
        assert!(z.value().iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }
}

#[test]
fn layers_are_permutation_equivariant() {
    let mut r = rng(32);
    for _ in 0..10 {
        let g = random_graph(&mut r, 12, 3);
        let n = g.num_nodes();
        let perm = random_permutation(&mut r, n);
        let gp = permute_graph(&g, &perm);
        let data = single(&g);
        let datap = single(&gp);

        let sugc = SugcParams::init(3, 2, &mut r);
        let gugc = GugcParams::init(3, 2, &mut r);

        for &normalize in &[true, false] {
            let tape = Tape::new();
            let x = tape.leaf(data.x0.clone());
            let xp = tape.leaf(datap.x0.clone());

            let y = sugc_forward(&tape, &x, &data.edges, &[sugc.clone()], normalize);
            let yp = sugc_forward(&tape, &xp, &datap.edges, &[sugc.clone()], normalize);
            let z = gugc_forward(&tape, &x, &data.edges, &gugc, normalize);
            let zp = gugc_forward(&tape, &xp, &datap.edges, &gugc, normalize);

            let (yv, ypv) = (y.value(), yp.value());
            let (zv, zpv) = (z.value(), zp.value());
            for i in 0..n {
                for d in 0..2 {
                    assert!((yv[[i, d]] - ypv[[perm[i], d]]).abs() < 1e-10);
                    assert!((zv[[i, d]] - zpv[[perm[i], d]]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn network_logits_are_permutation_invariant() {
    let mut r = rng(33);
    for kind in [ModelKind::Gcn, ModelKind::Gat, ModelKind::Sugcn, ModelKind::Gugcn] {
        let config = UgcnConfig {
            kind,
            in_dim: 3,
            num_classes: 2,
            hidden: 4,
            num_blocks: 2,
            heads: 2,
            dropout: 0.5,
            normalize_attention: true,
            skip_sum: true,
        };
        let model = UgcnModel::init(config, &mut r);
        for _ in 0..5 {
            let g = random_graph(&mut r, 12, 3);
            let perm = random_permutation(&mut r, g.num_nodes());
            let gp = permute_graph(&g, &perm);
            let (data, datap) = (single(&g), single(&gp));

            let tape = Tape::new();
            let logits = model.forward(&tape, &data, Mode::Eval, &mut r).0;
            let logits_p = model.forward(&tape, &datap, Mode::Eval, &mut r).0;
            assert!(
                max_abs_diff(&logits.value(), &logits_p.value()) < 1e-10,
                "{} logits moved under relabeling",
                model.config.kind.as_str()
            );
        }
    }
}

#[test]
fn batched_layer_equals_per_graph_concat() {
    let mut r = rng(34);
    let graphs: Vec<_> = (0..4).map(|_| random_graph(&mut r, 10, 3)).collect();
    let (_, batch_data) = batch_of(&graphs);
    let sugc = SugcParams::init(3, 2, &mut r);

    let tape = Tape::new();
    let xb = tape.leaf(batch_data.x0.clone());
    let zb = sugc_forward(&tape, &xb, &batch_data.edges, &[sugc.clone()], true);
    let zbv = zb.value();

    let mut row = 0;
    for g in &graphs {
        let data = single(g);
        let x = tape.leaf(data.x0.clone());
        let z = sugc_forward(&tape, &x, &data.edges, &[sugc.clone()], true);
        let zv = z.value();
        for i in 0..g.num_nodes() {
            for d in 0..2 {
                assert!((zbv[[row + i, d]] - zv[[i, d]]).abs() < 1e-12);
            }
        }
        row += g.num_nodes();
    }
}

#[test]
fn duplicated_graph_duplicates_its_logit_row() {
    let mut r = rng(35);
    let g1 = random_graph(&mut r, 10, 3);
    let g2 = random_graph(&mut r, 10, 3);
    let config = UgcnConfig {
        kind: ModelKind::Sugcn,
        in_dim: 3,
        num_classes: 2,
        hidden: 4,
        num_blocks: 2,
        heads: 2,
        dropout: 0.5,
        normalize_attention: false,
        skip_sum: true,
    };
    let model = UgcnModel::init(config, &mut r);

    let pair = batch_graphs(&[g1.clone(), g2.clone()]).unwrap();
    let triple = batch_graphs(&[g1.clone(), g2, g1]).unwrap();
    let (dp, dt) = (
        BatchData::from_batch(&pair).unwrap(),
        BatchData::from_batch(&triple).unwrap(),
    );
    let tape = Tape::new();
    let lp = model.forward(&tape, &dp, Mode::Eval, &mut r).0;
    let lt = model.forward(&tape, &dt, Mode::Eval, &mut r).0;
    let (lpv, ltv) = (lp.value(), lt.value());
    for c in 0..2 {
        assert!((lpv[[0, c]] - ltv[[0, c]]).abs() < 1e-12);
        assert!((lpv[[1, c]] - ltv[[1, c]]).abs() < 1e-12);
        assert!((ltv[[0, c]] - ltv[[2, c]]).abs() < 1e-12);
    }
}

#[test]
fn shared_filters_and_channels_collapse_to_one_channel() {
    // If every channel carries the same data and the same filter, the
    // depthwise step cannot tell them apart: all output channels agree.
    let mut r = rng(36);
    let g = random_graph(&mut r, 10, 1);
    let col = g.node_features().clone();
    let c = 4;
    let mut x = Array2::<f64>::zeros((g.num_nodes(), c));
    for i in 0..g.num_nodes() {
        for j in 0..c {
            x[[i, j]] = col[[i, 0]];
        }
    }
    let g = g.with_features(x.clone()).unwrap();
    let data = single(&g);

    let shared = [0.7, -0.4];
    let theta = Array2::from_shape_fn((2, c), |(i, _)| shared[i]);
    let tape = Tape::new();
    let xt = tape.leaf(x);
    for &normalize in &[true, false] {
        let y = sugc_dconv(&tape, &xt, &data.edges, &tape.leaf(theta.clone()), normalize);
        let yv = y.value();
        for i in 0..g.num_nodes() {
            for j in 1..c {
                assert_eq!(yv[[i, 0]], yv[[i, j]]);
            }
        }
    }
}
