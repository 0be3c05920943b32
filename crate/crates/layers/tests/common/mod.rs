//! Shared helpers: random graph instances and scalar-loop layer references.
// Each test binary compiles this module separately and none uses all of it.
#![allow(dead_code)]

use graph_core::{add_self_loops, batch_graphs, Graph, GraphBatch};
use layers::{BatchData, EdgeIndex};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LEAKY: f64 = 0.2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi instance (p = 0.4), self-loops added, uniform [-1, 1] features.
pub fn random_graph(rng: &mut ChaCha8Rng, max_n: usize, c: usize) -> Graph {
    let n = rng.gen_range(1..=max_n);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    let feats = Array2::from_shape_fn((n, c), |_| rng.gen_range(-1.0..1.0));
    add_self_loops(&Graph::new(n, &edges, feats, 0).unwrap())
}

pub fn batch_of(graphs: &[Graph]) -> (GraphBatch, BatchData) {
    let b = batch_graphs(graphs).unwrap();
    let d = BatchData::from_batch(&b).unwrap();
    (b, d)
}

pub fn single(g: &Graph) -> BatchData {
    batch_of(std::slice::from_ref(g)).1
}

/// Relabels nodes by `perm` (node i becomes perm[i]), keeping the label.
pub fn permute_graph(g: &Graph, perm: &[usize]) -> Graph {
    let n = g.num_nodes();
    assert_eq!(perm.len(), n);
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let c = g.node_features().ncols();
    let mut feats = Array2::<f64>::zeros((n, c));
    for i in 0..n {
        for j in 0..c {
            feats[[perm[i], j]] = g.node_features()[[i, j]];
        }
    }
    Graph::new(n, &edges, feats, g.label()).unwrap()
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY * x
    }
}

/// Per-neighborhood weights for one channel of the S-UGC depthwise step,
/// computed by a direct scalar loop.
fn channel_weights(
    x: &Array2<f64>,
    nbrs: &[usize],
    p: usize,
    c: usize,
    t0: f64,
    t1: f64,
    normalize: bool,
) -> Vec<f64> {
    let scores: Vec<f64> = nbrs
        .iter()
        .map(|&v| t0 * x[[p, c]] + t1 * x[[v, c]])
        .collect();
    if !normalize {
        return scores;
    }
    let acts: Vec<f64> = scores.iter().map(|&s| leaky(s)).collect();
    let mx = acts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = acts.iter().map(|&a| (a - mx).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Triple-loop S-UGC depthwise reference.
pub fn sugc_dconv_reference(
    x: &Array2<f64>,
    edges: &EdgeIndex,
    theta: &Array2<f64>,
    normalize: bool,
) -> Array2<f64> {
    let (n, c) = x.dim();
    let mut y = Array2::<f64>::zeros((n, c));
    for p in 0..n {
        let (lo, hi) = edges.segments.bounds(p);
        let nbrs: Vec<usize> = (lo..hi).map(|k| edges.neighbors[k]).collect();
        for ch in 0..c {
            let w = channel_weights(x, &nbrs, p, ch, theta[[0, ch]], theta[[1, ch]], normalize);
            for (i, &v) in nbrs.iter().enumerate() {
                y[[p, ch]] += w[i] * x[[v, ch]];
            }
        }
    }
    y
}

/// Quadruple-loop G-UGC reference.
pub fn gugc_reference(
    x: &Array2<f64>,
    edges: &EdgeIndex,
    theta_self: &Array2<f64>,
    theta_nbr: &Array2<f64>,
    normalize: bool,
) -> Array2<f64> {
    let (n, c) = x.dim();
    let d_out = theta_self.ncols();
    let mut z = Array2::<f64>::zeros((n, d_out));
    for d in 0..d_out {
        for p in 0..n {
            let (lo, hi) = edges.segments.bounds(p);
            let nbrs: Vec<usize> = (lo..hi).map(|k| edges.neighbors[k]).collect();
            for ch in 0..c {
                let w = channel_weights(
                    x,
                    &nbrs,
                    p,
                    ch,
                    theta_self[[ch, d]],
                    theta_nbr[[ch, d]],
                    normalize,
                );
                for (i, &v) in nbrs.iter().enumerate() {
                    z[[p, d]] += w[i] * x[[v, ch]];
                }
            }
        }
    }
    z
}
