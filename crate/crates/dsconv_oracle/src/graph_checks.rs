//! Kernel constructors for the GC and GAT layers and the equivalence
//! verifiers: layer output versus the explicit DConv/PConv composition.

use graph_core::{normalize_adjacency, Graph, NormalizedAdjacency};
use layers::{gat_attention, gat_forward, gc_forward, EdgeIndex, GatParams, GcParams};
use ndarray::Array2;
use tensor_autodiff::Tape;

use crate::{dconv_generic, pconv_generic, DepthwiseKernel, PointwiseKernelSet};

/// Neighbor lists (self included) read straight off the graph's edge set;
/// the oracle's own view of the structure, independent of `EdgeIndex`.
pub fn neighborhoods(g: &Graph) -> Vec<Vec<usize>> {
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); g.num_nodes()];
    for &(u, v) in g.edges() {
        nbrs[u].push(v);
    }
    nbrs
}

/// Channel-constant kernel from the fixed normalized adjacency:
/// kernel(p, p', c) = Ahat[p, p'] for every c.
pub fn gc_kernel(adj: &NormalizedAdjacency, channels: usize) -> DepthwiseKernel {
    let mut kernel = DepthwiseKernel::new(channels);
    for k in 0..adj.receivers.len() {
        kernel.set(
            adj.receivers[k],
            adj.nbr_idx[k],
            vec![adj.values[k]; channels],
        );
    }
    kernel
}

/// Channel-constant kernel from a learned attention column (edge-aligned
/// with `edges`): kernel(p, p', c) = alpha[p, p'] for every c.
pub fn gat_kernel(alpha: &Array2<f64>, edges: &EdgeIndex, channels: usize) -> DepthwiseKernel {
    assert_eq!(alpha.dim(), (edges.num_edges(), 1), "one weight per edge");
    let mut kernel = DepthwiseKernel::new(channels);
    for k in 0..edges.num_edges() {
        kernel.set(
            edges.receivers[k],
            edges.neighbors[k],
            vec![alpha[[k, 0]]; channels],
        );
    }
    kernel
}

/// Max absolute deviation between the GC layer and its decomposition into a
/// channel-constant depthwise step followed by a pointwise step.
pub fn verify_gc_decomposition(g: &Graph, x: &Array2<f64>, w: &Array2<f64>) -> f64 {
    // Route one: the layer as implemented.
    let adj = normalize_adjacency(g).expect("graph must normalize");
    let edges = EdgeIndex::from(&adj);
    let tape = Tape::new();
    let xt = tape.leaf(x.clone());
    let layer = gc_forward(&tape, &xt, &edges, &GcParams { w: w.clone() });

    // Route two: explicit DConv then PConv through the oracle primitives.
    let kernel = gc_kernel(&adj, x.ncols());
    let y = dconv_generic(x, &neighborhoods(g), &kernel).expect("kernel covers the graph");
    let z = pconv_generic(&y, &PointwiseKernelSet::from_weight_columns(w))
        .expect("widths agree by construction");

    max_abs(&layer.value(), &z)
}

/// Same for GAT: the attention the layer computes is lifted into a
/// channel-constant kernel, and the decomposition must reproduce the layer.
pub fn verify_gat_decomposition(g: &Graph, x: &Array2<f64>, params: &GatParams) -> f64 {
    let adj = normalize_adjacency(g).expect("graph must normalize");
    let edges = EdgeIndex::from(&adj);
    let tape = Tape::new();
    let xt = tape.leaf(x.clone());
    let layer = gat_forward(&tape, &xt, &edges, params);

    let alpha = gat_attention(&tape, &xt, &edges, params);
    let kernel = gat_kernel(&alpha.value(), &edges, x.ncols());
    // The kernel is channel-constant, so the depthwise step commutes with
    // the pointwise step; applying it before W matches the layer exactly.
    let y = dconv_generic(x, &neighborhoods(g), &kernel).expect("kernel covers the graph");
    let z = pconv_generic(&y, &PointwiseKernelSet::from_weight_columns(&params.w))
        .expect("widths agree by construction");

    max_abs(&layer.value(), &z)
}

pub(crate) fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use graph_core::add_self_loops;
    use ndarray::arr2;

    fn triangle() -> Graph {
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        add_self_loops(&Graph::new(3, &[(0, 1), (1, 2), (0, 2)], x, 0).unwrap())
    }

    #[test]
    fn gc_kernel_on_triangle_is_one_third_everywhere() {
        // Self-looped K3: every degree is 3, every Ahat entry 1/3.
        let g = triangle();
        let adj = normalize_adjacency(&g).unwrap();
        let kernel = gc_kernel(&adj, 2);
        for p in 0..3 {
            for v in 0..3 {
                let w = kernel.get(p, v).expect("complete graph");
                assert_eq!(w.len(), 2);
                for &entry in w {
                    assert!((entry - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
        assert_eq!(kernel.max_channel_spread(), 0.0);
    }

    #[test]
    fn gc_kernel_single_channel_restricts_ahat_to_edges() {
        let g = triangle();
        let adj = normalize_adjacency(&g).unwrap();
        let kernel = gc_kernel(&adj, 1);
        for k in 0..adj.receivers.len() {
            let w = kernel.get(adj.receivers[k], adj.nbr_idx[k]).unwrap();
            assert_eq!(w, &[adj.values[k]]);
        }
    }

    #[test]
    fn gat_kernel_rows_sum_to_one_and_are_channel_constant() {
        let g = triangle();
        let adj = normalize_adjacency(&g).unwrap();
        let edges = EdgeIndex::from(&adj);
        let params = GatParams {
            w: arr2(&[[0.8]]),
            att_self: arr2(&[[0.5]]),
            att_nbr: arr2(&[[-0.3]]),
        };
        let tape = Tape::new();
        let xt = tape.leaf(g.node_features().clone());
        let alpha = gat_attention(&tape, &xt, &edges, &params);
        let kernel = gat_kernel(&alpha.value(), &edges, 3);
        assert_eq!(kernel.max_channel_spread(), 0.0);
        for p in 0..3 {
            let sum: f64 = (0..3).map(|v| kernel.get(p, v).unwrap()[0]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_attention_params_make_uniform_kernel_entries() {
        let g = triangle();
        let adj = normalize_adjacency(&g).unwrap();
        let edges = EdgeIndex::from(&adj);
        let params = GatParams {
            w: arr2(&[[1.0]]),
            att_self: arr2(&[[0.0]]),
            att_nbr: arr2(&[[0.0]]),
        };
        let tape = Tape::new();
        let xt = tape.leaf(g.node_features().clone());
        let alpha = gat_attention(&tape, &xt, &edges, &params);
        let kernel = gat_kernel(&alpha.value(), &edges, 1);
        for p in 0..3 {
            for v in 0..3 {
                assert!((kernel.get(p, v).unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_node_decompositions_are_exact() {
        let g = add_self_loops(&Graph::new(1, &[], arr2(&[[0.7, -0.2]]), 0).unwrap());
        let w = arr2(&[[1.0, 2.0, 0.5], [0.0, -1.0, 0.3]]);
        assert_eq!(verify_gc_decomposition(&g, &g.node_features().clone(), &w), 0.0);
        let params = GatParams {
            w,
            att_self: arr2(&[[0.4], [0.1], [-0.6]]),
            att_nbr: arr2(&[[0.2], [0.9], [0.0]]),
        };
        let dev = verify_gat_decomposition(&g, &g.node_features().clone(), &params);
        assert!(dev < 1e-15);
    }

    #[test]
    fn zero_theta_gat_matches_uniform_gc_comparison_path() {
        // With zero attention parameters the GAT kernel is uniform, so the
        // decomposition must agree with a hand-built uniform-weight kernel.
        let g = triangle();
        let x = g.node_features().clone();
        let w = arr2(&[[1.3]]);
        let params = GatParams {
            w: w.clone(),
            att_self: arr2(&[[0.0]]),
            att_nbr: arr2(&[[0.0]]),
        };
        assert!(verify_gat_decomposition(&g, &x, &params) < 1e-12);

        let nbrs = neighborhoods(&g);
        let mut uniform = DepthwiseKernel::new(1);
        for (p, ns) in nbrs.iter().enumerate() {
            for &v in ns {
                uniform.set(p, v, vec![1.0 / ns.len() as f64]);
            }
        }
        let y = dconv_generic(&x, &nbrs, &uniform).unwrap();
        let z = pconv_generic(&y, &PointwiseKernelSet::from_weight_columns(&w)).unwrap();

        let adj = normalize_adjacency(&g).unwrap();
        let edges = EdgeIndex::from(&adj);
        let tape = Tape::new();
        let xt = tape.leaf(x);
        let layer = gat_forward(&tape, &xt, &edges, &params);
        assert!(max_abs(&layer.value(), &z) < 1e-12);
    }
}
