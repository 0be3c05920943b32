//! Tape-level forward functions for the four layers.

use ndarray::Array2;
use tensor_autodiff::{concat_cols, Tape, Tensor, LEAKY_SLOPE};

use crate::fused::{
    gugc_linear_forward, gugc_softmax_forward, sugc_linear_forward, sugc_softmax_forward,
    GugcLinearGrad, GugcSoftmaxGrad, SugcLinearGrad, SugcSoftmaxGrad,
};
use crate::{EdgeIndex, GatParams, GcParams, GugcParams, SugcParams};

/// Z = Ahat X W with Ahat the symmetric-normalized self-looped adjacency.
pub fn gc_forward(tape: &Tape, x: &Tensor, edges: &EdgeIndex, params: &GcParams) -> Tensor {
    let w = tape.param(params.w.clone());
    gc_forward_bound(tape, x, edges, &w)
}

/// Variant taking an already-bound weight tensor (used by the network).
pub fn gc_forward_bound(tape: &Tape, x: &Tensor, edges: &EdgeIndex, w: &Tensor) -> Tensor {
    assert_eq!(x.shape().1, w.shape().0, "feature/weight widths disagree");
    let h = x.matmul(w);
    let weights = tape.leaf(Array2::from_shape_vec(
        (edges.num_edges(), 1),
        edges.weights.as_ref().clone(),
    )
    .unwrap());
    h.gather_rows(&edges.neighbors)
        .mul_col(&weights)
        .segment_sum(&edges.segments)
}

/// Per-edge attention, softmax-normalized over each receiving neighborhood:
/// alpha = softmax(LeakyReLU(a_self . W x_p + a_nbr . W x_p')).
pub fn gat_attention(tape: &Tape, x: &Tensor, edges: &EdgeIndex, params: &GatParams) -> Tensor {
    let w = tape.param(params.w.clone());
    let a_self = tape.param(params.att_self.clone());
    let a_nbr = tape.param(params.att_nbr.clone());
    gat_attention_bound(x, edges, &w, &a_self, &a_nbr)
}

pub fn gat_attention_bound(
    x: &Tensor,
    edges: &EdgeIndex,
    w: &Tensor,
    a_self: &Tensor,
    a_nbr: &Tensor,
) -> Tensor {
    let h = x.matmul(w);
    let s_self = h.matmul(a_self); // N x 1
    let s_nbr = h.matmul(a_nbr);
    s_self
        .gather_rows(&edges.receivers)
        .add(&s_nbr.gather_rows(&edges.neighbors))
        .leaky_relu(LEAKY_SLOPE)
        .segment_softmax(&edges.segments)
}

/// Z[p,:] = sum_{p' in N(p)} alpha[p,p'] (X W)[p',:].
pub fn gat_forward(tape: &Tape, x: &Tensor, edges: &EdgeIndex, params: &GatParams) -> Tensor {
    let w = tape.param(params.w.clone());
    let a_self = tape.param(params.att_self.clone());
    let a_nbr = tape.param(params.att_nbr.clone());
    gat_forward_bound(x, edges, &w, &a_self, &a_nbr)
}

pub fn gat_forward_bound(
    x: &Tensor,
    edges: &EdgeIndex,
    w: &Tensor,
    a_self: &Tensor,
    a_nbr: &Tensor,
) -> Tensor {
    let alpha = gat_attention_bound(x, edges, w, a_self, a_nbr);
    let h = x.matmul(w);
    h.gather_rows(&edges.neighbors)
        .mul_col(&alpha)
        .segment_sum(&edges.segments)
}

/// Depthwise S-UGC step: per-channel attention-weighted neighborhood mix.
/// `normalize` toggles the Softmax-over-LeakyReLU normalization; off, the
/// raw linear score is the weight (the classification-mode form, where the
/// following batch norm takes over normalization duty).
pub fn sugc_dconv(
    tape: &Tape,
    x: &Tensor,
    edges: &EdgeIndex,
    theta: &Tensor,
    normalize: bool,
) -> Tensor {
    let (t_rows, t_cols) = theta.shape();
    assert_eq!(t_rows, 2, "theta must be 2 x C");
    assert_eq!(t_cols, x.shape().1, "one theta column per channel required");
    let xv = x.value();
    let tv = theta.value();
    if normalize {
        let (y, alpha) = sugc_softmax_forward(&xv, &tv, edges);
        tape.custom(
            &[x, theta],
            y,
            Box::new(SugcSoftmaxGrad {
                edges: edges.clone(),
                alpha: std::rc::Rc::new(alpha),
            }),
        )
    } else {
        let (y, s1, s2) = sugc_linear_forward(&xv, &tv, edges);
        tape.custom(
            &[x, theta],
            y,
            Box::new(SugcLinearGrad {
                edges: edges.clone(),
                s1,
                s2,
            }),
        )
    }
}

/// Full S-UGC layer: depthwise step then pointwise W per head, heads
/// concatenated along the feature axis.
pub fn sugc_forward(
    tape: &Tape,
    x: &Tensor,
    edges: &EdgeIndex,
    heads: &[SugcParams],
    normalize: bool,
) -> Tensor {
    assert!(!heads.is_empty(), "at least one head required");
    let outs: Vec<Tensor> = heads
        .iter()
        .map(|p| {
            let theta = tape.param(p.theta.clone());
            let w = tape.param(p.w.clone());
            sugc_dconv(tape, x, edges, &theta, normalize).matmul(&w)
        })
        .collect();
    if outs.len() == 1 {
        outs.into_iter().next().unwrap()
    } else {
        concat_cols(&outs)
    }
}

/// G-UGC layer: D independent depthwise filters, summed over channels, no W.
pub fn gugc_forward(
    tape: &Tape,
    x: &Tensor,
    edges: &EdgeIndex,
    params: &GugcParams,
    normalize: bool,
) -> Tensor {
    let t0 = tape.param(params.theta_self.clone());
    let t1 = tape.param(params.theta_nbr.clone());
    gugc_forward_bound(tape, x, edges, &t0, &t1, normalize)
}

pub fn gugc_forward_bound(
    tape: &Tape,
    x: &Tensor,
    edges: &EdgeIndex,
    theta_self: &Tensor,
    theta_nbr: &Tensor,
    normalize: bool,
) -> Tensor {
    assert_eq!(
        theta_self.shape(),
        theta_nbr.shape(),
        "filter halves must pair up"
    );
    assert_eq!(
        theta_self.shape().0,
        x.shape().1,
        "one filter row per channel required"
    );
    let xv = x.value();
    let t0 = theta_self.value();
    let t1 = theta_nbr.value();
    if normalize {
        let (z, alphas) = gugc_softmax_forward(&xv, &t0, &t1, edges);
        tape.custom(
            &[x, theta_self, theta_nbr],
            z,
            Box::new(GugcSoftmaxGrad {
                edges: edges.clone(),
                alphas,
            }),
        )
    } else {
        let (z, s1, s2) = gugc_linear_forward(&xv, &t0, &t1, edges);
        tape.custom(
            &[x, theta_self, theta_nbr],
            z,
            Box::new(GugcLinearGrad {
                edges: edges.clone(),
                s1,
                s2,
            }),
        )
    }
}
