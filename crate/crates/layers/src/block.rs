//! Block wrappers: each layer followed by BatchNorm and ReLU. The S-UGC
//! block normalizes between its depthwise and pointwise halves as well.

use std::cell::RefCell;

use tensor_autodiff::{concat_cols, Mode, RunningStats, Tape, Tensor};

use crate::ops::{gat_forward_bound, gc_forward_bound, gugc_forward_bound, sugc_dconv};
use crate::params::{GatParams, GcParams, GugcParams, SugcParams};
use crate::EdgeIndex;

/// One batch-norm site: learnable affine plus running statistics.
#[derive(Debug)]
pub struct BnParams {
    pub gamma: ndarray::Array2<f64>, // 1 x C
    pub beta: ndarray::Array2<f64>,  // 1 x C
    pub running: RefCell<RunningStats>,
}

impl BnParams {
    pub fn new(width: usize) -> Self {
        BnParams {
            gamma: ndarray::Array2::ones((1, width)),
            beta: ndarray::Array2::zeros((1, width)),
            running: RefCell::new(RunningStats::new(width)),
        }
    }

    fn bind(&self, tape: &Tape, bound: &mut Vec<Tensor>) -> (Tensor, Tensor) {
        let g = tape.param(self.gamma.clone());
        let b = tape.param(self.beta.clone());
        bound.push(g.clone());
        bound.push(b.clone());
        (g, b)
    }
}

/// One S-UGC head with its mid-block normalization (between DConv and PConv).
#[derive(Debug)]
pub struct SugcHead {
    pub filter: SugcParams,
    pub bn_mid: BnParams,
}

/// Learnable state of one block, by model kind.
pub enum BlockParams {
    Gcn { layer: GcParams, bn: BnParams },
    Gat { heads: Vec<GatParams>, bn: BnParams },
    Sugc { heads: Vec<SugcHead>, bn: BnParams },
    Gugc { layer: GugcParams, bn: BnParams },
}

impl BlockParams {
    /// Forward pass. Parameters are pushed onto the tape in the same order
    /// `visit_params` reports them, and appended to `bound`.
    pub fn forward(
        &self,
        tape: &Tape,
        x: &Tensor,
        edges: &EdgeIndex,
        mode: Mode,
        normalize_attention: bool,
        bound: &mut Vec<Tensor>,
    ) -> Tensor {
        match self {
            BlockParams::Gcn { layer, bn } => {
                let w = tape.param(layer.w.clone());
                bound.push(w.clone());
                let z = gc_forward_bound(tape, x, edges, &w);
                let (g, b) = bn.bind(tape, bound);
                z.batch_norm(&g, &b, &bn.running, mode).relu()
            }
            BlockParams::Gat { heads, bn } => {
                let outs: Vec<Tensor> = heads
                    .iter()
                    .map(|h| {
                        let w = tape.param(h.w.clone());
                        let a_s = tape.param(h.att_self.clone());
                        let a_n = tape.param(h.att_nbr.clone());
                        bound.extend([w.clone(), a_s.clone(), a_n.clone()]);
                        gat_forward_bound(x, edges, &w, &a_s, &a_n)
                    })
                    .collect();
                let z = if outs.len() == 1 {
                    outs.into_iter().next().unwrap()
                } else {
                    concat_cols(&outs)
                };
                let (g, b) = bn.bind(tape, bound);
                z.batch_norm(&g, &b, &bn.running, mode).relu()
            }
            BlockParams::Sugc { heads, bn } => {
                let outs: Vec<Tensor> = heads
                    .iter()
                    .map(|h| {
                        let theta = tape.param(h.filter.theta.clone());
                        bound.push(theta.clone());
                        let y = sugc_dconv(tape, x, edges, &theta, normalize_attention);
                        let (g, b) = h.bn_mid.bind(tape, bound);
                        let y = y.batch_norm(&g, &b, &h.bn_mid.running, mode).relu();
                        let w = tape.param(h.filter.w.clone());
                        bound.push(w.clone());
                        y.matmul(&w)
                    })
                    .collect();
                let z = if outs.len() == 1 {
                    outs.into_iter().next().unwrap()
                } else {
                    concat_cols(&outs)
                };
                let (g, b) = bn.bind(tape, bound);
                z.batch_norm(&g, &b, &bn.running, mode).relu()
            }
            BlockParams::Gugc { layer, bn } => {
                let t0 = tape.param(layer.theta_self.clone());
                let t1 = tape.param(layer.theta_nbr.clone());
                bound.extend([t0.clone(), t1.clone()]);
                let z = gugc_forward_bound(tape, x, edges, &t0, &t1, normalize_attention);
                let (g, b) = bn.bind(tape, bound);
                z.batch_norm(&g, &b, &bn.running, mode).relu()
            }
        }
    }

    /// Reads every learnable array in binding order.
    pub fn visit_params<'a>(&'a self, out: &mut Vec<&'a ndarray::Array2<f64>>) {
        match self {
            BlockParams::Gcn { layer, bn } => {
                out.push(&layer.w);
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
            BlockParams::Gat { heads, bn } => {
                for h in heads {
                    out.push(&h.w);
                    out.push(&h.att_self);
                    out.push(&h.att_nbr);
                }
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
            BlockParams::Sugc { heads, bn } => {
                for h in heads {
                    out.push(&h.filter.theta);
                    out.push(&h.bn_mid.gamma);
                    out.push(&h.bn_mid.beta);
                    out.push(&h.filter.w);
                }
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
            BlockParams::Gugc { layer, bn } => {
                out.push(&layer.theta_self);
                out.push(&layer.theta_nbr);
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
    }

    /// Mutable twin of `visit_params`; the orders must stay in lockstep.
    pub fn visit_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut ndarray::Array2<f64>>) {
        match self {
            BlockParams::Gcn { layer, bn } => {
                out.push(&mut layer.w);
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
            BlockParams::Gat { heads, bn } => {
                for h in heads {
                    out.push(&mut h.w);
                    out.push(&mut h.att_self);
                    out.push(&mut h.att_nbr);
                }
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
            BlockParams::Sugc { heads, bn } => {
                for h in heads {
                    out.push(&mut h.filter.theta);
                    out.push(&mut h.bn_mid.gamma);
                    out.push(&mut h.bn_mid.beta);
                    out.push(&mut h.filter.w);
                }
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
            BlockParams::Gugc { layer, bn } => {
                out.push(&mut layer.theta_self);
                out.push(&mut layer.theta_nbr);
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
    }
}

/// Free-function form of the block forward (fresh parameter binding).
pub fn block_forward(
    tape: &Tape,
    x: &Tensor,
    edges: &EdgeIndex,
    block: &BlockParams,
    mode: Mode,
    normalize_attention: bool,
) -> Tensor {
    let mut bound = Vec::new();
    block.forward(tape, x, edges, mode, normalize_attention, &mut bound)
}
