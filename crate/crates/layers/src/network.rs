//! The full network: chained blocks, skip-sum over block outputs, sum
//! readout per graph, dropout, and a dense classifier.

use ndarray::Array2;
use rand::Rng;
use tensor_autodiff::{Mode, Tape, Tensor};

use crate::block::{BlockParams, BnParams, SugcHead};
use crate::params::{GatParams, GcParams, GugcParams, SugcParams};
use crate::BatchData;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gcn,
    Gat,
    Sugcn,
    Gugcn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gat => "gat",
            ModelKind::Sugcn => "sugcn",
            ModelKind::Gugcn => "gugcn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gcn" => Ok(ModelKind::Gcn),
            "gat" => Ok(ModelKind::Gat),
            "sugcn" => Ok(ModelKind::Sugcn),
            "gugcn" => Ok(ModelKind::Gugcn),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// Architecture description. `heads` applies to the attention-style models
/// (GAT, S-UGCN); GCN and G-UGCN ignore it. `skip_sum` off degrades the
/// network to plain sequential blocks (the capacity-probe configuration).
#[derive(Debug, Clone)]
pub struct UgcnConfig {
    pub kind: ModelKind,
    pub in_dim: usize,
    pub num_classes: usize,
    pub hidden: usize,
    pub num_blocks: usize,
    pub heads: usize,
    pub dropout: f64,
    pub normalize_attention: bool,
    pub skip_sum: bool,
}

impl UgcnConfig {
    /// Effective heads: multi-head applies to GAT and S-UGCN only.
    pub fn effective_heads(&self) -> usize {
        match self.kind {
            ModelKind::Gat | ModelKind::Sugcn => self.heads.max(1),
            ModelKind::Gcn | ModelKind::Gugcn => 1,
        }
    }

    /// Width every block consumes and produces (heads concatenate).
    pub fn block_width(&self) -> usize {
        self.hidden * self.effective_heads()
    }
}

/// Model state: per-block parameters plus the dense classifier.
pub struct UgcnModel {
    pub config: UgcnConfig,
    pub blocks: Vec<BlockParams>,
    pub cls_w: Array2<f64>,
    pub cls_b: Array2<f64>,
}

fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

impl UgcnModel {
    pub fn init<R: Rng>(config: UgcnConfig, rng: &mut R) -> Self {
        assert!(config.num_blocks >= 1, "need at least one block");
        assert!(config.hidden >= 1, "hidden width must be positive");
        let width = config.block_width();
        let heads = config.effective_heads();
        let mut blocks = Vec::with_capacity(config.num_blocks);
        for b in 0..config.num_blocks {
            let c_in = if b == 0 { config.in_dim } else { width };
            let block = match config.kind {
                ModelKind::Gcn => BlockParams::Gcn {
                    layer: GcParams::init(c_in, config.hidden, rng),
                    bn: BnParams::new(width),
                },
                ModelKind::Gat => BlockParams::Gat {
                    heads: (0..heads)
                        .map(|_| GatParams::init(c_in, config.hidden, rng))
                        .collect(),
                    bn: BnParams::new(width),
                },
                ModelKind::Sugcn => BlockParams::Sugc {
                    heads: (0..heads)
                        .map(|_| SugcHead {
                            filter: SugcParams::init(c_in, config.hidden, rng),
                            bn_mid: BnParams::new(c_in),
                        })
                        .collect(),
                    bn: BnParams::new(width),
                },
                ModelKind::Gugcn => BlockParams::Gugc {
                    layer: GugcParams::init(c_in, config.hidden, rng),
                    bn: BnParams::new(width),
                },
            };
            blocks.push(block);
        }
        let cls_w = xavier(rng, width, config.num_classes);
        let cls_b = Array2::zeros((1, config.num_classes));
        UgcnModel {
            config,
            blocks,
            cls_w,
            cls_b,
        }
    }

    /// Graph-level logits. Returns the bound parameter tensors in the same
    /// order as `params_mut`, for gradient readout after `backward`.
    pub fn forward<R: Rng>(
        &self,
        tape: &Tape,
        batch: &BatchData,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor, Vec<Tensor>) {
        let mut bound = Vec::new();
        let x0 = tape.leaf(batch.x0.clone());
        let mut h = self.blocks[0].forward(
            tape,
            &x0,
            &batch.edges,
            mode,
            self.config.normalize_attention,
            &mut bound,
        );
        let mut acc = h.clone();
        for block in &self.blocks[1..] {
            h = block.forward(
                tape,
                &h,
                &batch.edges,
                mode,
                self.config.normalize_attention,
                &mut bound,
            );
            if self.config.skip_sum {
                acc = acc.add(&h);
            } else {
                acc = h.clone();
            }
        }
        let pooled = acc.segment_sum(&batch.graph_segs);
        let dropped = pooled.dropout(self.config.dropout, mode, rng);
        let w = tape.param(self.cls_w.clone());
        let b = tape.param(self.cls_b.clone());
        bound.push(w.clone());
        bound.push(b.clone());
        let logits = dropped.matmul(&w).add_row(&b);
        (logits, bound)
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            b.visit_params(&mut out);
        }
        out.push(&self.cls_w);
        out.push(&self.cls_b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            b.visit_params_mut(&mut out);
        }
        out.push(&mut self.cls_w);
        out.push(&mut self.cls_b);
        out
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|p| p.dim()).collect()
    }

    /// Total learnable entries (including batch-norm affines and classifier).
    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Convenience wrapper: run the whole network on a prepared batch.
pub fn ugcn_forward<R: Rng>(
    tape: &Tape,
    model: &UgcnModel,
    batch: &BatchData,
    mode: Mode,
    rng: &mut R,
) -> Tensor {
    model.forward(tape, batch, mode, rng).0
}
