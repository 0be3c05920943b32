//! The four graph convolution layers expressed over one shared
//! depthwise/pointwise decomposition, their batch-norm block wrappers, and
//! the skip-sum network used for graph classification.
//!
//! Layer semantics (N nodes, C input channels, D output channels, neighbor-
//! hoods always containing the self node):
//!
//! * GC:    Z[p,d] = sum_c sum_{p' in N(p)} Ahat[p,p'] X[p',c] W[c,d]
//! * GAT:   same with Ahat replaced by learned attention alpha[p,p'].
//! * S-UGC: per-channel 2-parameter filters theta_c produce depthwise
//!          weights, followed by a pointwise W.
//! * G-UGC: D independent per-(channel, filter) parameter pairs and no W.

mod block;
mod fused;
mod network;
mod ops;
mod params;

use std::rc::Rc;

use graph_core::{GraphBatch, GraphError, NormalizedAdjacency};
use ndarray::Array2;
use tensor_autodiff::Segments;

pub use block::{block_forward, BlockParams, BnParams, SugcHead};
pub use network::{ugcn_forward, ModelKind, UgcnConfig, UgcnModel};
pub use ops::{
    gat_attention, gat_attention_bound, gat_forward, gat_forward_bound, gc_forward,
    gc_forward_bound, gugc_forward, gugc_forward_bound, sugc_dconv, sugc_forward,
};
pub use params::{GatParams, GcParams, GugcParams, SugcParams};

/// Edge structure shared by every layer: receiver-major edge arrays with the
/// per-node spans, plus the normalized adjacency weights for the GC layer.
#[derive(Clone)]
pub struct EdgeIndex {
    pub receivers: Rc<Vec<usize>>,
    pub neighbors: Rc<Vec<usize>>,
    pub segments: Rc<Segments>,
    pub weights: Rc<Vec<f64>>,
    pub num_nodes: usize,
}

impl EdgeIndex {
    pub fn num_edges(&self) -> usize {
        self.receivers.len()
    }
}

impl From<&NormalizedAdjacency> for EdgeIndex {
    fn from(adj: &NormalizedAdjacency) -> Self {
        EdgeIndex {
            receivers: Rc::new(adj.receivers.clone()),
            neighbors: Rc::new(adj.nbr_idx.clone()),
            segments: Rc::new(Segments::from_starts(adj.row_starts.clone())),
            weights: Rc::new(adj.values.clone()),
            num_nodes: adj.num_nodes,
        }
    }
}

/// A batch prepared for the network: features, edge structure, the node to
/// graph segment map for the sum readout, and the labels.
pub struct BatchData {
    pub x0: Array2<f64>,
    pub edges: EdgeIndex,
    pub graph_segs: Rc<Segments>,
    pub labels: Vec<usize>,
}

impl BatchData {
    pub fn from_batch(batch: &GraphBatch) -> Result<Self, GraphError> {
        let adj = batch.normalized_adjacency()?;
        Ok(BatchData {
            x0: batch.node_features.clone(),
            edges: EdgeIndex::from(&adj),
            graph_segs: Rc::new(Segments::from_starts(batch.offsets.clone())),
            labels: batch.labels.clone(),
        })
    }
}
