//! Numeric substrate for the graph layers: a define-by-run tape over dense
//! 2-D `f64` arrays with reverse-mode gradient accumulation, ragged segment
//! operations (softmax / sum over neighborhoods), batch normalization,
//! dropout, cross-entropy, and the Adam optimizer.
//!
//! Shape violations are programming errors and panic; recoverable error
//! handling lives in the I/O layers.

mod adam;
pub mod fd;
mod segments;
mod tape;

pub use adam::AdamState;
pub use segments::Segments;
pub use tape::{concat_cols, CustomGrad, Mode, RunningStats, Tape, Tensor};

/// Elementwise activation selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Identity,
}

/// Default negative slope for LeakyReLU (GAT convention).
pub const LEAKY_SLOPE: f64 = 0.2;

/// BatchNorm epsilon inside the square root.
pub const BN_EPS: f64 = 1e-5;

/// BatchNorm running-statistics momentum: new = (1 - m) * old + m * batch.
pub const BN_MOMENTUM: f64 = 0.1;
