//! Independent reference implementations of depthwise and pointwise
//! convolution, on graphs and on grids, plus verifiers showing that the GC
//! and GAT layers factor exactly through them.
//!
//! Everything here favors clarity over speed: dense scalar loops, hash-map
//! kernels, no shared code with the tape-based layer implementations beyond
//! the layer entry points being verified.

mod graph_checks;
mod grid;
mod suite;

use std::collections::HashMap;

use ndarray::Array2;
use thiserror::Error;

pub use graph_checks::{
    gat_kernel, gc_kernel, neighborhoods, verify_gat_decomposition, verify_gc_decomposition,
};
pub use grid::{grid_conv, grid_dsconv, GridTensor};
pub use suite::{run_verification, CheckResult, VerificationReport};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("kernel has no entry for neighborhood pair ({0}, {1})")]
    MissingKernelEntry(usize, usize),
    #[error("pointwise kernel length {kernel} does not match {channels} channels")]
    LengthMismatch { kernel: usize, channels: usize },
    #[error("grid kernel size {0} is even; a centered window needs an odd size")]
    EvenKernel(usize),
}

/// Per-(position, neighbor, channel) depthwise weights, stored sparsely on
/// the neighborhood pairs they are defined for.
#[derive(Debug, Clone)]
pub struct DepthwiseKernel {
    entries: HashMap<(usize, usize), Vec<f64>>,
    channels: usize,
}

impl DepthwiseKernel {
    pub fn new(channels: usize) -> Self {
        DepthwiseKernel {
            entries: HashMap::new(),
            channels,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Sets the weight vector for the pair (p, neighbor); one entry per channel.
    pub fn set(&mut self, p: usize, nbr: usize, weights: Vec<f64>) {
        assert_eq!(weights.len(), self.channels, "one weight per channel");
        self.entries.insert((p, nbr), weights);
    }

    pub fn get(&self, p: usize, nbr: usize) -> Option<&[f64]> {
        self.entries.get(&(p, nbr)).map(|w| w.as_slice())
    }

    /// Largest deviation of any entry from its pair's channel-0 weight;
    /// exactly zero (no rounding slack needed) for the channel-constant
    /// kernels the GC/GAT constructions produce.
    pub fn max_channel_spread(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.entries.values() {
            for &x in &w[1..] {
                worst = worst.max((x - w[0]).abs());
            }
        }
        worst
    }
}

/// D pointwise kernels, each one weight per input channel.
#[derive(Debug, Clone)]
pub struct PointwiseKernelSet {
    kernels: Vec<Vec<f64>>,
}

impl PointwiseKernelSet {
    /// Builds from D rows of length C; panics on ragged input.
    pub fn new(kernels: Vec<Vec<f64>>) -> Self {
        assert!(!kernels.is_empty(), "need at least one kernel");
        let c = kernels[0].len();
        assert!(
            kernels.iter().all(|k| k.len() == c),
            "kernels must share one length"
        );
        PointwiseKernelSet { kernels }
    }

    /// One kernel per column of a weight matrix: kappa_d(c) = W[c, d].
    pub fn from_weight_columns(w: &Array2<f64>) -> Self {
        let kernels = (0..w.ncols())
            .map(|d| (0..w.nrows()).map(|c| w[[c, d]]).collect())
            .collect();
        PointwiseKernelSet::new(kernels)
    }

    pub fn num_kernels(&self) -> usize {
        self.kernels.len()
    }

    pub fn channels(&self) -> usize {
        self.kernels[0].len()
    }

    pub fn kernel(&self, d: usize) -> &[f64] {
        &self.kernels[d]
    }
}

/// Depthwise step: Y[p, c] = sum over neighbors of kernel(p, p', c) X[p', c].
/// No channel mixing; every neighborhood pair must carry a kernel entry.
pub fn dconv_generic(
    x: &Array2<f64>,
    neighbors: &[Vec<usize>],
    kernel: &DepthwiseKernel,
) -> Result<Array2<f64>, OracleError> {
    let (n, c) = x.dim();
    assert_eq!(neighbors.len(), n, "one neighbor list per row of X");
    assert_eq!(kernel.channels(), c, "kernel channel count must match X");
    let mut y = Array2::<f64>::zeros((n, c));
    for (p, nbrs) in neighbors.iter().enumerate() {
        for &v in nbrs {
            let w = kernel
                .get(p, v)
                .ok_or(OracleError::MissingKernelEntry(p, v))?;
            for ch in 0..c {
                y[[p, ch]] += w[ch] * x[[v, ch]];
            }
        }
    }
    Ok(y)
}

/// Pointwise step: Z[p, d] = sum over channels of kappa_d(c) Y[p, c]. Purely
/// per-position; no neighbor term anywhere.
pub fn pconv_generic(
    y: &Array2<f64>,
    kernels: &PointwiseKernelSet,
) -> Result<Array2<f64>, OracleError> {
    let (n, c) = y.dim();
    if kernels.channels() != c {
        return Err(OracleError::LengthMismatch {
            kernel: kernels.channels(),
            channels: c,
        });
    }
    let d_out = kernels.num_kernels();
    let mut z = Array2::<f64>::zeros((n, d_out));
    for p in 0..n {
        for d in 0..d_out {
            let k = kernels.kernel(d);
            for ch in 0..c {
                z[[p, d]] += k[ch] * y[[p, ch]];
            }
        }
    }
    Ok(z)
}
