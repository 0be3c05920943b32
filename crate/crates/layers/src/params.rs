//! Learnable parameter containers and their exact parameter counts.

use ndarray::Array2;
use rand::Rng;

/// Xavier-uniform sample in [-sqrt(6/(fan_in+fan_out)), +...].
fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

/// GC layer: one pointwise weight matrix, the depthwise part is the fixed
/// normalized adjacency.
#[derive(Debug, Clone)]
pub struct GcParams {
    pub w: Array2<f64>, // C x D
}

impl GcParams {
    pub fn init<R: Rng>(c: usize, d: usize, rng: &mut R) -> Self {
        GcParams { w: xavier(rng, c, d, c, d) }
    }

    /// C * D
    pub fn param_count(&self) -> usize {
        self.w.len()
    }
}

/// GAT layer: pointwise weights plus the 2D-dimensional attention vector,
/// stored as its self/neighbor halves.
#[derive(Debug, Clone)]
pub struct GatParams {
    pub w: Array2<f64>,        // C x D
    pub att_self: Array2<f64>, // D x 1, first half of the attention vector
    pub att_nbr: Array2<f64>,  // D x 1, second half
}

impl GatParams {
    pub fn init<R: Rng>(c: usize, d: usize, rng: &mut R) -> Self {
        GatParams {
            w: xavier(rng, c, d, c, d),
            att_self: xavier(rng, d, 1, d, 1),
            att_nbr: xavier(rng, d, 1, d, 1),
        }
    }

    /// C * D + 2 D
    pub fn param_count(&self) -> usize {
        self.w.len() + self.att_self.len() + self.att_nbr.len()
    }
}

/// S-UGC: one 2-vector filter per input channel (row 0 weighs the receiving
/// node's value, row 1 the neighbor's), then a pointwise W.
#[derive(Debug, Clone)]
pub struct SugcParams {
    pub theta: Array2<f64>, // 2 x C
    pub w: Array2<f64>,     // C x D
}

impl SugcParams {
    pub fn init<R: Rng>(c: usize, d: usize, rng: &mut R) -> Self {
        SugcParams {
            theta: xavier(rng, 2, c, 2, 1),
            w: xavier(rng, c, d, c, d),
        }
    }

    /// 2 C + C * D
    pub fn param_count(&self) -> usize {
        self.theta.len() + self.w.len()
    }
}

/// G-UGC: an independent 2-vector filter for every (channel, output) pair
/// and no pointwise weight matrix at all.
#[derive(Debug, Clone)]
pub struct GugcParams {
    pub theta_self: Array2<f64>, // C x D
    pub theta_nbr: Array2<f64>,  // C x D
}

impl GugcParams {
    pub fn init<R: Rng>(c: usize, d: usize, rng: &mut R) -> Self {
        GugcParams {
            theta_self: xavier(rng, c, d, c, d),
            theta_nbr: xavier(rng, c, d, c, d),
        }
    }

    /// 2 C * D
    pub fn param_count(&self) -> usize {
        self.theta_self.len() + self.theta_nbr.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_counts_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for &(c, d) in &[(1usize, 1usize), (3, 2), (7, 5), (136, 64)] {
            assert_eq!(GcParams::init(c, d, &mut rng).param_count(), c * d);
            assert_eq!(GatParams::init(c, d, &mut rng).param_count(), c * d + 2 * d);
            assert_eq!(SugcParams::init(c, d, &mut rng).param_count(), 2 * c + c * d);
            assert_eq!(GugcParams::init(c, d, &mut rng).param_count(), 2 * c * d);
        }
    }
}
