//! Grid (image) convolution references: the standard dense convolution and
//! its depthwise-separable factorization, both as plain scalar loops over
//! H x W x C arrays with zero padding.

use ndarray::Array3;

use crate::{OracleError, PointwiseKernelSet};

/// An H x W x C feature map.
#[derive(Debug, Clone)]
pub struct GridTensor {
    pub data: Array3<f64>,
}

impl GridTensor {
    pub fn new(data: Array3<f64>) -> Self {
        GridTensor { data }
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }
}

fn check_kernel(k: usize) -> Result<usize, OracleError> {
    if k % 2 == 0 {
        return Err(OracleError::EvenKernel(k));
    }
    Ok(k / 2)
}

/// Standard convolution: D kernels of size K x K x C, each output channel
/// summing over the full window and all input channels. Zero padding keeps
/// the spatial size.
pub fn grid_conv(x: &GridTensor, kernels: &[Array3<f64>]) -> Result<Array3<f64>, OracleError> {
    assert!(!kernels.is_empty(), "need at least one kernel");
    let (h, w, c) = x.data.dim();
    let k = kernels[0].dim().0;
    for kn in kernels {
        assert_eq!(kn.dim(), (k, k, c), "kernels must share K x K x C");
    }
    let half = check_kernel(k)? as isize;
    let d_out = kernels.len();
    let mut z = Array3::<f64>::zeros((h, w, d_out));
    for i in 0..h as isize {
        for j in 0..w as isize {
            for (d, kn) in kernels.iter().enumerate() {
                let mut acc = 0.0;
                for di in -half..=half {
                    for dj in -half..=half {
                        let (si, sj) = (i + di, j + dj);
                        if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                            continue; // zero padding
                        }
                        let (ki, kj) = ((di + half) as usize, (dj + half) as usize);
                        for ch in 0..c {
                            acc += kn[[ki, kj, ch]] * x.data[[si as usize, sj as usize, ch]];
                        }
                    }
                }
                z[[i as usize, j as usize, d]] = acc;
            }
        }
    }
    Ok(z)
}

/// Depthwise-separable convolution: one shared K x K x C depthwise kernel
/// (no channel mixing), then a pointwise kernel set mixing channels per
/// position.
pub fn grid_dsconv(
    x: &GridTensor,
    depth_kernel: &Array3<f64>,
    point_kernels: &PointwiseKernelSet,
) -> Result<Array3<f64>, OracleError> {
    let (h, w, c) = x.data.dim();
    let k = depth_kernel.dim().0;
    assert_eq!(depth_kernel.dim(), (k, k, c), "depth kernel must be K x K x C");
    if point_kernels.channels() != c {
        return Err(OracleError::LengthMismatch {
            kernel: point_kernels.channels(),
            channels: c,
        });
    }
    let half = check_kernel(k)? as isize;

    // Depthwise: spatial mixing only.
    let mut y = Array3::<f64>::zeros((h, w, c));
    for i in 0..h as isize {
        for j in 0..w as isize {
            for ch in 0..c {
                let mut acc = 0.0;
                for di in -half..=half {
                    for dj in -half..=half {
                        let (si, sj) = (i + di, j + dj);
                        if si < 0 || sj < 0 || si >= h as isize || sj >= w as isize {
                            continue;
                        }
                        let (ki, kj) = ((di + half) as usize, (dj + half) as usize);
                        acc += depth_kernel[[ki, kj, ch]] * x.data[[si as usize, sj as usize, ch]];
                    }
                }
                y[[i as usize, j as usize, ch]] = acc;
            }
        }
    }

    // Pointwise: channel mixing only.
    let d_out = point_kernels.num_kernels();
    let mut z = Array3::<f64>::zeros((h, w, d_out));
    for i in 0..h {
        for j in 0..w {
            for d in 0..d_out {
                let kappa = point_kernels.kernel(d);
                let mut acc = 0.0;
                for ch in 0..c {
                    acc += kappa[ch] * y[[i, j, ch]];
                }
                z[[i, j, d]] = acc;
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs3(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn one_by_one_identity_kernels_reproduce_input() {
        let x = GridTensor::new(Array3::from_shape_fn((4, 5, 3), |(i, j, c)| {
            (i * 15 + j * 3 + c) as f64
        }));
        let kernels: Vec<Array3<f64>> = (0..3)
            .map(|d| Array3::from_shape_fn((1, 1, 3), |(_, _, c)| if c == d { 1.0 } else { 0.0 }))
            .collect();
        let z = grid_conv(&x, &kernels).unwrap();
        assert_eq!(z, x.data);
    }

    #[test]
    fn all_ones_3x3_on_constant_image_counts_window() {
        // Interior windows see 9 ones, corners only 4 (zero padding).
        let x = GridTensor::new(Array3::ones((5, 5, 1)));
        let z = grid_conv(&x, &[Array3::ones((3, 3, 1))]).unwrap();
        assert_eq!(z[[2, 2, 0]], 9.0);
        assert_eq!(z[[0, 0, 0]], 4.0);
        assert_eq!(z[[0, 2, 0]], 6.0); // top edge
    }

    #[test]
    fn even_kernel_is_rejected() {
        let x = GridTensor::new(Array3::ones((4, 4, 1)));
        assert!(matches!(
            grid_conv(&x, &[Array3::ones((2, 2, 1))]),
            Err(OracleError::EvenKernel(2))
        ));
        assert!(matches!(
            grid_dsconv(
                &x,
                &Array3::ones((2, 2, 1)),
                &PointwiseKernelSet::new(vec![vec![1.0]])
            ),
            Err(OracleError::EvenKernel(2))
        ));
    }

    #[test]
    fn grid_conv_matches_six_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = GridTensor::new(Array3::from_shape_fn((6, 6, 3), |_| rng.gen_range(-1.0..1.0)));
        let kernels: Vec<Array3<f64>> = (0..2)
            .map(|_| Array3::from_shape_fn((3, 3, 3), |_| rng.gen_range(-1.0..1.0)))
            .collect();
        let z = grid_conv(&x, &kernels).unwrap();

        // Fully independent six-deep loop, written with explicit index
        // arithmetic rather than the offset helpers above.
        let mut want = Array3::<f64>::zeros((6, 6, 2));
        for i in 0..6usize {
            for j in 0..6usize {
                for d in 0..2usize {
                    for ki in 0..3usize {
                        for kj in 0..3usize {
                            for ch in 0..3usize {
                                let si = i as isize + ki as isize - 1;
                                let sj = j as isize + kj as isize - 1;
                                if (0..6).contains(&si) && (0..6).contains(&sj) {
                                    want[[i, j, d]] += kernels[d][[ki, kj, ch]]
                                        * x.data[[si as usize, sj as usize, ch]];
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(max_abs3(&z, &want) < 1e-12);
    }

    #[test]
    fn centered_delta_depth_kernel_reduces_to_pconv() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = GridTensor::new(Array3::from_shape_fn((5, 4, 3), |_| rng.gen_range(-1.0..1.0)));
        let mut delta = Array3::<f64>::zeros((3, 3, 3));
        for c in 0..3 {
            delta[[1, 1, c]] = 1.0;
        }
        let kernels = PointwiseKernelSet::new(vec![vec![0.5, -1.0, 2.0], vec![1.0, 1.0, 1.0]]);
        let z = grid_dsconv(&x, &delta, &kernels).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let row = [x.data[[i, j, 0]], x.data[[i, j, 1]], x.data[[i, j, 2]]];
                let want0 = 0.5 * row[0] - row[1] + 2.0 * row[2];
                let want1: f64 = row.iter().sum();
                assert!((z[[i, j, 0]] - want0).abs() < 1e-14);
                assert!((z[[i, j, 1]] - want1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn channel_selector_point_kernels_reduce_to_dconv() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = GridTensor::new(Array3::from_shape_fn((5, 5, 2), |_| rng.gen_range(-1.0..1.0)));
        let depth = Array3::from_shape_fn((3, 3, 2), |_| rng.gen_range(-1.0..1.0));
        let selectors = PointwiseKernelSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let z = grid_dsconv(&x, &depth, &selectors).unwrap();

        // Per-channel spatial loop; output channel d must be channel d's
        // depthwise result untouched.
        for i in 0..5usize {
            for j in 0..5usize {
                for ch in 0..2usize {
                    let mut want = 0.0;
                    for ki in 0..3usize {
                        for kj in 0..3usize {
                            let si = i as isize + ki as isize - 1;
                            let sj = j as isize + kj as isize - 1;
                            if (0..5).contains(&si) && (0..5).contains(&sj) {
                                want +=
                                    depth[[ki, kj, ch]] * x.data[[si as usize, sj as usize, ch]];
                            }
                        }
                    }
                    assert!((z[[i, j, ch]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rank_one_kernels_make_conv_and_dsconv_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let x =
                GridTensor::new(Array3::from_shape_fn((6, 6, 3), |_| rng.gen_range(-1.0..1.0)));
            let depth = Array3::from_shape_fn((3, 3, 3), |_| rng.gen_range(-1.0..1.0));
            let kappa: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            // Full kernels factor as K_d[k, c] = depth[k, c] * kappa_d(c).
            let kernels: Vec<Array3<f64>> = kappa
                .iter()
                .map(|kd| Array3::from_shape_fn((3, 3, 3), |(ki, kj, c)| depth[[ki, kj, c]] * kd[c]))
                .collect();
            let full = grid_conv(&x, &kernels).unwrap();
            let separable =
                grid_dsconv(&x, &depth, &PointwiseKernelSet::new(kappa.clone())).unwrap();
            assert!(max_abs3(&full, &separable) < 1e-12);
        }
    }
}
