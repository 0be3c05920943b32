//! The packaged verification suite behind the `verify` CLI subcommand:
//! random-instance equivalence sweeps, negative controls, the grid rank-1
//! identity, and the channel-constancy invariant.

use graph_core::{add_self_loops, normalize_adjacency, Graph};
use layers::{gat_forward, gc_forward, EdgeIndex, GatParams, GcParams};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::Tape;

use crate::graph_checks::{gat_kernel, gc_kernel, max_abs, neighborhoods};
use crate::{
    dconv_generic, grid_conv, grid_dsconv, pconv_generic, verify_gat_decomposition,
    verify_gc_decomposition, GridTensor, PointwiseKernelSet,
};

/// One line of the verification report.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    /// Worst deviation observed (for controls: the smallest, i.e. the
    /// hardest-to-detect corruption).
    pub deviation: f64,
    pub threshold: f64,
    /// Negative controls invert the comparison: the deviation must exceed
    /// the threshold for the check to pass.
    pub must_exceed: bool,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        if self.must_exceed {
            self.deviation > self.threshold
        } else {
            self.deviation <= self.threshold
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

/// Random instance: Erdos-Renyi graph (p = 0.4, N <= 20), uniform [-1, 1]
/// features with C <= 8 channels, and a D <= 4 output width.
fn random_instance(rng: &mut ChaCha8Rng) -> (Graph, Array2<f64>, usize) {
    let n = rng.gen_range(1..=20);
    let c = rng.gen_range(1..=8);
    let d = rng.gen_range(1..=4);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.4) {
                edges.push((u, v));
            }
        }
    }
    let x = Array2::from_shape_fn((n, c), |_| rng.gen_range(-1.0..1.0));
    let g = add_self_loops(&Graph::new(n, &edges, x.clone(), 0).unwrap());
    (g, x, d)
}

/// GC layer versus a decomposition whose pointwise weights were corrupted;
/// the deviation this reports must be large or the verifier is vacuous.
fn gc_control_deviation(g: &Graph, x: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let adj = normalize_adjacency(g).expect("graph must normalize");
    let edges = EdgeIndex::from(&adj);
    let tape = Tape::new();
    let xt = tape.leaf(x.clone());
    let layer = gc_forward(&tape, &xt, &edges, &GcParams { w: w.clone() });

    let mut w_bad = w.clone();
    w_bad[[0, 0]] += 1.0;
    let kernel = gc_kernel(&adj, x.ncols());
    let y = dconv_generic(x, &neighborhoods(g), &kernel).unwrap();
    let z = pconv_generic(&y, &PointwiseKernelSet::from_weight_columns(&w_bad)).unwrap();
    max_abs(&layer.value(), &z)
}

/// Same corruption for GAT.
fn gat_control_deviation(g: &Graph, x: &Array2<f64>, params: &GatParams) -> f64 {
    let adj = normalize_adjacency(g).expect("graph must normalize");
    let edges = EdgeIndex::from(&adj);
    let tape = Tape::new();
    let xt = tape.leaf(x.clone());
    let layer = gat_forward(&tape, &xt, &edges, params);

    let alpha = layers::gat_attention(&tape, &xt, &edges, params);
    let kernel = gat_kernel(&alpha.value(), &edges, x.ncols());
    let mut w_bad = params.w.clone();
    w_bad[[0, 0]] += 1.0;
    let y = dconv_generic(x, &neighborhoods(g), &kernel).unwrap();
    let z = pconv_generic(&y, &PointwiseKernelSet::from_weight_columns(&w_bad)).unwrap();
    max_abs(&layer.value(), &z)
}

/// Runs the full suite: `trials` random instances per equivalence check,
/// seeded so reruns are bit-identical.
pub fn run_verification(trials: usize, seed: u64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // GC equivalence plus its negative control and kernel constancy.
    let mut gc_dev = 0.0f64;
    let mut gc_control = f64::INFINITY;
    let mut spread = 0.0f64;
    for _ in 0..trials {
        let (g, x, d) = random_instance(&mut rng);
        let w = Array2::from_shape_fn((x.ncols(), d), |_| rng.gen_range(-1.0..1.0));
        gc_dev = gc_dev.max(verify_gc_decomposition(&g, &x, &w));
        gc_control = gc_control.min(gc_control_deviation(&g, &x, &w));
        let adj = normalize_adjacency(&g).unwrap();
        spread = spread.max(gc_kernel(&adj, x.ncols()).max_channel_spread());
    }
    checks.push(CheckResult {
        name: "gc_dsconv_equivalence",
        deviation: gc_dev,
        threshold: 1e-10,
        must_exceed: false,
    });
    checks.push(CheckResult {
        name: "gc_negative_control",
        deviation: gc_control,
        threshold: 1e-3,
        must_exceed: true,
    });

    // GAT equivalence, control, and constancy of the attention kernel.
    let mut gat_dev = 0.0f64;
    let mut gat_control = f64::INFINITY;
    for _ in 0..trials {
        let (g, x, d) = random_instance(&mut rng);
        let params = GatParams::init(x.ncols(), d, &mut rng);
        gat_dev = gat_dev.max(verify_gat_decomposition(&g, &x, &params));
        gat_control = gat_control.min(gat_control_deviation(&g, &x, &params));

        let adj = normalize_adjacency(&g).unwrap();
        let edges = EdgeIndex::from(&adj);
        let tape = Tape::new();
        let xt = tape.leaf(x.clone());
        let alpha = layers::gat_attention(&tape, &xt, &edges, &params);
        spread = spread.max(
            gat_kernel(&alpha.value(), &edges, x.ncols()).max_channel_spread(),
        );
    }
    checks.push(CheckResult {
        name: "gat_dsconv_equivalence",
        deviation: gat_dev,
        threshold: 1e-10,
        must_exceed: false,
    });
    checks.push(CheckResult {
        name: "gat_negative_control",
        deviation: gat_control,
        threshold: 1e-3,
        must_exceed: true,
    });
    checks.push(CheckResult {
        name: "kernel_channel_constancy",
        deviation: spread,
        threshold: 0.0,
        must_exceed: false,
    });

    // Grid rank-1 identity on 20 fixed-size instances.
    let mut grid_dev = 0.0f64;
    for _ in 0..20 {
        let x = GridTensor::new(Array3::from_shape_fn((6, 6, 3), |_| rng.gen_range(-1.0..1.0)));
        let depth = Array3::from_shape_fn((3, 3, 3), |_| rng.gen_range(-1.0..1.0));
        let d_out = rng.gen_range(1..=4);
        let kappa: Vec<Vec<f64>> = (0..d_out)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let kernels: Vec<Array3<f64>> = kappa
            .iter()
            .map(|kd| Array3::from_shape_fn((3, 3, 3), |(ki, kj, c)| depth[[ki, kj, c]] * kd[c]))
            .collect();
        let full = grid_conv(&x, &kernels).unwrap();
        let separable = grid_dsconv(&x, &depth, &PointwiseKernelSet::new(kappa)).unwrap();
        let diff = full
            .iter()
            .zip(separable.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        grid_dev = grid_dev.max(diff);
    }
    checks.push(CheckResult {
        name: "grid_rank1_identity",
        deviation: grid_dev,
        threshold: 1e-12,
        must_exceed: false,
    });

    VerificationReport {
        trials,
        seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes_and_is_deterministic() {
        let a = run_verification(25, 42);
        assert!(a.all_passed(), "checks: {:?}", a.checks);
        let b = run_verification(25, 42);
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.deviation.to_bits(), y.deviation.to_bits());
        }
    }

    #[test]
    fn controls_actually_detect_corruption() {
        let report = run_verification(10, 1);
        let gc = report
            .checks
            .iter()
            .find(|c| c.name == "gc_negative_control")
            .unwrap();
        assert!(gc.deviation > 1e-3);
        let gat = report
            .checks
            .iter()
            .find(|c| c.name == "gat_negative_control")
            .unwrap();
        assert!(gat.deviation > 1e-3);
    }
}
