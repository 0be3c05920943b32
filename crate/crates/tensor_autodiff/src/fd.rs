//! Central finite differences for gradient checking. Shared by the unit
//! tests here, the layer tests, and the acceptance suite.

use ndarray::Array2;

/// Step size: with 64-bit floats this puts truncation and rounding error
/// both far below the 1e-4 relative tolerance the checks assert.
pub const FD_STEP: f64 = 1e-5;

/// Numeric gradient of `f` w.r.t. each array in `params` by central
/// differences, perturbing one entry at a time.
pub fn numeric_grad<F>(f: F, params: &[Array2<f64>]) -> Vec<Array2<f64>>
where
    F: Fn(&[Array2<f64>]) -> f64,
{
    numeric_grad_with_step(f, params, FD_STEP)
}

/// `numeric_grad` with an explicit step. Deep compositions stacking ReLU
/// kinks want a smaller step than the default: a pre-activation that happens
/// to sit within the step of zero makes the central difference straddle the
/// kink and report a bogus slope.
pub fn numeric_grad_with_step<F>(f: F, params: &[Array2<f64>], step: f64) -> Vec<Array2<f64>>
where
    F: Fn(&[Array2<f64>]) -> f64,
{
    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut g = Array2::<f64>::zeros(params[pi].dim());
        for idx in 0..params[pi].len() {
            let (r, c) = (idx / params[pi].ncols(), idx % params[pi].ncols());
            let orig = work[pi][[r, c]];
            work[pi][[r, c]] = orig + step;
            let up = f(&work);
            work[pi][[r, c]] = orig - step;
            let down = f(&work);
            work[pi][[r, c]] = orig;
            g[[r, c]] = (up - down) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

/// Worst relative disagreement between analytic and numeric gradients,
/// measured as max |a - n| / max(1, ||n||_inf) over all entries of all
/// parameter arrays. The denominator floor keeps near-zero gradients from
/// manufacturing huge ratios out of rounding noise.
pub fn relative_error(analytic: &[Array2<f64>], numeric: &[Array2<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.dim(), n.dim(), "gradient shapes disagree");
        let scale = n.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (&av, &nv) in a.iter().zip(n.iter()) {
            worst = worst.max((av - nv).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn numeric_grad_of_quadratic() {
        // f(x) = sum(x^2): gradient 2x.
        let p = arr2(&[[3.0, -1.0], [0.5, 2.0]]);
        let g = numeric_grad(|ps| ps[0].iter().map(|v| v * v).sum(), &[p.clone()]);
        let expect = &p * 2.0;
        assert!(relative_error(&[expect], &g) < 1e-9);
    }
}
