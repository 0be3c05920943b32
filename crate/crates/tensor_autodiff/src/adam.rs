//! Bias-corrected Adam over a fixed list of parameter arrays.

use ndarray::Array2;

/// Optimizer state: one pair of moment estimates per parameter array.
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
}

impl AdamState {
    /// Canonical constants (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            second_moment: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One in-place update. `params` and `grads` must line up with the shapes
    /// given at construction; a missing gradient (None) leaves moments
    /// decaying and still advances the bias correction consistently.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Option<Array2<f64>>]) {
        assert_eq!(params.len(), self.first_moment.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let zero;
            let g = match &grads[i] {
                Some(g) => {
                    assert_eq!(g.dim(), p.dim(), "gradient shape mismatch at slot {i}");
                    g
                }
                None => {
                    zero = Array2::zeros(p.dim());
                    &zero
                }
            };
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            assert_eq!(m.dim(), p.dim(), "moment shape mismatch at slot {i}");
            ndarray::Zip::from(&mut **p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn zero_gradient_keeps_parameter_but_decays_moments() {
        let mut p = arr2(&[[1.5]]);
        let mut st = AdamState::new(0.1, &[(1, 1)]);
        // Seed the moments with one real step, then feed zeros.
        st.step(&mut [&mut p], &[Some(arr2(&[[1.0]]))]);
        let m_before = st.first_moment[0][[0, 0]];
        let p_before = p[[0, 0]];
        st.step(&mut [&mut p], &[Some(arr2(&[[0.0]]))]);
        assert!(st.first_moment[0][[0, 0]].abs() < m_before.abs());
        // Parameter still moves (momentum), but strictly less than before.
        assert!((p[[0, 0]] - p_before).abs() < (p_before - 1.5).abs() + 1e-12);
    }

    #[test]
    fn first_step_is_signed_unit_lr_up_to_epsilon() {
        // Bias correction makes m_hat = g and v_hat = g^2 on step one, so the
        // update is -lr * g / (|g| + eps) ~ -lr * sign(g).
        for &g in &[0.3f64, -2.0, 11.7] {
            let mut p = arr2(&[[0.0]]);
            let mut st = AdamState::new(0.01, &[(1, 1)]);
            st.step(&mut [&mut p], &[Some(arr2(&[[g]]))]);
            let expect = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[[0, 0]] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_steps_match_hand_trace() {
        // Scalar trace with lr=0.1, g=2 then g=1, computed by hand.
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut x = 1.0;
        for (t, g) in [(1, 2.0f64), (2, 1.0)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1f64(b1, t));
            let vh = v / (1.0 - b1f64(b2, t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = arr2(&[[1.0]]);
        let mut st = AdamState::new(lr, &[(1, 1)]);
        st.step(&mut [&mut p], &[Some(arr2(&[[2.0]]))]);
        st.step(&mut [&mut p], &[Some(arr2(&[[1.0]]))]);
        assert!((p[[0, 0]] - x).abs() < 1e-14, "{} vs {}", p[[0, 0]], x);
    }

    fn b1f64(b: f64, t: i32) -> f64 {
        b.powi(t)
    }
}
