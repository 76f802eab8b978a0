use crate::error::{Error, Result};

/// Bias-corrected Adam moments for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    /// Defaults `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self::with_betas(len, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(len: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Sets the step counter, e.g. when resuming from a checkpoint that did
    /// not store moments.
    pub fn set_step_count(&mut self, steps: u64) {
        self.step_count = steps;
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// Applies one update in place. `block` names the parameters in errors.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], block: &str) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "adam step on {block}: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {block}")));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.001);
        let mut p = vec![1.0, -2.0, 3.0];
        for _ in 0..5 {
            s.step(&mut p, &[0.0; 3], "w").unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        for g in [1e-3, 0.5, -7.0, 1e4] {
            let mut s = AdamState::new(1, 0.001);
            let mut p = vec![0.0];
            s.step(&mut p, &[g], "w").unwrap();
            let expected = -0.001 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15, "g={g}: {} vs {expected}", p[0]);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut s = AdamState::new(2, 0.01);
            let mut p = vec![0.3, 0.4];
            for k in 0..10 {
                s.step(&mut p, &[k as f64 * 0.1, -0.2], "w").unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = AdamState::new(1, 0.01);
        let err = s.step(&mut [0.0], &[f64::NAN], "encoder.weight").unwrap_err();
        assert!(err.to_string().contains("encoder.weight"));
        assert_eq!(s.step_count(), 0);
    }

    proptest! {
        #[test]
        fn zero_betas_reduce_to_normalized_step(
            p0 in -10.0f64..10.0,
            grads in prop::collection::vec(-5.0f64..5.0, 1..20),
            lr in 1e-4f64..1.0,
        ) {
            let mut s = AdamState::with_betas(1, lr, 0.0, 0.0, 1e-8);
            let mut p = [p0];
            let mut expected = p0;
            for g in grads {
                s.step(&mut p, &[g], "x").unwrap();
                expected -= lr * g / (g.abs() + 1e-8);
                prop_assert!((p[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
