use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam moments for one flat parameter buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update at the configured learning rate.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        self.step_with_lr(params, grads, self.config.lr)
    }

    /// One update at an explicit (e.g. scheduled) learning rate.
    pub fn step_with_lr(&mut self, params: &mut [T], grads: &[T], lr: f64) -> Result<()> {
        check_len("adam params", self.m.len(), params.len())?;
        check_len("adam grads", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step: self.t,
                what: format!("non-finite gradient at index {i}"),
            });
        }
        self.t += 1;
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        // Folded bias correction: lr * mhat / (sqrt(vhat) + eps).
        let step = T::of(lr / c1);
        let sqrt_c2 = T::of(c2.sqrt());
        let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p -= step * *m / (v.sqrt() / sqrt_c2 + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut s = AdamState::<f64>::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 3.0];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        for g in [3.0f64, -0.02, 1e3] {
            let mut s = AdamState::<f64>::new(1, AdamConfig::with_lr(0.01));
            let mut p = [0.5];
            s.step(&mut p, &[g]).unwrap();
            // mhat = g, vhat = g^2, so the step is lr * g / (|g| + eps).
            let expect = 0.5 - 0.01 * g / (g.abs() + 1e-8);
            assert_abs_diff_eq!(p[0], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut s = AdamState::<f32>::new(1, AdamConfig::with_lr(0.1));
        let mut p = [0.0f32];
        let mut prev = p[0];
        for _ in 0..5 {
            s.step(&mut p, &[2.0]).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut s = AdamState::<f32>::new(2, AdamConfig::default());
        let mut p = [0.0f32; 2];
        assert!(matches!(
            s.step(&mut p, &[1.0, f32::NAN]),
            Err(Error::Divergence { .. })
        ));
        assert!(s.step(&mut p, &[1.0]).is_err());
    }
}
