use crate::nn::{softplus, softplus_inverse};

/// Hyperparameters of the constrained objective and its optimizer.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QrlConfig {
    /// Constraint budget: the expected squared overshoot may reach `ε²`.
    pub epsilon: f64,
    pub lambda_init: f64,
    pub lr_model: f64,
    pub lr_lambda: f64,
    pub batch_size: usize,
    pub total_steps: u64,
    /// `φ(x) = -softplus(phi_offset - x, phi_beta)`.
    pub phi_offset: f64,
    pub phi_beta: f64,
    pub transition_loss_weight: f64,
    /// Probability that a sampled goal is the abstract goal token.
    pub goal_mix_prob: f64,
    pub seed: u64,
    /// Swap the IQE head for a symmetric Euclidean one.
    pub symmetric_ablation: bool,
    pub log_interval: u64,
}

impl QrlConfig {
    /// Full-scale discretized MountainCar settings.
    pub fn full_scale() -> Self {
        Self {
            epsilon: 0.25,
            lambda_init: 0.01,
            lr_model: 5e-4,
            lr_lambda: 0.3,
            batch_size: 4096,
            total_steps: 500_000,
            phi_offset: 500.0,
            phi_beta: 0.01,
            transition_loss_weight: 75.0,
            goal_mix_prob: 0.05,
            seed: 0,
            symmetric_ablation: false,
            log_interval: 1000,
        }
    }

    /// Laptop-sized batch and step budget. With 60× fewer steps the full-scale
    /// learning rate and ε leave most of the value structure unlearned, so
    /// both are adjusted and the goal token is sampled more often.
    pub fn desk() -> Self {
        Self {
            epsilon: 0.02,
            lr_model: 2e-3,
            batch_size: 512,
            total_steps: 30_000,
            goal_mix_prob: 0.3,
            log_interval: 500,
            ..Self::full_scale()
        }
    }
}

/// Lagrange multiplier kept positive through `λ = softplus(raw)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DualState {
    pub lambda_raw: f64,
}

impl DualState {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda_raw: softplus_inverse(lambda),
        }
    }

    pub fn lambda(&self) -> f64 {
        softplus(self.lambda_raw, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dual_init_round_trips() {
        assert_abs_diff_eq!(DualState::new(0.01).lambda(), 0.01, epsilon = 1e-12);
        assert!(DualState { lambda_raw: -50.0 }.lambda() > 0.0);
    }

    #[test]
    fn full_scale_values() {
        let c = QrlConfig::full_scale();
        assert_eq!((c.epsilon, c.lambda_init, c.lr_lambda, c.lr_model), (0.25, 0.01, 0.3, 5e-4));
        assert_eq!((c.batch_size, c.total_steps), (4096, 500_000));
        assert_eq!((c.phi_offset, c.phi_beta, c.transition_loss_weight, c.goal_mix_prob), (500.0, 0.01, 75.0, 0.05));
    }
}
