//! Constrained quasimetric value learning.
//!
//! The critic maximizes a concave-transformed distance between random
//! states and goals while a Lagrange multiplier keeps the distance across
//! each observed transition at or below its cost:
//!
//! ```text
//! min_θ max_{λ≥0}  -E[φ(d(s, g))] + λ (E[relu(d(s, s') + r)²] - ε²) + w_T · L_transition
//! ```

mod config;
mod eval;
mod objective;
mod sampler;
mod trainer;

pub use config::{DualState, QrlConfig};
pub use eval::{
    cost_to_go, evaluate_policy, goal_distances, goal_reached, greedy_action, greedy_table,
    neighborhood_half_width, nine_state_goals, oracle_table, rollout_return, ConstantPolicy,
    EvalGoal, EvalReport, GoalPolicy, GoalReport, OraclePolicy,
};
pub use objective::{constraint_term, phi, phi_grad, pull_term, transition_loss, edge_overshoots};
pub use sampler::{sample_goals, sample_transitions};
pub use trainer::{loss_and_grads, train, LossParts, QrlBatch, QrlTrainer, TraceRow};
