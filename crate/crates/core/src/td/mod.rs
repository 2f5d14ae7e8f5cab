//! Temporal-difference baselines with hindsight goal relabeling.

mod learner;
mod relabel;
mod tabular;

pub use learner::{
    td_target, QHeadKind, QLearnConfig, QLearner, QNetwork, TdBatch, TdData, TdTraceRow,
};
pub use relabel::{relabel_goal, sample_horizon};
pub use tabular::{discounted_cost, tabular_td_fixed_point, TabularQ};
