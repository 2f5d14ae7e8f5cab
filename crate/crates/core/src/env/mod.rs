//! Deterministic benchmark MDPs and offline dataset generation.

mod dataset;
mod gridworld;
mod mountain_car;

pub use dataset::{
    exhaustive_dataset, generate_dataset, DatasetMeta, TransitionDataset, TransitionRecord,
    GOAL_ACTION,
};
pub use gridworld::{gridworld_step, GridWorld, GridWorldSpec};
pub use mountain_car::{
    discretize, discretize_value, in_goal_set, mountain_car_step, MountainCar, MountainCarState,
    POSITION_RANGE, VELOCITY_RANGE,
};

use alloc::vec::Vec;

use crate::error::Result;
use crate::nn::InputNorm;
use crate::oracle::DiscreteMdpGraph;

/// Augmented observation: two state coordinates plus a goal indicator.
pub type Obs = [f32; 3];

/// The abstract top-of-hill goal `G = (0.5, 0, 1)`.
pub const GOAL_TOKEN: Obs = [0.5, 0.0, 1.0];

/// A finite deterministic MDP with unit step cost.
///
/// Concrete states are indexed `0..num_states()`. Environments with a goal
/// set also expose the abstract goal token as node `num_states()`.
pub trait DiscreteEnv {
    fn id(&self) -> &'static str;
    /// Bins per dimension (MountainCar) or grid width (gridworld).
    fn resolution(&self) -> usize;
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn step(&self, state: usize, action: usize) -> Result<usize>;
    fn observe(&self, state: usize) -> Obs;
    /// Inverse of [`DiscreteEnv::observe`]; `None` for anything that is not
    /// a concrete state (including the goal token).
    fn state_of(&self, obs: &Obs) -> Option<usize>;
    fn in_goal_set(&self, _state: usize) -> bool {
        false
    }
    fn has_goal_token(&self) -> bool {
        false
    }
    /// Fixed affine input scaling for networks consuming observations.
    fn input_norm(&self) -> InputNorm {
        InputNorm::identity(3)
    }
    /// (row, column) placement of a state on a 2-D grid for heatmaps.
    fn grid_coords(&self, state: usize) -> (usize, usize);
}

/// Graph node index of the goal token, if any.
pub fn goal_node<E: DiscreteEnv + ?Sized>(env: &E) -> Option<usize> {
    env.has_goal_token().then(|| env.num_states())
}

/// Observation of a graph node (concrete state or goal token).
pub fn node_obs<E: DiscreteEnv + ?Sized>(env: &E, node: usize) -> Obs {
    if node == env.num_states() && env.has_goal_token() {
        GOAL_TOKEN
    } else {
        env.observe(node)
    }
}

/// Full dynamics graph: one unit-cost edge per (state, action), plus a
/// zero-cost edge from every goal-set state to the goal token.
pub fn mdp_graph<E: DiscreteEnv + ?Sized>(env: &E) -> Result<DiscreteMdpGraph> {
    let n = env.num_states();
    let nodes = n + usize::from(env.has_goal_token());
    let mut edges = Vec::with_capacity(n * env.num_actions() + 1);
    for s in 0..n {
        for a in 0..env.num_actions() {
            edges.push((s, env.step(s, a)?, 1.0));
        }
        if env.has_goal_token() && env.in_goal_set(s) {
            edges.push((s, n, 0.0));
        }
    }
    let labels = (0..nodes).map(|v| node_obs(env, v)).collect();
    DiscreteMdpGraph::with_labels(nodes, edges, labels)
}
