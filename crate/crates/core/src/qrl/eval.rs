use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::env::{DiscreteEnv, Obs, GOAL_TOKEN};
use crate::error::{Error, Result};
use crate::oracle::{shortest_paths_to_set, DiscreteMdpGraph};
use crate::quasimetric::QuasimetricCritic;
use crate::{Matrix, Real};

use super::objective::obs_matrix;

/// An evaluation target.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvalGoal {
    /// The goal set, addressed through the goal token.
    TopOfHill,
    /// A concrete state; reached anywhere within `half_width` grid cells
    /// of it along both grid axes.
    State { state: usize, half_width: usize },
}

impl EvalGoal {
    pub fn name(&self) -> String {
        match self {
            EvalGoal::TopOfHill => "top".to_string(),
            EvalGoal::State { state, .. } => alloc::format!("state-{state}"),
        }
    }

    /// Observation handed to goal-conditioned models.
    pub fn observation(&self, env: &dyn DiscreteEnv) -> Obs {
        match *self {
            EvalGoal::TopOfHill => GOAL_TOKEN,
            EvalGoal::State { state, .. } => env.observe(state),
        }
    }

    pub fn validate(&self, env: &dyn DiscreteEnv) -> Result<()> {
        match *self {
            EvalGoal::TopOfHill if !env.has_goal_token() => {
                Err(Error::InvalidSpec("environment has no goal set"))
            }
            EvalGoal::State { state, .. } if state >= env.num_states() => {
                Err(Error::InvalidState(alloc::format!("goal state {state} out of range")))
            }
            _ => Ok(()),
        }
    }
}

pub fn goal_reached(env: &dyn DiscreteEnv, goal: &EvalGoal, state: usize) -> bool {
    match *goal {
        EvalGoal::TopOfHill => env.in_goal_set(state),
        EvalGoal::State { state: g, half_width } => {
            let (r, c) = env.grid_coords(state);
            let (gr, gc) = env.grid_coords(g);
            r.abs_diff(gr) <= half_width && c.abs_diff(gc) <= half_width
        }
    }
}

/// Anything that can pick an action for every state given a goal.
pub trait GoalPolicy {
    fn action_table(&self, env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<usize>>;
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        // Strict comparison keeps the smallest index among ties; NaN never wins.
        if v < best.1 || (i == 0 && !v.is_nan()) {
            best = (i, v);
        }
    }
    best.0
}

/// `argmin_a d^z(T(f(s), a), f(g))`, smallest index on ties.
pub fn greedy_action<T: Real>(critic: &QuasimetricCritic<T>, s: &Obs, g: &Obs) -> Result<usize> {
    let z = critic.encode(&obs_matrix(&[*s, *g]))?;
    let na = critic.spec().num_actions;
    let mut zs = Matrix::zeros(na, z.cols());
    for a in 0..na {
        zs.row_mut(a).copy_from_slice(z.row(0));
    }
    let actions: Vec<usize> = (0..na).collect();
    let zhat = critic.transition_batch(&zs, &actions)?;
    let p = critic.project(&Matrix::vstack(&[&zhat, &z.slice_rows(1, 2)])?)?;
    let pairs: Vec<_> = (0..na).map(|a| (a, na)).collect();
    let d = critic.head_distances(&p, &pairs)?;
    Ok(argmin_first(d.iter().map(|x| x.as_f64())))
}

/// Greedy actions for every concrete state of `env` toward `goal`.
pub fn greedy_table<T: Real>(critic: &QuasimetricCritic<T>, env: &dyn DiscreteEnv, goal: &Obs) -> Result<Vec<usize>> {
    let n = env.num_states();
    let na = critic.spec().num_actions;
    if na != env.num_actions() {
        return Err(Error::ShapeMismatch {
            context: "critic action count",
            expected: env.num_actions(),
            found: na,
        });
    }
    let obs: Vec<Obs> = (0..n).map(|s| env.observe(s)).chain(core::iter::once(*goal)).collect();
    let z = critic.encode(&obs_matrix(&obs))?;
    let zg = z.slice_rows(n, n + 1);
    let mut table = Vec::with_capacity(n);
    const CHUNK: usize = 1024;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let rows = (end - start) * na;
        let mut zs = Matrix::zeros(rows, z.cols());
        let mut actions = Vec::with_capacity(rows);
        for s in start..end {
            for a in 0..na {
                zs.row_mut((s - start) * na + a).copy_from_slice(z.row(s));
                actions.push(a);
            }
        }
        let zhat = critic.transition_batch(&zs, &actions)?;
        let p = critic.project(&Matrix::vstack(&[&zhat, &zg])?)?;
        let pairs: Vec<_> = (0..rows).map(|k| (k, rows)).collect();
        let d = critic.head_distances(&p, &pairs)?;
        for s in 0..end - start {
            table.push(argmin_first(d[s * na..(s + 1) * na].iter().map(|x| x.as_f64())));
        }
        start = end;
    }
    Ok(table)
}

/// `d_θ(s, g)` for every concrete state of `env`.
pub fn cost_to_go<T: Real>(critic: &QuasimetricCritic<T>, env: &dyn DiscreteEnv, goal: &Obs) -> Result<Vec<f64>> {
    let n = env.num_states();
    let obs: Vec<Obs> = (0..n).map(|s| env.observe(s)).collect();
    let goals = alloc::vec![*goal; n];
    Ok(critic
        .state_distances(&obs_matrix(&obs), &obs_matrix(&goals))?
        .into_iter()
        .map(|x| x.as_f64())
        .collect())
}

impl<T: Real> GoalPolicy for QuasimetricCritic<T> {
    fn action_table(&self, env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<usize>> {
        greedy_table(self, env, &goal.observation(env))
    }
}

/// Least number of steps from every concrete state into the goal region.
pub fn goal_distances(env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<f64>> {
    goal.validate(env)?;
    let n = env.num_states();
    let mut edges = Vec::with_capacity(n * env.num_actions());
    for s in 0..n {
        for a in 0..env.num_actions() {
            edges.push((s, env.step(s, a)?, 1.0));
        }
    }
    let graph = DiscreteMdpGraph::new(n, edges)?;
    let targets: Vec<usize> = (0..n).filter(|&s| goal_reached(env, goal, s)).collect();
    Ok(shortest_paths_to_set(&graph, &targets))
}

/// Full-dynamics optimal actions: descend the true distance to the goal
/// region, smallest index on ties.
pub fn oracle_table(env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<usize>> {
    let dist = goal_distances(env, goal)?;
    (0..env.num_states())
        .map(|s| {
            let next: Result<Vec<f64>> = (0..env.num_actions()).map(|a| Ok(dist[env.step(s, a)?])).collect();
            Ok(argmin_first(next?.into_iter()))
        })
        .collect()
}

/// The full-dynamics oracle as a policy.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePolicy;

impl GoalPolicy for OraclePolicy {
    fn action_table(&self, env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<usize>> {
        oracle_table(env, goal)
    }
}

/// A policy that always takes the same action.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub usize);

impl GoalPolicy for ConstantPolicy {
    fn action_table(&self, env: &dyn DiscreteEnv, _goal: &EvalGoal) -> Result<Vec<usize>> {
        Ok(alloc::vec![self.0; env.num_states()])
    }
}

/// Return of following `table` from `start`: `-t` for the first `t` at
/// which the goal region is reached, `-budget` if it never is.
pub fn rollout_return(env: &dyn DiscreteEnv, goal: &EvalGoal, table: &[usize], start: usize, budget: u32) -> Result<(f64, bool)> {
    let mut s = start;
    for t in 0..=budget {
        if goal_reached(env, goal, s) {
            return Ok((-(t as f64), true));
        }
        if t < budget {
            s = env.step(s, table[s])?;
        }
    }
    Ok((-(budget as f64), false))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GoalReport {
    pub name: String,
    pub mean_return: f64,
    pub oracle_return: f64,
    pub floor_return: f64,
    /// `100 (R - R_floor) / (R_oracle - R_floor)`.
    pub normalized_score: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub budget: u32,
    pub goals: Vec<GoalReport>,
}

fn mean_return(env: &dyn DiscreteEnv, goal: &EvalGoal, table: &[usize], budget: u32) -> Result<(f64, f64)> {
    let n = env.num_states();
    let (mut total, mut hits) = (0.0, 0usize);
    for s in 0..n {
        let (r, ok) = rollout_return(env, goal, table, s, budget)?;
        total += r;
        hits += usize::from(ok);
    }
    Ok((total / n as f64, hits as f64 / n as f64))
}

/// Greedy rollouts of `policy` from every concrete state for each goal,
/// scored against the full-dynamics oracle.
pub fn evaluate_policy(
    policy: &dyn GoalPolicy,
    env: &dyn DiscreteEnv,
    goals: &[EvalGoal],
    budget: u32,
) -> Result<EvalReport> {
    let floor = -(budget as f64);
    let mut out = Vec::with_capacity(goals.len());
    for goal in goals {
        goal.validate(env)?;
        let table = policy.action_table(env, goal)?;
        if table.len() != env.num_states() || table.iter().any(|&a| a >= env.num_actions()) {
            return Err(Error::InvalidSpec("policy produced an invalid action table"));
        }
        let (mean, success) = mean_return(env, goal, &table, budget)?;
        let (oracle, _) = mean_return(env, goal, &oracle_table(env, goal)?, budget)?;
        let normalized_score = if oracle > floor {
            100.0 * (mean - floor) / (oracle - floor)
        } else {
            0.0
        };
        out.push(GoalReport {
            name: goal.name(),
            mean_return: mean,
            oracle_return: oracle,
            floor_return: floor,
            normalized_score,
            success_rate: success,
        });
    }
    Ok(EvalReport { budget, goals: out })
}

/// Half-width of the point-goal neighborhood: 13 × 13 cells at 160 bins,
/// scaled with resolution and kept odd.
pub fn neighborhood_half_width(bins: usize) -> usize {
    let side = ((13.0 * bins as f64 / 160.0).round() as usize).max(1);
    let side = if side % 2 == 0 { side - 1 } else { side };
    side / 2
}

/// Nine point goals on a 3 × 3 lattice at a quarter, half and three
/// quarters of each grid axis.
pub fn nine_state_goals(env: &dyn DiscreteEnv, half_width: usize) -> Vec<EvalGoal> {
    let n = env.num_states();
    let (mut rows, mut cols) = (0, 0);
    for s in 0..n {
        let (r, c) = env.grid_coords(s);
        rows = rows.max(r + 1);
        cols = cols.max(c + 1);
    }
    let at = |len: usize, f: f64| ((len - 1) as f64 * f).round() as usize;
    let mut goals = Vec::with_capacity(9);
    for fr in [0.25, 0.5, 0.75] {
        for fc in [0.25, 0.5, 0.75] {
            let target = (at(rows, fr), at(cols, fc));
            if let Some(state) = (0..n).find(|&s| env.grid_coords(s) == target) {
                goals.push(EvalGoal::State { state, half_width });
            }
        }
    }
    goals
}
