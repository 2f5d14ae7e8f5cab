//! The steps behind each CLI command, usable without the CLI.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use qrl_core::env::{
    exhaustive_dataset, generate_dataset, goal_node, mdp_graph, DiscreteEnv, Obs, TransitionDataset,
};
use qrl_core::oracle::{dataset_graph, shortest_paths_to_set};
use qrl_core::qrl::{
    cost_to_go, evaluate_policy, neighborhood_half_width, nine_state_goals, EvalGoal, EvalReport,
    GoalPolicy, OraclePolicy, QrlTrainer,
};
use qrl_core::td::{QLearner, QNetwork, TdData};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algo, RunConfig};
use crate::format::{self, EnvTag, Model};
use crate::io;

/// Resolves relative artifact paths against a run directory.
#[derive(Clone, Debug)]
pub struct RunDir(pub PathBuf);

impl RunDir {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.0.join(rel)
    }

    /// Writes the resolved configuration before any work starts.
    pub fn echo_config(&self, command: &str, cfg: &RunConfig) -> Result<PathBuf> {
        let p = self.path(&format!("config.{command}.json"));
        io::write_json(&p, cfg)?;
        Ok(p)
    }
}

pub fn env_tag(env: &dyn DiscreteEnv) -> EnvTag {
    EnvTag {
        id: env.id().to_string(),
        resolution: env.resolution(),
    }
}

/// `top`, `9grid` (expands to nine point goals) or `state-<index>`.
pub fn parse_goals(specs: &[String], env: &dyn DiscreteEnv) -> Result<Vec<EvalGoal>> {
    let half_width = neighborhood_half_width(env.resolution());
    let mut goals = Vec::new();
    for spec in specs {
        match spec.as_str() {
            "top" => {
                ensure!(env.has_goal_token(), "goal `top` needs an environment with a goal set");
                goals.push(EvalGoal::TopOfHill);
            }
            "9grid" => goals.extend(nine_state_goals(env, half_width)),
            other => {
                let idx = other
                    .strip_prefix("state-")
                    .and_then(|s| s.parse::<usize>().ok())
                    .with_context(|| format!("invalid goal `{other}` (expected top, 9grid or state-<index>)"))?;
                ensure!(idx < env.num_states(), "goal state {idx} out of range");
                goals.push(EvalGoal::State { state: idx, half_width });
            }
        }
    }
    Ok(goals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub records: usize,
    pub real_records: usize,
    pub goal_records: usize,
    pub episodes: u32,
    /// Fraction of concrete states appearing as a record's start state.
    pub coverage: f64,
}

pub fn generate(cfg: &RunConfig, env: &dyn DiscreteEnv) -> Result<(TransitionDataset, DataSummary)> {
    let d = &cfg.data;
    let data = match d.policy.as_str() {
        "random" => generate_dataset(env, d.episodes, d.max_episode_len, d.seed, d.goal_edge_cost)?,
        "exhaustive" => exhaustive_dataset(env, d.goal_edge_cost)?,
        other => bail!("unknown data policy `{other}`"),
    };
    let summary = summarize(&data, env);
    Ok((data, summary))
}

pub fn summarize(data: &TransitionDataset, env: &dyn DiscreteEnv) -> DataSummary {
    let covered: BTreeSet<usize> = data.records.iter().filter_map(|r| env.state_of(&r.s)).collect();
    DataSummary {
        records: data.len(),
        real_records: data.real_count(),
        goal_records: data.goal_record_count(),
        episodes: data.episode_starts().len() as u32,
        coverage: covered.len() as f64 / env.num_states() as f64,
    }
}

pub fn load_dataset(path: &Path) -> Result<TransitionDataset> {
    let f = std::fs::File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    format::read_dataset(std::io::BufReader::new(f))
}

pub fn load_checkpoint(path: &Path, env: &dyn DiscreteEnv) -> Result<Model> {
    let bytes = std::fs::read(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    let (model, tag) = format::parse_checkpoint(&bytes)?;
    ensure!(
        tag == env_tag(env),
        "checkpoint was trained on {} at resolution {}, but the configuration selects {} at {}",
        tag.id,
        tag.resolution,
        env.id(),
        env.resolution()
    );
    Ok(model)
}

fn goal_obs(env: &dyn DiscreteEnv, goal: &EvalGoal) -> Obs {
    goal.observation(env)
}

/// True shortest-path cost from every concrete state to the goal (the
/// point goal itself for state goals) over the full dynamics.
pub fn oracle_values(env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<f64>> {
    let g = mdp_graph(env)?;
    let target = match goal {
        EvalGoal::TopOfHill => goal_node(env).context("environment has no goal token")?,
        EvalGoal::State { state, .. } => *state,
    };
    let mut d = shortest_paths_to_set(&g, &[target]);
    d.truncate(env.num_states());
    Ok(d)
}

/// Shortest-path cost using only transitions present in `data`; states the
/// dataset never visits are unreachable.
pub fn dataset_oracle_values(env: &dyn DiscreteEnv, data: &TransitionDataset, goal: &EvalGoal) -> Result<Vec<f64>> {
    let g = dataset_graph(data)?;
    let target = g.node_of(&goal_obs(env, goal));
    let dist = match target {
        Some(t) => shortest_paths_to_set(&g, &[t]),
        None => vec![f64::INFINITY; g.num_nodes()],
    };
    Ok((0..env.num_states())
        .map(|s| g.node_of(&env.observe(s)).map_or(f64::INFINITY, |n| dist[n]))
        .collect())
}

/// The model's cost-to-go estimate toward `goal` for every concrete state:
/// `d_θ(s, g)` for QRL critics and `-max_a Q(s, a; g)` for Q-learners.
pub fn model_values(model: &Model, env: &dyn DiscreteEnv, goal: &EvalGoal) -> Result<Vec<f64>> {
    let g = goal_obs(env, goal);
    Ok(match model {
        Model::Qrl(c) => cost_to_go(c, env, &g)?,
        Model::QLearning(q) => q.value_table(env, &g)?.into_iter().map(|v| -v).collect(),
    })
}

/// One trace line of either trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceLine {
    Qrl(qrl_core::qrl::TraceRow),
    QLearning(qrl_core::td::TdTraceRow),
}

/// Trains the configured algorithm, calling `on_log` at each log interval
/// with the rows so far and the current model.
pub fn train(
    cfg: &RunConfig,
    env: &dyn DiscreteEnv,
    data: &TransitionDataset,
    mut on_log: impl FnMut(&[TraceLine], &dyn Fn() -> Model) -> Result<()>,
) -> Result<(Model, Vec<TraceLine>)> {
    let mut rows = Vec::new();
    let mut hook_err = None;
    match cfg.algo {
        Algo::Qrl => {
            if cfg.qrl.goal_mix_prob > 0.0 && data.goal_record_count() == 0 {
                bail!("goal mixing needs goal-set coverage in the dataset");
            }
            let mut t = QrlTrainer::new(cfg.critic_spec(env), cfg.qrl.clone())?;
            t.run(data, |row, critic| {
                rows.push(TraceLine::Qrl(row.clone()));
                if hook_err.is_none() {
                    if let Err(e) = on_log(&rows, &|| Model::Qrl(critic.clone())) {
                        hook_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = hook_err {
                return Err(e);
            }
            Ok((Model::Qrl(t.into_critic()), rows))
        }
        Algo::Qlearn => {
            let net = match cfg.qlearn.head {
                qrl_core::td::QHeadKind::MonolithicMlp => {
                    QNetwork::monolithic(env.input_norm(), &cfg.q_mlp_hidden, env.num_actions(), cfg.qlearn.seed)?
                }
                qrl_core::td::QHeadKind::Quasimetric => QNetwork::quasimetric(cfg.critic_spec(env), cfg.qlearn.seed)?,
            };
            let td = TdData::new(data)?;
            let mut l = QLearner::new(net, cfg.qlearn.clone())?;
            l.run(&td, |row, net| {
                rows.push(TraceLine::QLearning(row.clone()));
                if hook_err.is_none() {
                    if let Err(e) = on_log(&rows, &|| Model::QLearning(net.clone())) {
                        hook_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = hook_err {
                return Err(e);
            }
            Ok((Model::QLearning(l.into_network()), rows))
        }
    }
}

impl GoalPolicy for Model {
    fn action_table(&self, env: &dyn DiscreteEnv, goal: &EvalGoal) -> qrl_core::Result<Vec<usize>> {
        match self {
            Model::Qrl(c) => c.action_table(env, goal),
            Model::QLearning(q) => q.action_table(env, goal),
        }
    }
}

/// Greedy evaluation of `policy` on each goal, goals in parallel.
pub fn evaluate(
    policy: &(dyn GoalPolicy + Sync),
    env: &(dyn DiscreteEnv + Sync),
    goals: &[EvalGoal],
    budget: u32,
) -> Result<EvalReport> {
    let parts: Vec<EvalReport> = goals
        .par_iter()
        .map(|g| evaluate_policy(policy, env, std::slice::from_ref(g), budget))
        .collect::<qrl_core::Result<_>>()?;
    Ok(EvalReport {
        budget,
        goals: parts.into_iter().flat_map(|r| r.goals).collect(),
    })
}

pub fn evaluate_oracle(env: &(dyn DiscreteEnv + Sync), goals: &[EvalGoal], budget: u32) -> Result<EvalReport> {
    evaluate(&OraclePolicy, env, goals, budget)
}

pub fn goal_file_name(prefix: &str, goal: &EvalGoal) -> String {
    format!("{prefix}_{}.csv", goal.name())
}

pub fn write_grid(path: &Path, env: &dyn DiscreteEnv, values: &[f64]) -> Result<()> {
    let mut buf = Vec::new();
    format::write_state_grid(&mut buf, env, values)?;
    io::write_atomic(path, &buf)
}
