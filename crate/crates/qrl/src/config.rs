//! Run configuration: presets, JSON config files and `--key value` overrides.

use anyhow::{anyhow, bail, Context, Result};
use qrl_core::env::{DiscreteEnv, GridWorld, MountainCar};
use qrl_core::quasimetric::{CriticSpec, HeadKind};
use qrl_core::qrl::QrlConfig;
use qrl_core::td::{QHeadKind, QLearnConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// `mountaincar` or `gridworld`.
    pub id: String,
    /// MountainCar bins per dimension.
    pub bins: usize,
    /// Open gridworld size.
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `random` rollouts or `exhaustive` (every state-action pair once).
    pub policy: String,
    pub episodes: u32,
    pub max_episode_len: u32,
    pub seed: u64,
    pub goal_edge_cost: f32,
    /// Dataset file, relative to the run directory.
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticConfig {
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub projector_hidden: Vec<usize>,
    pub components: usize,
    pub component_size: usize,
    pub transition_hidden: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// `top`, `9grid`, or `state-<index>`.
    pub goals: Vec<String>,
    pub budget: u32,
    /// Evaluate the full-dynamics oracle instead of the checkpoint.
    pub oracle_policy: bool,
    pub report: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Qrl,
    Qlearn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub env: EnvConfig,
    pub data: DataConfig,
    pub algo: Algo,
    pub critic: CriticConfig,
    pub qrl: QrlConfig,
    pub qlearn: QLearnConfig,
    /// Hidden widths of the monolithic Q network.
    pub q_mlp_hidden: Vec<usize>,
    pub eval: EvalConfig,
    pub checkpoint: String,
    pub trace: String,
}

impl RunConfig {
    /// Laptop-scale MountainCar.
    pub fn desk() -> Self {
        Self {
            preset: "desk".into(),
            env: EnvConfig {
                id: "mountaincar".into(),
                bins: 64,
                width: 8,
                height: 8,
            },
            data: DataConfig {
                policy: "random".into(),
                episodes: 330,
                max_episode_len: 200,
                seed: 1,
                goal_edge_cost: 0.25,
                path: "dataset.qrld".into(),
            },
            algo: Algo::Qrl,
            critic: CriticConfig {
                encoder_hidden: vec![128, 128],
                latent_dim: 64,
                projector_hidden: vec![128],
                components: 8,
                component_size: 16,
                transition_hidden: vec![128, 128],
            },
            qrl: QrlConfig::desk(),
            qlearn: QLearnConfig::desk(),
            q_mlp_hidden: vec![128, 128, 128],
            eval: EvalConfig {
                goals: vec!["top".into(), "9grid".into()],
                budget: 200,
                oracle_policy: false,
                report: "eval_report.json".into(),
            },
            checkpoint: "checkpoint.qrlc".into(),
            trace: "trace.jsonl".into(),
        }
    }

    /// Full-scale discretized MountainCar.
    pub fn paper_mountaincar() -> Self {
        let desk = Self::desk();
        Self {
            preset: "paper-mountaincar".into(),
            env: EnvConfig { bins: 160, ..desk.env },
            data: DataConfig {
                episodes: 1019,
                max_episode_len: 250,
                ..desk.data
            },
            critic: CriticConfig {
                encoder_hidden: vec![1024, 1024, 1024],
                latent_dim: 256,
                projector_hidden: vec![1024, 1024, 1024],
                components: 16,
                component_size: 32,
                transition_hidden: vec![1024, 1024, 1024],
            },
            qrl: QrlConfig::full_scale(),
            qlearn: QLearnConfig::full_scale(),
            q_mlp_hidden: vec![1024; 6],
            ..desk
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper-mountaincar" => Ok(Self::paper_mountaincar()),
            other => bail!("unknown preset `{other}` (expected `desk` or `paper-mountaincar`)"),
        }
    }

    /// Preset, then the config file (if any), then `--key value` overrides.
    pub fn resolve(preset: Option<&str>, file: Option<&Value>, overrides: &[(String, String)]) -> Result<Self> {
        let name = preset
            .map(str::to_string)
            .or_else(|| file.and_then(|f| f.get("preset")).and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| "desk".to_string());
        let mut value = serde_json::to_value(Self::preset(&name)?)?;
        if let Some(f) = file {
            merge(&mut value, f);
        }
        value["preset"] = Value::String(name);
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        let cfg: Self = serde_json::from_value(value).context("invalid run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.make_env()?;
        if !matches!(self.data.policy.as_str(), "random" | "exhaustive") {
            bail!("data.policy must be `random` or `exhaustive`");
        }
        Ok(())
    }

    pub fn make_env(&self) -> Result<Box<dyn DiscreteEnv + Send + Sync>> {
        Ok(match self.env.id.as_str() {
            "mountaincar" => Box::new(MountainCar::new(self.env.bins)?),
            "gridworld" => Box::new(GridWorld::open(self.env.width, self.env.height)?),
            other => bail!("unknown environment `{other}` (expected `mountaincar` or `gridworld`)"),
        })
    }

    pub fn critic_spec(&self, env: &dyn DiscreteEnv) -> CriticSpec {
        let c = &self.critic;
        CriticSpec {
            obs_dim: 3,
            input_norm: env.input_norm(),
            num_actions: env.num_actions(),
            encoder_hidden: c.encoder_hidden.clone(),
            latent_dim: c.latent_dim,
            projector_hidden: c.projector_hidden.clone(),
            head: HeadKind::Iqe {
                components: c.components,
                component_size: c.component_size,
            },
            transition_hidden: c.transition_hidden.clone(),
        }
    }

    pub fn qlearn_head(&self) -> QHeadKind {
        self.qlearn.head
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// Short aliases for frequently overridden keys.
fn alias(key: &str) -> &[&str] {
    match key {
        "env" => &["env.id"],
        "bins" => &["env.bins"],
        "episodes" => &["data.episodes"],
        "seed" => &["data.seed", "qrl.seed", "qlearn.seed"],
        "goals" | "goal" => &["eval.goals"],
        "budget" => &["eval.budget"],
        "steps" => &["qrl.total_steps", "qlearn.total_steps"],
        "batch" => &["qrl.batch_size", "qlearn.batch_size"],
        "head" => &["qlearn.head"],
        "epsilon" => &["qrl.epsilon"],
        "oracle_policy" => &["eval.oracle_policy"],
        _ => &[],
    }
}

fn parse_value(path: &str, raw: &str) -> Value {
    if path == "eval.goals" {
        return Value::Array(raw.split(',').map(|g| Value::String(g.trim().to_string())).collect());
    }
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn apply_override(value: &mut Value, key: &str, raw: &str) -> Result<()> {
    let key = key.replace('-', "_");
    let paths: Vec<String> = match alias(&key) {
        [] => vec![key.clone()],
        ps => ps.iter().map(|s| s.to_string()).collect(),
    };
    for path in paths {
        let mut slot = &mut *value;
        for part in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| anyhow!("unknown configuration key `{key}`"))?;
        }
        *slot = parse_value(&path, raw);
    }
    Ok(())
}

/// Splits `--key value` pairs; a flag followed by another flag (or nothing)
/// is read as `true`.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let Some(key) = args[i].strip_prefix("--") else {
            bail!("expected `--key value`, found `{}`", args[i]);
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
        } else if i + 1 < args.len() && !args[i + 1].starts_with("--") {
            out.push((key.to_string(), args[i + 1].clone()));
            i += 2;
        } else {
            out.push((key.to_string(), "true".to_string()));
            i += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn presets_resolve() {
        let d = RunConfig::resolve(None, None, &[]).unwrap();
        assert_eq!(d, RunConfig::desk());
        let p = RunConfig::resolve(Some("paper-mountaincar"), None, &[]).unwrap();
        assert_eq!(p.env.bins, 160);
        assert_eq!(p.qrl, QrlConfig::full_scale());
        assert!(RunConfig::resolve(Some("nope"), None, &[]).is_err());
    }

    #[test]
    fn overrides_and_aliases() {
        let c = RunConfig::resolve(
            None,
            None,
            &ov(&[("bins", "32"), ("seed", "7"), ("goals", "top,9grid"), ("qrl.epsilon", "0.1"), ("oracle-policy", "true")]),
        )
        .unwrap();
        assert_eq!(c.env.bins, 32);
        assert_eq!((c.data.seed, c.qrl.seed, c.qlearn.seed), (7, 7, 7));
        assert_eq!(c.eval.goals, vec!["top", "9grid"]);
        assert_eq!(c.qrl.epsilon, 0.1);
        assert!(c.eval.oracle_policy);
        assert!(RunConfig::resolve(None, None, &ov(&[("no_such_key", "1")])).is_err());
        assert!(RunConfig::resolve(None, None, &ov(&[("env", "atari")])).is_err());
    }

    #[test]
    fn config_file_merges_over_preset() {
        let f = serde_json::json!({"preset": "desk", "qrl": {"batch_size": 64}, "algo": "qlearn"});
        let c = RunConfig::resolve(None, Some(&f), &[]).unwrap();
        assert_eq!(c.qrl.batch_size, 64);
        assert_eq!(c.qrl.total_steps, QrlConfig::desk().total_steps);
        assert_eq!(c.algo, Algo::Qlearn);
        // The echo of a resolved config resolves to itself.
        let echo = serde_json::to_value(&c).unwrap();
        assert_eq!(RunConfig::resolve(None, Some(&echo), &[]).unwrap(), c);
    }

    #[test]
    fn override_parsing() {
        let args: Vec<String> = ["--bins", "64", "--oracle-policy", "--budget=200"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            parse_overrides(&args).unwrap(),
            ov(&[("bins", "64"), ("oracle-policy", "true"), ("budget", "200")])
        );
        assert!(parse_overrides(&["stray".to_string()]).is_err());
    }
}
