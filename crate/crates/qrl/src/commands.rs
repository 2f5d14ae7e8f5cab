//! CLI command implementations.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::format;
use crate::io;
use crate::pipeline::{self, RunDir};

#[derive(Serialize)]
struct OracleIndex {
    goal: String,
    full_dynamics: String,
    dataset: Option<String>,
}

pub fn gen_data(cfg: &RunConfig, dir: &RunDir) -> Result<PathBuf> {
    dir.echo_config("gen-data", cfg)?;
    let env = cfg.make_env()?;
    let (data, summary) = pipeline::generate(cfg, env.as_ref())?;
    let path = dir.path(&cfg.data.path);
    io::write_atomic(&path, &format::dataset_bytes(&data)?)?;
    io::write_json(&dir.path("dataset_summary.json"), &summary)?;
    println!(
        "wrote {} ({} records, {} goal records, coverage {:.3})",
        path.display(),
        summary.records,
        summary.goal_records,
        summary.coverage
    );
    Ok(path)
}

pub fn oracle(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    dir.echo_config("oracle", cfg)?;
    let env = cfg.make_env()?;
    let goals = pipeline::parse_goals(&cfg.eval.goals, env.as_ref())?;
    let data_path = dir.path(&cfg.data.path);
    let data = if data_path.exists() {
        Some(pipeline::load_dataset(&data_path)?)
    } else {
        None
    };
    let mut index = Vec::new();
    for g in &goals {
        let full = pipeline::oracle_values(env.as_ref(), g)?;
        let full_name = pipeline::goal_file_name("oracle", g);
        pipeline::write_grid(&dir.path(&full_name), env.as_ref(), &full)?;
        let ds_name = match &data {
            Some(d) => {
                let vals = pipeline::dataset_oracle_values(env.as_ref(), d, g)?;
                let name = pipeline::goal_file_name("oracle_dataset", g);
                pipeline::write_grid(&dir.path(&name), env.as_ref(), &vals)?;
                Some(name)
            }
            None => None,
        };
        index.push(OracleIndex {
            goal: g.name(),
            full_dynamics: full_name,
            dataset: ds_name,
        });
    }
    io::write_json(&dir.path("oracle_index.json"), &index)?;
    println!("wrote oracle grids for {} goals", index.len());
    Ok(())
}

pub fn train(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    dir.echo_config("train", cfg)?;
    let env = cfg.make_env()?;
    let data_path = dir.path(&cfg.data.path);
    if !data_path.exists() {
        bail!("dataset {} not found; run `qrl gen-data` first", data_path.display());
    }
    let data = pipeline::load_dataset(&data_path)?;
    if data.meta.env_id != env.id() || data.meta.resolution as usize != env.resolution() {
        bail!(
            "dataset was generated for {} at resolution {}, but the configuration selects {} at {}",
            data.meta.env_id,
            data.meta.resolution,
            env.id(),
            env.resolution()
        );
    }
    let trace_path = dir.path(&cfg.trace);
    let tag = pipeline::env_tag(env.as_ref());
    let (model, rows) = pipeline::train(cfg, env.as_ref(), &data, |rows, _| {
        if let Some(last) = rows.last() {
            eprintln!("{}", serde_json::to_string(last)?);
        }
        io::write_jsonl(&trace_path, rows)
    })?;
    io::write_jsonl(&trace_path, &rows)?;
    let ckpt = dir.path(&cfg.checkpoint);
    io::write_atomic(&ckpt, &format::checkpoint_bytes(&model, &tag)?)?;
    println!("wrote {} and {}", ckpt.display(), trace_path.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    dir.echo_config("eval", cfg)?;
    let env = cfg.make_env()?;
    let goals = pipeline::parse_goals(&cfg.eval.goals, env.as_ref())?;
    let report = if cfg.eval.oracle_policy {
        pipeline::evaluate_oracle(env.as_ref(), &goals, cfg.eval.budget)?
    } else {
        let model = pipeline::load_checkpoint(&dir.path(&cfg.checkpoint), env.as_ref())?;
        for g in &goals {
            let v = pipeline::model_values(&model, env.as_ref(), g)?;
            pipeline::write_grid(&dir.path(&pipeline::goal_file_name("value", g)), env.as_ref(), &v)?;
        }
        pipeline::evaluate(&model, env.as_ref(), &goals, cfg.eval.budget)?
    };
    io::write_json(&dir.path(&cfg.eval.report), &report)?;
    for g in &report.goals {
        println!(
            "{:<12} normalized {:>6.1}  return {:>8.2}  oracle {:>8.2}  success {:.3}",
            g.name, g.normalized_score, g.mean_return, g.oracle_return, g.success_rate
        );
    }
    Ok(())
}

pub fn heatmap(cfg: &RunConfig, dir: &RunDir) -> Result<()> {
    dir.echo_config("heatmap", cfg)?;
    let env = cfg.make_env()?;
    let goals = pipeline::parse_goals(&cfg.eval.goals, env.as_ref())?;
    let model = pipeline::load_checkpoint(&dir.path(&cfg.checkpoint), env.as_ref())
        .context("heatmap needs a trained checkpoint")?;
    for g in &goals {
        let v = pipeline::model_values(&model, env.as_ref(), g)?;
        let p = dir.path(&pipeline::goal_file_name("heatmap", g));
        pipeline::write_grid(&p, env.as_ref(), &v)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}
