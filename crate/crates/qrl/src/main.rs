use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anyhow::Context;
use qrl::config::{parse_overrides, RunConfig};
use qrl::pipeline::RunDir;
use qrl::{acceptance, commands, io};

#[derive(Parser)]
#[command(name = "qrl", version, about = "Quasimetric value learning on discretized control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config merged over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset: desk (default) or paper-mountaincar.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Directory for all inputs and outputs of a run.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Collect an offline dataset with the configured behavior policy.
    GenData(Extra),
    /// Exact shortest-path distances on the discretized dynamics.
    Oracle(Extra),
    /// Train QRL or the Q-learning baseline on the dataset.
    Train(Extra),
    /// Greedy-policy rollouts and normalized scores.
    Eval(Extra),
    /// Learned distance-to-goal grids.
    Heatmap(Extra),
    /// Run the acceptance criteria and write a JSON report.
    Acceptance {
        /// Comma-separated criterion ids, e.g. `A1,A3`; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(clap::Args)]
struct Extra {
    /// Config overrides as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn run(mut cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = std::env::var("QRL_NUM_THREADS").ok().and_then(|v| v.parse().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if let Command::Acceptance { only } = &cli.command {
        let ids: Vec<&str> = if only.is_empty() {
            acceptance::ALL.to_vec()
        } else {
            only.iter().map(String::as_str).collect()
        };
        let verdicts = acceptance::run(&ids, |v| println!("{}", v.line()))?;
        io::write_json(&cli.run_dir.join("acceptance.json"), &verdicts)?;
        let failed: Vec<&str> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id.as_str()).collect();
        anyhow::ensure!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
        return Ok(());
    }
    let (name, raw) = match &cli.command {
        Command::GenData(e) => ("gen-data", e.overrides.clone()),
        Command::Oracle(e) => ("oracle", e.overrides.clone()),
        Command::Train(e) => ("train", e.overrides.clone()),
        Command::Eval(e) => ("eval", e.overrides.clone()),
        Command::Heatmap(e) => ("heatmap", e.overrides.clone()),
        Command::Acceptance { .. } => unreachable!("handled above"),
    };
    // Global flags written after the subcommand land among the overrides.
    let mut overrides = Vec::new();
    for (k, v) in parse_overrides(&raw)? {
        match k.replace('-', "_").as_str() {
            "config" => cli.config = Some(v.into()),
            "preset" => cli.preset = Some(v),
            "run_dir" => cli.run_dir = v.into(),
            _ => overrides.push((k, v)),
        }
    }
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let cfg = RunConfig::resolve(cli.preset.as_deref(), file.as_ref(), &overrides)
        .with_context(|| format!("configuring `{name}`"))?;
    let dir = RunDir(cli.run_dir.clone());
    match cli.command {
        Command::GenData(_) => commands::gen_data(&cfg, &dir).map(|_| ()),
        Command::Oracle(_) => commands::oracle(&cfg, &dir),
        Command::Train(_) => commands::train(&cfg, &dir),
        Command::Eval(_) => commands::eval(&cfg, &dir),
        Command::Heatmap(_) => commands::heatmap(&cfg, &dir),
        Command::Acceptance { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
