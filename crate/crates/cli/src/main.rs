//! `homflow`: catalog browsing, config validation and experiment runs.

mod config;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use homflow::catalog::{self, CatalogParams};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentConfig, SpaceConfig};
use crate::runner::Status;

#[derive(Parser)]
#[command(name = "homflow", version, about = "Ricci flow and curvature experiments on homogeneous spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Browse the built-in examples.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run the experiment(s) described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to outputs.dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for random initial metrics; overrides metric.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of sweep points run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Validate a config file without running it.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List entry names.
    List,
    /// Print an entry as JSON.
    Show {
        name: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Catalog { action } => report(catalog_cmd(action)),
        Command::Check { config } => report(check_cmd(&config)),
        Command::Run { config, out, seed, jobs } => match run_cmd(&config, out, seed, jobs) {
            Ok(status) => status.exit_code(),
            Err(e) => {
                eprintln!("error: {e:#}");
                Status::Failed.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}

fn report(r: Result<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            Status::Failed.exit_code()
        }
    }
}

fn catalog_cmd(action: CatalogAction) -> Result<()> {
    match action {
        CatalogAction::List => {
            for name in catalog::NAMES {
                let e = catalog::entry(name, CatalogParams::default())?;
                println!("{:<16} {}", e.name, e.description);
            }
        }
        CatalogAction::Show { name, lambda, lambda2 } => {
            let space = SpaceConfig { catalog: Some(name), inline: None, lambda, lambda2, h_basis: None }.resolve()?;
            println!("{}", serde_json::to_string_pretty(&runner::describe(&space))?);
        }
    }
    Ok(())
}

fn check_cmd(path: &Path) -> Result<()> {
    let cfg = config::load(path).context("stage config-parse")?;
    runner::validate(&cfg).context("stage config-validate")?;
    let n = cfg.expand().len();
    println!("ok: {} is valid ({n} experiment{})", path.display(), if n == 1 { "" } else { "s" });
    Ok(())
}

fn write_marker(out: &Path, stage: &str, error: &anyhow::Error) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("FAILED"), format!("stage: {stage}\nerror: {error:#}\n"))?;
    Ok(())
}

fn run_cmd(path: &Path, out: Option<PathBuf>, seed: Option<u64>, jobs: usize) -> Result<Status> {
    let parsed = config::load(path);
    let out = match (&out, &parsed) {
        (Some(o), _) => o.clone(),
        (None, Ok(c)) => c.outputs.dir.clone().map(PathBuf::from).ok_or_else(|| anyhow!("no --out and no outputs.dir"))?,
        (None, Err(_)) => return parsed.map(|_| Status::Failed).context("stage config-parse"),
    };
    let cfg: ExperimentConfig = match parsed {
        Ok(c) => c,
        Err(e) => {
            write_marker(&out, "config-parse", &e)?;
            eprintln!("error: stage config-parse: {e:#}");
            return Ok(Status::Failed);
        }
    };
    if let Err(e) = runner::validate(&cfg) {
        write_marker(&out, "config-validate", &e)?;
        eprintln!("error: stage config-validate: {e:#}");
        return Ok(Status::Failed);
    }
    let points = cfg.expand();
    if points.len() == 1 && points[0].0.is_none() {
        let s = runner::run_experiment(&points[0].1, &out, seed)?;
        print_status(None, &s);
        return Ok(s.status);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let results: Vec<(String, runner::Summary)> = pool.install(|| {
        points
            .par_iter()
            .map(|(label, c)| {
                let label = label.clone().unwrap_or_default();
                runner::run_experiment(c, &out.join(&label), seed).map(|s| (label, s))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut worst = Status::Ok;
    for (label, s) in &results {
        print_status(Some(label), s);
        worst = match (worst, s.status) {
            (Status::Failed, _) | (_, Status::Failed) => Status::Failed,
            (Status::ChecksFailed, _) | (_, Status::ChecksFailed) => Status::ChecksFailed,
            _ => Status::Ok,
        };
    }
    let index = json!({
        "schema_version": runner::SCHEMA_VERSION,
        "status": worst,
        "experiments": results.iter().map(|(l, s)| json!({ "dir": l, "status": s.status, "failed_stage": s.failed_stage })).collect::<Vec<_>>(),
    });
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&index)? + "\n")?;
    Ok(worst)
}

fn print_status(label: Option<&str>, s: &runner::Summary) {
    let prefix = label.map(|l| format!("[{l}] ")).unwrap_or_default();
    if let Some(stage) = &s.failed_stage {
        eprintln!("{prefix}failed at stage {stage}: {}", s.error.as_deref().unwrap_or(""));
        return;
    }
    for c in &s.checks {
        let status = match c.status {
            runner::CheckStatus::Pass => "PASS",
            runner::CheckStatus::Fail => "FAIL",
            runner::CheckStatus::Skipped => "SKIP",
        };
        let note = if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) };
        println!("{prefix}{status} {}{note}", c.name);
    }
    if let Some(f) = &s.flow {
        let ext = f.extinction_time.map(|t| format!(", extinction at t = {t:.10}")).unwrap_or_default();
        println!("{prefix}flow: {} samples to t = {}{ext}", f.samples, f.t_final);
    }
}
