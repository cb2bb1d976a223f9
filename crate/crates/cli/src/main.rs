//! Command-line entry points for the ranklab experiment pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ranklab::experiment::{
    evaluate_checkpoint, run_experiment, run_sweep, simulate_click_log, ExperimentConfig, Grid,
    RunReport,
};

#[derive(Parser)]
#[command(
    name = "ranklab",
    about = "Unbiased learning-to-rank experiments: simulate clicks, train, evaluate, sweep, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to an experiment config (JSON, schema version 1).
    #[arg(long)]
    config: PathBuf,
    /// Override config fields by dotted path, e.g. --set click_sim.eta=2.0
    #[arg(long = "set", value_name = "PATH=JSON")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).context("config is not valid JSON")?;
        for entry in &self.overrides {
            let (path, raw) = entry
                .split_once('=')
                .with_context(|| format!("override {entry:?} is not PATH=VALUE"))?;
            let parsed: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            set_path(&mut value, path, parsed)?;
        }
        let mut config: ExperimentConfig =
            serde_json::from_value(value).context("config does not match the schema")?;
        config.resolve().context("config failed validation")?;
        Ok(config)
    }
}

fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cursor = root;
    for (i, part) in parts.iter().enumerate() {
        let map = cursor
            .as_object_mut()
            .with_context(|| format!("{path}: not an object at {}", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cursor = map
            .get_mut(*part)
            .with_context(|| format!("{path}: missing key {part}"))?;
    }
    unreachable!("paths are nonempty")
}

#[derive(Subcommand)]
enum Command {
    /// Emit a click log (JSON lines) for the configured corpus.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of sessions to emit, spread round-robin over queries.
        #[arg(long)]
        sessions: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep the latent examination/relevance draws on each session.
        #[arg(long)]
        keep_latent: bool,
    },
    /// Run the configured method end to end and write all artifacts.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a stored checkpoint on the configured test split.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Write report.csv/report.json here instead of printing a summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per grid point and aggregate a sweep CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// JSON object mapping dotted config paths to value lists.
        #[arg(long)]
        grid: PathBuf,
        /// Output path of the aggregated CSV; defaults to <output_dir>/sweep.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a finished run, optionally testing against a baseline run.
    Report {
        /// Output directory of a finished run (contains report.json).
        #[arg(long)]
        dir: PathBuf,
        /// Output directory of a baseline run for significance testing.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Permutations for the randomization test.
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
        /// Seed for the randomization test.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_run_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("report.json");
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_summary(label: &str, report: &ranklab::eval::MetricsReport) {
    print!("{label}: map {:.4}", report.mean.map);
    for (k, v) in report.spec.ndcg_ks.iter().zip(&report.mean.ndcg) {
        print!("  ndcg@{k} {v:.4}");
    }
    for (k, v) in report.spec.err_ks.iter().zip(&report.mean.err) {
        print!("  err@{k} {v:.4}");
    }
    if let Some(mse) = report.propensity_mse {
        print!("  propensity_mse {mse:.6}");
    }
    println!();
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            sessions,
            out,
            keep_latent,
        } => {
            let config = config.load()?;
            let written = match out {
                Some(path) => {
                    let file = fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    simulate_click_log(&config, sessions, keep_latent, file)?
                }
                None => {
                    simulate_click_log(&config, sessions, keep_latent, std::io::stdout().lock())?
                }
            };
            eprintln!("wrote {written} sessions");
        }
        Command::Train { config } => {
            let config = config.load()?;
            let outcome = run_experiment(&config)?;
            print_summary(config.method.name(), &outcome.report);
            print_summary("initial_ranker", &outcome.initial_report);
            eprintln!("artifacts in {}", config.output_dir.display());
        }
        Command::Evaluate {
            config,
            checkpoint,
            out,
        } => {
            let config = config.load()?;
            let report = evaluate_checkpoint(&config, &checkpoint)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("report.csv"), report.to_csv())?;
                    fs::write(dir.join("report.json"), report.to_json()?)?;
                    eprintln!("reports in {}", dir.display());
                }
                None => print_summary("checkpoint", &report),
            }
        }
        Command::Sweep { config, grid, out } => {
            let config = config.load()?;
            let grid_text = fs::read_to_string(&grid)
                .with_context(|| format!("reading {}", grid.display()))?;
            let grid: Grid = serde_json::from_str(&grid_text)
                .context("grid must map dotted config paths to value arrays")?;
            let table = run_sweep(&config, &grid)?;
            let csv = table.to_csv();
            let path = out.unwrap_or_else(|| config.output_dir.join("sweep.csv"));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &csv)?;
            let failures = table.rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("{} points, {failures} failed, table in {}", table.rows.len(), path.display());
            if failures == table.rows.len() {
                bail!("every sweep point failed");
            }
        }
        Command::Report {
            dir,
            baseline,
            permutations,
            seed,
        } => {
            let run = load_run_report(&dir)?;
            print_summary(&run.method, &run.report);
            print_summary("initial_ranker", &run.initial_ranker);
            if let Some(baseline_dir) = baseline {
                let base = load_run_report(&baseline_dir)?;
                let significance =
                    run.report
                        .compare(&base.report, &base.method, permutations, seed)?;
                println!("significance vs {} ({permutations} permutations):", base.method);
                for (metric, p) in &significance.p_values {
                    println!("  {metric}: p = {p}");
                }
            }
        }
    }
    Ok(())
}
