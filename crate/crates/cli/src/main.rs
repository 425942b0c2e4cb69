use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use frost_hollow::harness::aggregate::Summary;
use frost_hollow::harness::export::{self, compute_metrics, read_metrics, read_trial_logs, write_metrics, write_summary};
use frost_hollow::harness::{parse_cells, run_experiment, summarize, ExperimentConfig};
use frost_hollow::Error;
use frost_hollow_cli::serve::{serve, ServerState};
use tracing_subscriber::EnvFilter;

/// Name of the config snapshot written next to run outputs.
const CONFIG_SNAPSHOT: &str = "config.toml";

#[derive(Parser)]
#[command(name = "frost-hollow", version, about = "Frost Hollow simulator, experiment harness and live session server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the condition grid and write logs, metrics and a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated COND:AGENT cells, e.g. fixed:tct,random:none.
        #[arg(long)]
        cells: Option<String>,
        #[arg(long)]
        sessions: Option<u32>,
        /// Base seed for per-trial seed derivation.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute per-trial and per-pulse metric tables from trial logs.
    Metrics {
        #[arg(long)]
        logs: PathBuf,
        /// Defaults to the parent of the logs directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to config.toml next to the logs directory, if present.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Aggregate metric tables into means with bootstrap confidence intervals.
    Summarize {
        #[arg(long)]
        metrics: PathBuf,
        /// Defaults to the metrics directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Host live sessions over a websocket at /ws.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8125")]
        bind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for per-session trial logs.
        #[arg(long, default_value = "sessions")]
        log_dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn print_summary(summary: &Summary) {
    println!("{:<10} {:<6} {:<22} {:>5} {:>10} {:>10} {:>10}", "condition", "agent", "metric", "n", "mean", "ci_lo", "ci_hi");
    for c in &summary.cells {
        let e = &c.estimate;
        println!(
            "{:<10} {:<6} {:<22} {:>5} {:>10.4} {:>10.4} {:>10.4}",
            c.condition.to_string(),
            c.agent.to_string(),
            c.metric,
            e.n,
            e.mean,
            e.ci_lo,
            e.ci_hi
        );
    }
}

fn run(
    config: Option<PathBuf>,
    cells: Option<String>,
    sessions: Option<u32>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(n) = sessions {
        cfg.sessions = n;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    let cells = match cells {
        Some(list) => parse_cells(&list)?,
        None => cfg.cells(),
    };
    let out_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let snapshot = out_dir.join(CONFIG_SNAPSHOT);
    std::fs::write(&snapshot, cfg.to_toml_string()).with_context(|| format!("writing {}", snapshot.display()))?;

    let mut logs = Vec::new();
    let mut clean = true;
    for (id, result) in run_experiment(&cfg, &cells) {
        match result {
            Ok(log) => logs.push(log),
            Err(Error::Diverged { step, source, partial }) => {
                clean = false;
                tracing::error!(?id, step, "trial diverged: {source}");
                logs.extend(partial.map(|b| *b));
            }
            Err(e) => {
                clean = false;
                tracing::error!(?id, "trial failed: {e}");
            }
        }
    }
    let files = export::export(&logs, &cfg.sim, &out_dir)?;
    println!("{} trial logs, {} files written to {}", logs.len(), files.len(), out_dir.display());
    let (_, summary) = export::read_summary(&out_dir)?;
    print_summary(&summary);
    Ok(clean)
}

fn metrics(logs: PathBuf, out: Option<PathBuf>, config: Option<PathBuf>) -> anyhow::Result<bool> {
    let parent = logs.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = config.or_else(|| Some(parent.join(CONFIG_SNAPSHOT)).filter(|p| p.exists()));
    let cfg = load_config(config.as_deref())?;
    let trial_logs = read_trial_logs(&logs)?;
    let tables = compute_metrics(&trial_logs, &cfg.sim);
    if tables.config_hash != cfg.hash() && !trial_logs.is_empty() {
        tracing::warn!(logs = %tables.config_hash, config = %cfg.hash(), "log config hash differs from the metrics config");
    }
    let out = out.unwrap_or(parent);
    let files = write_metrics(&out, &tables)?;
    println!("{} trials, {} pulses", tables.trials.len(), tables.pulses.len());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn summarize_cmd(metrics_dir: PathBuf, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let tables = read_metrics(&metrics_dir)?;
    let summary = summarize(&tables.trials, &tables.pulses);
    let path = write_summary(&out.unwrap_or(metrics_dir), &tables.config_hash, &summary)?;
    print_summary(&summary);
    println!("wrote {}", path.display());
    Ok(true)
}

async fn serve_cmd(bind: String, config: Option<PathBuf>, log_dir: PathBuf) -> anyhow::Result<bool> {
    let cfg = load_config(config.as_deref())?;
    cfg.validate()?;
    std::fs::create_dir_all(&log_dir).with_context(|| format!("creating {}", log_dir.display()))?;
    let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
    let addr = listener.local_addr()?;
    println!("listening on ws://{addr}/ws");
    serve(listener, ServerState::new(cfg, Some(log_dir))).await.context("server stopped")?;
    Ok(true)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, cells, sessions, seed, out } => run(config, cells, sessions, seed, out),
        Command::Metrics { logs, out, config } => metrics(logs, out, config),
        Command::Summarize { metrics, out } => summarize_cmd(metrics, out),
        Command::Serve { bind, config, log_dir } => tokio::runtime::Runtime::new()
            .context("starting tokio runtime")
            .and_then(|rt| rt.block_on(serve_cmd(bind, config, log_dir))),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
