use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use sgdlab_cli::config::{ExperimentConfig, ExperimentKind};
use sgdlab_cli::experiments::render_experiment;

#[derive(Parser)]
#[command(
    name = "sgdlab",
    version,
    about = "Last-iterate SGD risk laboratory: schedules, exact oracle, Monte Carlo, bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted (overrides the config's output_path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo runs override.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Stepsize value per step for each configured schedule.
    #[command(name = "schedule_trace")]
    ScheduleTrace(RunArgs),
    /// Exact per-step bias/variance/risk trajectories.
    #[command(name = "exact_curve")]
    ExactCurve(RunArgs),
    /// Monte-Carlo risk estimates over the gamma0 grid and N list.
    #[command(name = "mc_sweep")]
    McSweep(RunArgs),
    /// Bound reports (JSON) over the gamma0 grid and N list.
    #[command(name = "bounds_table")]
    BoundsTable(RunArgs),
    /// Six-panel benchmark (d = 256): grid-best risk per variant and N.
    #[command(name = "fig2")]
    Fig2(RunArgs),
    /// Exact risk vs N under the tuned schedule, with a log2-log2 rate fit.
    #[command(name = "rates")]
    Rates(RunArgs),
    /// Comparison ratio R(N) plus exact risks of both decay schedules.
    #[command(name = "compare")]
    Compare(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::ScheduleTrace(a) => (ExperimentKind::ScheduleTrace, a),
            Command::ExactCurve(a) => (ExperimentKind::ExactCurve, a),
            Command::McSweep(a) => (ExperimentKind::McSweep, a),
            Command::BoundsTable(a) => (ExperimentKind::BoundsTable, a),
            Command::Fig2(a) => (ExperimentKind::Fig2, a),
            Command::Rates(a) => (ExperimentKind::Rates, a),
            Command::Compare(a) => (ExperimentKind::Compare, a),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = cli.command.split();
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentConfig::default_for(kind)
            .ok_or_else(|| anyhow!("--config is required for {}", kind.name()))?,
    };
    if let Some(seed) = args.seed {
        cfg.sim.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.sim.runs = runs;
    }

    let bytes = match args.threads {
        Some(threads) if threads > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building thread pool")?
            .install(|| render_experiment(kind, &cfg)),
        _ => render_experiment(kind, &cfg),
    }?;

    match args.out.or(cfg.output_path) {
        Some(path) => {
            fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
