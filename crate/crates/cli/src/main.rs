//! Benchmark CLI: train a single run, execute a sweep, or evaluate a
//! checkpoint deterministically.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ppox::harness::{self, PartialRunConfig, SweepFile};
use ppox::Algo;

#[derive(Parser)]
#[command(name = "ppox", version, about = "PPO with exploration bonuses on desk-scale control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and stream metrics to CSV.
    Train(TrainArgs),
    /// Run every config in a sweep file and print the summary table.
    Sweep(SweepArgs),
    /// Deterministic (sigma = 0) evaluation of a saved checkpoint.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Environment: pendulum, mountaincar, or pointtrap.
    #[arg(long)]
    env: Option<String>,
    /// Algorithm: ppo, icm-ppo, or iem-ppo.
    #[arg(long)]
    algo: Option<String>,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Total environment steps to train for.
    #[arg(long)]
    steps: Option<u64>,
    /// JSON config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    steps_per_iteration: Option<u64>,
    #[arg(long)]
    sigma_init: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    reward_low: Option<f64>,
    #[arg(long)]
    reward_high: Option<f64>,
    /// Uncertainty bonus coefficient (iem-ppo only).
    #[arg(long)]
    c1: Option<f64>,
    /// Curiosity bonus coefficient (icm-ppo only).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    bonus_offset: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep file with a `runs` array of run configs.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving one subdirectory per run plus summary.csv.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    /// Parallel runs; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    episodes: usize,
    /// Seed for the evaluation episode resets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Eval(args) => eval(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn train(args: TrainArgs) -> ppox::Result<()> {
    let mut partial = match &args.config {
        Some(path) => PartialRunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => PartialRunConfig::default(),
    };
    let flags = PartialRunConfig {
        env: args.env,
        algo: args.algo,
        seed: args.seed,
        total_env_steps: args.steps,
        steps_per_iteration: args.steps_per_iteration,
        sigma_init: args.sigma_init,
        sigma_min: args.sigma_min,
        reward_low: args.reward_low,
        reward_high: args.reward_high,
        c1: args.c1,
        beta: args.beta,
        n_max: args.n_max,
        bonus_offset: args.bonus_offset,
        out_dir: args.out,
        ..Default::default()
    };
    let coefficients_given =
        partial.sets_intrinsic_coefficients() || flags.sets_intrinsic_coefficients();
    partial.overlay(&flags);
    let cfg = partial.resolve()?;
    if cfg.algo == Algo::Ppo && coefficients_given {
        eprintln!("warning: --c1/--beta have no effect with --algo ppo; values ignored");
    }

    eprintln!(
        "training {} with {} for {} steps (seed {}) -> {}",
        cfg.env,
        cfg.algo,
        cfg.total_env_steps,
        cfg.seed,
        cfg.out_dir.display()
    );
    let result = harness::run(&cfg)?;
    let last = result.rows.last().expect("at least one iteration");
    println!(
        "done: {} iterations, {} env steps, final-100 mean return {:.2}, sigma {:.4}, {:.1}s",
        last.iter,
        last.steps,
        result.final_window_mean(harness::FINAL_WINDOW),
        result.final_sigma,
        result.wall_seconds
    );
    println!("metrics: {}", result.metrics_path.display());
    println!("checkpoint: {}", result.checkpoint_path.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> ppox::Result<()> {
    let file: SweepFile = serde_json::from_str(&std::fs::read_to_string(&args.config)?)
        .map_err(|e| ppox::Error::Parse(format!("sweep file: {e}")))?;
    if file.runs.is_empty() {
        return Err(ppox::Error::Config("sweep file has no runs".into()));
    }
    let mut configs = Vec::with_capacity(file.runs.len());
    for (i, partial) in file.runs.iter().enumerate() {
        let mut cfg = partial.resolve()?;
        if partial.out_dir.is_none() {
            cfg.out_dir = args.out.join(format!(
                "run{:02}-{}-{}-seed{}",
                i,
                cfg.env,
                cfg.algo.name(),
                cfg.seed
            ));
        }
        configs.push(cfg);
    }
    let jobs = args
        .jobs
        .or(file.jobs)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });

    let summary = harness::sweep(&configs, jobs)?;
    for entry in &summary.entries {
        match &entry.outcome {
            Ok(final_mean) => eprintln!(
                "run {}/{} seed {} -> final-100 mean {:.2} ({:.1}s)",
                entry.env, entry.algo, entry.seed, final_mean, entry.wall_seconds
            ),
            Err(msg) => eprintln!(
                "run {}/{} seed {} FAILED: {msg}",
                entry.env, entry.algo, entry.seed
            ),
        }
    }
    std::fs::create_dir_all(&args.out)?;
    let summary_path = args.out.join("summary.csv");
    std::fs::write(&summary_path, summary.to_csv())?;
    print!("{}", summary.to_csv());
    eprintln!("summary: {}", summary_path.display());
    Ok(())
}

fn eval(args: EvalArgs) -> ppox::Result<()> {
    let result = harness::eval_checkpoint(&args.checkpoint, args.episodes, args.seed)?;
    for (i, ret) in result.returns.iter().enumerate() {
        eprintln!("episode {i}: return {ret:.3}");
    }
    println!("mean return over {} episodes: {:.3}", result.returns.len(), result.mean_return);
    Ok(())
}
