//! Thin CLI over the experiment commands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use springbok::config::{ExperimentConfig, Mode};
use springbok::env::Task;
use springbok::experiment;

#[derive(Parser)]
#[command(name = "springbok", version, about = "Gait synthesis, optimization and residual learning for a spring-legged quadruped simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Task to run.
    #[arg(long, value_parser = clap::value_parser!(Task))]
    task: Option<Task>,
    /// Controller variant.
    #[arg(long)]
    mode: Option<Mode>,
    /// Master seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Run one seed per value in `a..b` (half-open), sequentially.
    #[arg(long, conflicts_with = "seed")]
    seeds: Option<String>,
    /// Budget: trials for optimize, control steps for train.
    #[arg(long)]
    budget: Option<usize>,
    /// JSON config file; CLI flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output run directory.
    #[arg(long)]
    out: PathBuf,
    /// Allow reusing an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize gait parameters with the TPE and re-evaluate the top candidates.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Resume from an existing history.jsonl.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train the residual (or from-scratch) policy.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Gait parameter file from an optimize run (cpg-optimize / cpg-rl).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run deterministic evaluation episodes and write the metrics report.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Gait parameter file from an optimize run.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Policy checkpoint from a train run (cpg-rl / rl-scratch).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Export figure-ready CSV bundles from a finished run directory.
    ExportFigures {
        /// Run directory holding traces/ and/or history.jsonl.
        #[arg(long)]
        run: PathBuf,
        /// Output directory (defaults to <run>/figures).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_config(common: &CommonArgs, seed: Option<u64>, kind: BudgetKind) -> Result<ExperimentConfig, String> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => match common.task {
            Some(task) => ExperimentConfig::for_task(task),
            None => ExperimentConfig::default(),
        },
    };
    if let Some(task) = common.task {
        // Refresh task-dependent defaults only when no config file pins them.
        if common.config.is_none() {
            config = ExperimentConfig {
                task,
                ..ExperimentConfig::for_task(task)
            };
        } else {
            config.task = task;
        }
    }
    if let Some(mode) = common.mode {
        config.mode = mode;
    }
    if let Some(seed) = seed.or(common.seed) {
        config.seed = seed;
    }
    if let Some(budget) = common.budget {
        match kind {
            BudgetKind::Trials => config.trial_budget = budget,
            BudgetKind::ControlSteps => config.training_budget = budget,
            BudgetKind::Unused => {}
        }
    }
    Ok(config)
}

#[derive(Clone, Copy)]
enum BudgetKind {
    Trials,
    ControlSteps,
    Unused,
}

/// Parses `a..b` into the seed list `[a, b)`.
fn parse_seed_range(spec: &str) -> Result<Vec<u64>, String> {
    let (a, b) = spec
        .split_once("..")
        .ok_or_else(|| format!("--seeds expects `a..b`, got `{spec}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
    if b <= a {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok((a..b).collect())
}

fn seeds_of(common: &CommonArgs) -> Result<Vec<Option<u64>>, String> {
    match &common.seeds {
        Some(spec) => Ok(parse_seed_range(spec)?.into_iter().map(Some).collect()),
        None => Ok(vec![None]),
    }
}

/// Output directory per seed: the base dir, or `<base>-s<seed>` for sweeps.
fn out_for_seed(base: &PathBuf, seed: Option<u64>, sweep: bool) -> PathBuf {
    match (sweep, seed) {
        (true, Some(seed)) => {
            let name = format!(
                "{}-s{}",
                base.file_name().and_then(|s| s.to_str()).unwrap_or("run"),
                seed
            );
            base.with_file_name(name)
        }
        _ => base.clone(),
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Optimize { common, resume } => {
            let seeds = seeds_of(&common)?;
            let sweep = seeds.len() > 1;
            for seed in seeds {
                let config = build_config(&common, seed, BudgetKind::Trials)?;
                let out = out_for_seed(&common.out, seed.or(common.seed), sweep);
                let outputs = experiment::cmd_optimize(&config, &out, common.force, resume.as_deref())
                    .map_err(|e| e.to_string())?;
                let best = outputs
                    .history
                    .best()
                    .map(|t| t.objective)
                    .unwrap_or(f64::NAN);
                println!(
                    "optimize {} seed {}: {} trials, best objective {:.4}, best params -> {}",
                    config.task,
                    config.seed,
                    outputs.history.len(),
                    best,
                    experiment::RunDir::new(&out).best_params().display()
                );
            }
            Ok(())
        }
        Command::Train { common, params } => {
            let seeds = seeds_of(&common)?;
            let sweep = seeds.len() > 1;
            for seed in seeds {
                let config = build_config(&common, seed, BudgetKind::ControlSteps)?;
                let out = out_for_seed(&common.out, seed.or(common.seed), sweep);
                let outputs =
                    experiment::cmd_train(&config, params.as_deref(), &out, common.force)
                        .map_err(|e| e.to_string())?;
                println!(
                    "train {} {} seed {}: best eval return {:.4}, eval speed {:.3} m/s, report -> {}",
                    config.task,
                    config.mode,
                    config.seed,
                    outputs.best_eval_return,
                    outputs.report.mean_speed,
                    experiment::RunDir::new(&out).report().display()
                );
            }
            Ok(())
        }
        Command::Eval {
            common,
            params,
            checkpoint,
        } => {
            let seeds = seeds_of(&common)?;
            let sweep = seeds.len() > 1;
            for seed in seeds {
                let config = build_config(&common, seed, BudgetKind::Unused)?;
                let out = out_for_seed(&common.out, seed.or(common.seed), sweep);
                let report = experiment::cmd_eval(
                    &config,
                    params.as_deref(),
                    checkpoint.as_deref(),
                    &out,
                    common.force,
                )
                .map_err(|e| e.to_string())?;
                println!(
                    "eval {} {} seed {}: speed {:.3}±{:.3} m/s, R {:.2}±{:.2}, reward {:.3}, failures {}/{}",
                    report.task,
                    report.mode,
                    report.seed,
                    report.mean_speed,
                    report.speed_sd,
                    report.velocity_ratio_mean,
                    report.velocity_ratio_sd,
                    report.mean_reward,
                    report.failures,
                    report.episodes
                );
            }
            Ok(())
        }
        Command::ExportFigures { run, out } => {
            experiment::cmd_export_figures(&run, out.as_deref()).map_err(|e| e.to_string())?;
            println!("figures exported from {}", run.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
