//! End-to-end experiment commands: optimize, train, eval, export-figures.
//!
//! Every command owns one run directory. The config snapshot is written
//! before any computation starts so failed runs stay diagnosable, existing
//! run directories are never overwritten without `force`, and all randomness
//! flows from the single seed in the config, which makes reruns byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbo::{
    optimize, reevaluate_top_k, EvalOutcome, OptimizationHistory, RankedCandidate,
    TerminationReason,
};
use crate::config::{presets, ConfigError, ExperimentConfig, Mode};
use crate::cpg::CpgParams;
use crate::env::{episode_objective, EnvError, QuadrupedEnv, Task, ACT_DIM};
use crate::metrics::{self, PeakMode};
use crate::rl::checkpoint::{self, CheckpointError};
use crate::rl::{train, CurvePoint, ExplorationConfig, TqcLearner, TrainConfig, TrainError};
use crate::trace::{EpisodeTrace, TraceError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("run directory {0} already exists (pass --force to reuse it)")]
    RunDirExists(PathBuf),
    #[error("missing required artifact: {what} (expected at {path})")]
    MissingArtifact { what: &'static str, path: PathBuf },
    #[error("mode {mode} requires {what}")]
    ModeNeeds { mode: Mode, what: &'static str },
    #[error("I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Optimize(#[from] crate::bbo::OptimizeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("JSON failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("export found no inputs in {dir}: missing {missing:?}")]
    NothingToExport { dir: PathBuf, missing: Vec<String> },
}

/// File layout of one run directory.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path) -> Self {
        RunDir {
            root: root.to_path_buf(),
        }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn history(&self) -> PathBuf {
        self.root.join("history.jsonl")
    }

    pub fn optimization_csv(&self) -> PathBuf {
        self.root.join("optimization_history.csv")
    }

    pub fn best_params(&self) -> PathBuf {
        self.root.join("best_params.json")
    }

    pub fn reeval(&self) -> PathBuf {
        self.root.join("reeval.json")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint.bin")
    }

    pub fn best_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint_best.bin")
    }

    pub fn curve(&self) -> PathBuf {
        self.root.join("curve.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn traces(&self) -> PathBuf {
        self.root.join("traces")
    }

    pub fn figures(&self) -> PathBuf {
        self.root.join("figures")
    }

    /// Creates the run directory, refusing to reuse an existing one unless
    /// `force` is set; writes the config snapshot before anything else.
    pub fn prepare(&self, config: &ExperimentConfig, force: bool) -> Result<(), ExperimentError> {
        if self.root.exists() && self.config().exists() && !force {
            return Err(ExperimentError::RunDirExists(self.root.clone()));
        }
        fs::create_dir_all(&self.root)?;
        config.save(&self.config())?;
        Ok(())
    }
}

fn derive_seed(base: u64, stream: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

/// Outputs of an optimization run.
pub struct OptimizeOutputs {
    pub history: OptimizationHistory,
    pub ranked: Vec<RankedCandidate>,
    pub best: CpgParams,
}

/// Runs the optimizer for the configured budget, re-evaluates the top
/// candidates and writes `history.jsonl`, `optimization_history.csv`,
/// `reeval.json` and `best_params.json`.
pub fn cmd_optimize(
    config: &ExperimentConfig,
    out: &Path,
    force: bool,
    resume: Option<&Path>,
) -> Result<OptimizeOutputs, ExperimentError> {
    let run = RunDir::new(out);
    run.prepare(config, force)?;

    let mut env_config = config.env_config();
    env_config.control_mode = crate::env::ControlMode::Residual;
    let mut objective = episode_objective(&env_config, config.seed);

    let resumed = match resume {
        Some(path) if path.exists() => OptimizationHistory::load(path)
            .map_err(crate::bbo::OptimizeError::History)?,
        Some(path) => {
            return Err(ExperimentError::MissingArtifact {
                what: "resume history",
                path: path.to_path_buf(),
            })
        }
        None => OptimizationHistory::new(),
    };
    if resumed.is_empty() && run.history().exists() {
        // A fresh run must not append to stale history.
        fs::remove_file(run.history())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let history = optimize(
        &mut objective,
        &config.search_space,
        config.trial_budget,
        &config.tpe,
        &mut rng,
        Some(&run.history()),
        resumed,
    )?;

    let ranked = reevaluate_top_k(
        &history,
        config.top_k.min(history.successful().count()),
        config.reeval_episodes,
        &mut objective,
    )?;
    let best = ranked
        .first()
        .map(|c| c.params)
        .or_else(|| history.best().map(|t| t.params))
        .expect("optimization produced at least one successful trial");

    write_optimization_csv(&history, &run.optimization_csv())?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(run.reeval())?), &ranked)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(run.best_params())?), &best)?;
    Ok(OptimizeOutputs {
        history,
        ranked,
        best,
    })
}

fn write_optimization_csv(
    history: &OptimizationHistory,
    path: &Path,
) -> Result<(), ExperimentError> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "trial,objective,best_so_far,failed")?;
    let best = history.best_so_far();
    for (trial, running_best) in history.trials().iter().zip(best.iter()) {
        writeln!(
            file,
            "{},{},{},{}",
            trial.trial_id,
            trial.objective,
            running_best,
            u8::from(trial.failed)
        )?;
    }
    file.flush()?;
    Ok(())
}

/// Resolves the gait parameters for a mode.
pub fn resolve_params(
    mode: Mode,
    task: Task,
    params_file: Option<&Path>,
) -> Result<CpgParams, ExperimentError> {
    match mode {
        Mode::CpgHandtuned => Ok(presets::hand_tuned(task)),
        Mode::RlScratch => {
            if params_file.is_some() {
                eprintln!("note: --params is ignored in rl-scratch mode");
            }
            // The oscillators are bypassed; any valid parameters will do.
            Ok(presets::hand_tuned(task))
        }
        Mode::CpgOptimize | Mode::CpgRl => {
            let path = params_file.ok_or(ExperimentError::ModeNeeds {
                mode,
                what: "--params <best_params.json from an optimize run>",
            })?;
            if !path.exists() {
                return Err(ExperimentError::MissingArtifact {
                    what: "gait parameter file",
                    path: path.to_path_buf(),
                });
            }
            let text = fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

/// Outputs of a training run.
#[derive(Debug)]
pub struct TrainOutputs {
    pub curve: Vec<CurvePoint>,
    pub best_eval_return: f64,
    pub report: EvalReport,
}

/// Trains the residual (or from-scratch) policy and writes the checkpoints,
/// the learning curve and a final evaluation report.
pub fn cmd_train(
    config: &ExperimentConfig,
    params_file: Option<&Path>,
    out: &Path,
    force: bool,
) -> Result<TrainOutputs, ExperimentError> {
    let run = RunDir::new(out);
    run.prepare(config, force)?;

    let params = resolve_params(config.mode, config.task, params_file)?;
    let env_config = config.env_config();
    let mut env = QuadrupedEnv::new(env_config.clone(), params)?;
    let mut eval_env = QuadrupedEnv::new(env_config.clone(), params)?;
    let mut learner = TqcLearner::new(
        config.train.learner_config(config.mode),
        derive_seed(config.seed, 2),
    );

    let train_config = TrainConfig {
        budget: config.training_budget,
        gradient_steps: config.gradient_steps(),
        warmup_steps: config.train.warmup_steps,
        eval_every: config.train.eval_every,
        eval_episodes: config.train.eval_episodes,
        exploration: ExplorationConfig {
            noise_std: config.train.noise_std,
            smoothing: config.train.action_smoothing,
        },
        select_best: config.train.select_best,
    };
    let outcome = train(
        &mut env,
        &mut eval_env,
        &mut learner,
        &train_config,
        derive_seed(config.seed, 3),
    )?;

    // Final parameters, then the best-evaluation parameters.
    learner.restore_params(&outcome.final_params);
    checkpoint::save(&learner, &run.checkpoint())?;
    learner.restore_params(&outcome.best_params);
    checkpoint::save(&learner, &run.best_checkpoint())?;

    let mut file = BufWriter::new(File::create(run.curve())?);
    writeln!(file, "step,eval_return,eval_speed")?;
    for point in &outcome.curve {
        writeln!(file, "{},{},{}", point.step, point.eval_return, point.eval_speed)?;
    }
    file.flush()?;

    let report = evaluate(config, params, Some(&learner), &run)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(run.report())?), &report)?;
    Ok(TrainOutputs {
        curve: outcome.curve,
        best_eval_return: outcome.best_eval_return,
        report,
    })
}

/// Per-episode entry of an evaluation report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub speed: f64,
    pub total_reward: f64,
    pub velocity_ratio: Option<f64>,
    pub duration_s: f64,
    pub termination: TerminationReason,
    pub max_height: f64,
    pub drift_cost: f64,
    pub angular_velocity_cost: f64,
}

/// Evaluation summary over deterministic episodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub mode: Mode,
    pub seed: u64,
    pub episodes: usize,
    pub mean_speed: f64,
    pub speed_sd: f64,
    /// Mean/SD of the per-episode joint-to-motor peak velocity ratio.
    pub velocity_ratio_mean: f64,
    pub velocity_ratio_sd: f64,
    pub mean_reward: f64,
    pub drift_cost: f64,
    pub angular_velocity_cost: f64,
    pub max_height: f64,
    pub failures: usize,
    pub per_episode: Vec<EpisodeReport>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Runs the configured number of deterministic evaluation episodes and
/// writes one trace CSV per episode.
fn evaluate(
    config: &ExperimentConfig,
    params: CpgParams,
    learner: Option<&TqcLearner>,
    run: &RunDir,
) -> Result<EvalReport, ExperimentError> {
    fs::create_dir_all(run.traces())?;
    let env_config = config.env_config();
    let mut env = QuadrupedEnv::new(env_config.clone(), params)?;

    let mut per_episode = Vec::new();
    let mut speeds = Vec::new();
    let mut ratios = Vec::new();
    let mut rewards = Vec::new();
    let mut failures = 0;
    for episode in 0..config.eval_episodes {
        let seed = derive_seed(config.seed, 100 + episode as u64);
        let outcome = env.run_episode(seed, |obs, _| {
            let mut action = [0.0; ACT_DIM];
            if let Some(learner) = learner {
                for (slot, value) in action.iter_mut().zip(learner.mean_action(obs)) {
                    *slot = value;
                }
            }
            action
        })?;
        let trace = &outcome.trace;
        trace.write_csv(&run.traces().join(format!("eval_ep{episode}.csv")))?;

        let speed = outcome.mean_forward_speed();
        let ratio = metrics::mean_velocity_ratio(trace, PeakMode::Signed);
        let z0 = trace.trunk_position[0].z;
        let max_height = trace
            .trunk_position
            .iter()
            .map(|p| p.z - z0)
            .fold(f64::NEG_INFINITY, f64::max);
        let (x0, y0) = (trace.trunk_position[0].x, trace.trunk_position[0].y);
        let weights = config.weights;
        let mut drift_cost = 0.0;
        let mut angvel_cost = 0.0;
        for i in 0..trace.len() {
            let dx = trace.trunk_position[i].x - x0;
            let dy = trace.trunk_position[i].y - y0;
            drift_cost += weights.w3 * (dx * dx + dy * dy);
            let omega = trace.trunk_angular_velocity[i];
            angvel_cost += weights.w2 * (omega.x * omega.x + omega.z * omega.z);
        }
        if matches!(
            outcome.stats.termination,
            TerminationReason::Fell | TerminationReason::Diverged
        ) {
            failures += 1;
        }
        speeds.push(speed);
        rewards.push(outcome.total_reward);
        if let Some(r) = ratio {
            ratios.push(r);
        }
        per_episode.push(EpisodeReport {
            seed,
            speed,
            total_reward: outcome.total_reward,
            velocity_ratio: ratio,
            duration_s: outcome.stats.duration_s,
            termination: outcome.stats.termination,
            max_height,
            drift_cost,
            angular_velocity_cost: angvel_cost,
        });
    }

    let (mean_speed, speed_sd) = mean_sd(&speeds);
    let (ratio_mean, ratio_sd) = mean_sd(&ratios);
    let (mean_reward, _) = mean_sd(&rewards);
    let drift_cost = per_episode.iter().map(|e| e.drift_cost).sum::<f64>()
        / per_episode.len().max(1) as f64;
    let angular_velocity_cost = per_episode
        .iter()
        .map(|e| e.angular_velocity_cost)
        .sum::<f64>()
        / per_episode.len().max(1) as f64;
    let max_height = per_episode
        .iter()
        .map(|e| e.max_height)
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(EvalReport {
        task: config.task,
        mode: config.mode,
        seed: config.seed,
        episodes: config.eval_episodes,
        mean_speed,
        speed_sd,
        velocity_ratio_mean: ratio_mean,
        velocity_ratio_sd: ratio_sd,
        mean_reward,
        drift_cost,
        angular_velocity_cost,
        max_height,
        failures,
        per_episode,
    })
}

/// Evaluates a controller (per mode) and writes `report.json` plus traces.
pub fn cmd_eval(
    config: &ExperimentConfig,
    params_file: Option<&Path>,
    checkpoint_file: Option<&Path>,
    out: &Path,
    force: bool,
) -> Result<EvalReport, ExperimentError> {
    let run = RunDir::new(out);
    run.prepare(config, force)?;

    let params = resolve_params(config.mode, config.task, params_file)?;
    let learner = match config.mode {
        Mode::CpgHandtuned | Mode::CpgOptimize => None,
        Mode::CpgRl | Mode::RlScratch => {
            let path = checkpoint_file.ok_or(ExperimentError::ModeNeeds {
                mode: config.mode,
                what: "--checkpoint <file from a train run>",
            })?;
            if !path.exists() {
                return Err(ExperimentError::MissingArtifact {
                    what: "policy checkpoint",
                    path: path.to_path_buf(),
                });
            }
            let mut learner = TqcLearner::new(
                config.train.learner_config(config.mode),
                derive_seed(config.seed, 2),
            );
            checkpoint::load(&mut learner, path)?;
            Some(learner)
        }
    };

    let report = evaluate(config, params, learner.as_ref(), &run)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(run.report())?), &report)?;
    Ok(report)
}

/// Exports figure-ready CSV bundles from a finished run directory:
/// stance/swing interval lists, motor-vs-joint velocity series with peak
/// markers, energy series, and the optimization history when present.
pub fn cmd_export_figures(run_dir: &Path, out: Option<&Path>) -> Result<(), ExperimentError> {
    let run = RunDir::new(run_dir);
    let figures = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run.figures());

    let mut traces: Vec<PathBuf> = Vec::new();
    if run.traces().is_dir() {
        for entry in fs::read_dir(run.traces())? {
            let path = entry?.path();
            if path.extension().map(|e| e == "csv").unwrap_or(false) {
                traces.push(path);
            }
        }
        traces.sort();
    }
    let history_exists = run.history().exists();
    if traces.is_empty() && !history_exists {
        return Err(ExperimentError::NothingToExport {
            dir: run_dir.to_path_buf(),
            missing: vec!["traces/*.csv".to_string(), "history.jsonl".to_string()],
        });
    }
    fs::create_dir_all(&figures)?;

    // Model used only for energy constants; overrides live in config.json.
    let model = match ExperimentConfig::load(&run.config()) {
        Ok(config) => config.robot,
        Err(_) => crate::sim::RobotModel::default(),
    };

    for path in &traces {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("trace")
            .to_string();
        let trace = EpisodeTrace::read_csv(path)?;

        let pattern = metrics::extract_pattern(&trace);
        let mut file = BufWriter::new(File::create(figures.join(format!("pattern_{stem}.csv")))?);
        writeln!(file, "leg,phase,start,end")?;
        for (leg, intervals) in pattern.legs.iter().enumerate() {
            for interval in intervals {
                let phase = match interval.phase {
                    metrics::Phase::Stance => "stance",
                    metrics::Phase::Swing => "swing",
                };
                writeln!(
                    file,
                    "{},{},{},{}",
                    crate::cpg::LEG_NAMES[leg],
                    phase,
                    interval.start,
                    interval.end
                )?;
            }
        }
        file.flush()?;

        // Front-right leg motor vs joint velocities with peak markers.
        let mut file = BufWriter::new(File::create(figures.join(format!("velocity_{stem}.csv")))?);
        writeln!(file, "t,motor_hip,joint_hip,motor_knee,joint_knee")?;
        for i in 0..trace.len() {
            writeln!(
                file,
                "{},{},{},{},{}",
                trace.time[i],
                trace.motor_velocities[i][0],
                trace.joint_velocities[i][0],
                trace.motor_velocities[i][1],
                trace.joint_velocities[i][1]
            )?;
        }
        file.flush()?;

        let mut file = BufWriter::new(File::create(figures.join(format!("peaks_{stem}.csv")))?);
        writeln!(file, "joint,series,peak_time,peak_value")?;
        for (joint, label) in [(0usize, "hip"), (1usize, "knee")] {
            for (series, values) in [
                ("motor", &trace.motor_velocities),
                ("joint", &trace.joint_velocities),
            ] {
                let (mut best_t, mut best_v) = (trace.time[0], f64::NEG_INFINITY);
                for i in 0..trace.len() {
                    if values[i][joint] > best_v {
                        best_v = values[i][joint];
                        best_t = trace.time[i];
                    }
                }
                writeln!(file, "{label},{series},{best_t},{best_v}")?;
            }
        }
        file.flush()?;

        let energy = metrics::energies(&trace, &model);
        let mut file = BufWriter::new(File::create(figures.join(format!("energy_{stem}.csv")))?);
        writeln!(file, "t,spring,gravitational,kinetic")?;
        for i in 0..energy.time.len() {
            writeln!(
                file,
                "{},{},{},{}",
                energy.time[i], energy.spring[i], energy.gravitational[i], energy.kinetic[i]
            )?;
        }
        file.flush()?;
    }

    if history_exists {
        let history =
            OptimizationHistory::load(&run.history()).map_err(crate::bbo::OptimizeError::History)?;
        write_optimization_csv(&history, &figures.join("optimization_history.csv"))?;
    }
    Ok(())
}

/// Evaluates one open-loop episode; convenience for examples and tests.
pub fn open_loop_outcome(
    config: &ExperimentConfig,
    params: CpgParams,
    seed: u64,
) -> Result<EvalOutcome, ExperimentError> {
    let mut env = QuadrupedEnv::new(config.env_config(), params)?;
    Ok(env.run_open_loop(seed)?.into_eval(config.task))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config(task: Task) -> ExperimentConfig {
        let mut config = ExperimentConfig::for_task(task);
        config.trial_budget = 25;
        config.top_k = 2;
        config.reeval_episodes = 2;
        config.eval_episodes = 2;
        config.tpe.n_startup = 10;
        config
    }

    #[test]
    fn optimize_writes_the_documented_layout() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let config = tiny_config(Task::Trot);
        let outputs = cmd_optimize(&config, &out, false, None).unwrap();
        assert_eq!(outputs.history.len(), 25);
        assert_eq!(outputs.ranked.len(), 2);
        let run = RunDir::new(&out);
        assert!(run.config().exists());
        assert!(run.history().exists());
        assert!(run.optimization_csv().exists());
        assert!(run.best_params().exists());
        assert!(run.reeval().exists());
    }

    #[test]
    fn run_dir_is_not_overwritten_without_force() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let config = tiny_config(Task::Trot);
        cmd_optimize(&config, &out, false, None).unwrap();
        assert!(matches!(
            cmd_optimize(&config, &out, false, None),
            Err(ExperimentError::RunDirExists(_))
        ));
        // With force the run is redone from scratch.
        let outputs = cmd_optimize(&config, &out, true, None).unwrap();
        assert_eq!(outputs.history.len(), 25);
    }

    #[test]
    fn rerun_with_same_seed_is_byte_identical() {
        let dir = tempdir().unwrap();
        let config = tiny_config(Task::Trot);
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        cmd_optimize(&config, &out_a, false, None).unwrap();
        cmd_optimize(&config, &out_b, false, None).unwrap();
        let bytes_a = fs::read(RunDir::new(&out_a).history()).unwrap();
        let bytes_b = fs::read(RunDir::new(&out_b).history()).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let csv_a = fs::read(RunDir::new(&out_a).optimization_csv()).unwrap();
        let csv_b = fs::read(RunDir::new(&out_b).optimization_csv()).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn eval_open_loop_reports_speed_and_ratio() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("eval");
        let mut config = tiny_config(Task::Trot);
        config.mode = Mode::CpgHandtuned;
        let report = cmd_eval(&config, None, None, &out, false).unwrap();
        assert_eq!(report.episodes, 2);
        assert!(report.mean_speed.is_finite());
        assert!(report.velocity_ratio_mean > 0.0);
        assert!(RunDir::new(&out).report().exists());
        assert!(RunDir::new(&out).traces().join("eval_ep0.csv").exists());
    }

    #[test]
    fn train_requires_params_in_optimized_modes() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("train");
        let mut config = tiny_config(Task::Trot);
        config.mode = Mode::CpgRl;
        config.training_budget = 0;
        let err = cmd_train(&config, None, &out, false).unwrap_err();
        assert!(matches!(err, ExperimentError::ModeNeeds { .. }));
        let missing = dir.path().join("nope.json");
        let err = cmd_train(&config, Some(&missing), &out, true).unwrap_err();
        match err {
            ExperimentError::MissingArtifact { path, .. } => assert_eq!(path, missing),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn export_figures_from_an_eval_run() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("eval");
        let mut config = tiny_config(Task::Trot);
        config.mode = Mode::CpgHandtuned;
        cmd_eval(&config, None, None, &out, false).unwrap();
        cmd_export_figures(&out, None).unwrap();
        let figures = RunDir::new(&out).figures();
        assert!(figures.join("pattern_eval_ep0.csv").exists());
        assert!(figures.join("velocity_eval_ep0.csv").exists());
        assert!(figures.join("peaks_eval_ep0.csv").exists());
        assert!(figures.join("energy_eval_ep0.csv").exists());
    }

    #[test]
    fn export_from_an_empty_dir_lists_whats_missing() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("empty");
        fs::create_dir_all(&out).unwrap();
        let err = cmd_export_figures(&out, None).unwrap_err();
        assert!(matches!(err, ExperimentError::NothingToExport { .. }));
    }
}
