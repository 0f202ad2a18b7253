//! Experiment configuration: modes, presets and the JSON config file format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbo::{SearchSpace, TpeConfig};
use crate::env::{ControlMode, CpgSettings, EnvConfig, EpisodeConfig, Task, TaskWeights};
use crate::rl::{AlphaMode, LearnerConfig};
use crate::sim::{ContactModel, RobotModel};
use crate::env::{ACT_DIM, OBS_DIM};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse failed: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Which pipeline stage / controller variant a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Open-loop gait with the shipped hand-tuned parameters.
    CpgHandtuned,
    /// Open-loop gait with parameters found by the optimizer.
    CpgOptimize,
    /// Learned residual offsets on top of the oscillator gait.
    CpgRl,
    /// Learning absolute foot targets from scratch.
    RlScratch,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::CpgHandtuned => "cpg-handtuned",
            Mode::CpgOptimize => "cpg-optimize",
            Mode::CpgRl => "cpg-rl",
            Mode::RlScratch => "rl-scratch",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cpg-handtuned" => Ok(Mode::CpgHandtuned),
            "cpg-optimize" => Ok(Mode::CpgOptimize),
            "cpg-rl" => Ok(Mode::CpgRl),
            "rl-scratch" => Ok(Mode::RlScratch),
            other => Err(format!(
                "unknown mode `{other}` (expected cpg-handtuned|cpg-optimize|cpg-rl|rl-scratch)"
            )),
        }
    }
}

/// Gait parameter presets.
pub mod presets {
    use crate::cpg::CpgParams;
    use crate::env::Task;
    use std::f64::consts::PI;

    /// The shipped hand-tuned gait baselines.
    ///
    /// Trot: 0.14 s swing, 0.18 s stance, 2.5 cm step. Pronk: 0.18 s swing,
    /// 0.15 s stance, zero step. Vertical amplitudes are modest so the gait
    /// is reliable rather than fast.
    pub fn hand_tuned(task: Task) -> CpgParams {
        match task {
            Task::Trot => CpgParams {
                clearance: 0.02,
                penetration: 0.005,
                step_length: 0.025,
                omega_swing: PI / 0.14,
                omega_stance: PI / 0.18,
            },
            Task::Pronk => CpgParams {
                clearance: 0.025,
                penetration: 0.01,
                step_length: 0.0,
                omega_swing: PI / 0.18,
                omega_stance: PI / 0.15,
            },
        }
    }
}

/// Learner and training-loop knobs exposed in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub warmup_steps: usize,
    /// Deterministic evaluation cadence in control steps.
    pub eval_every: usize,
    /// Episodes per deterministic evaluation.
    pub eval_episodes: usize,
    /// Exploration noise std applied to the pre-squash mean.
    pub noise_std: f64,
    /// First-order smoothing factor on executed actions.
    pub action_smoothing: f64,
    /// Residual offset bound Δ_max, meters.
    pub action_limit: f64,
    /// Keep the checkpoint with the best deterministic evaluation.
    pub select_best: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hidden: vec![64, 64],
            gamma: 0.98,
            batch_size: 256,
            learning_rate: 3e-4,
            replay_capacity: 100_000,
            warmup_steps: 1_000,
            eval_every: 3_000,
            eval_episodes: 3,
            noise_std: 0.3,
            action_smoothing: 0.6,
            action_limit: 0.02,
            select_best: true,
        }
    }
}

impl TrainSettings {
    /// Learner config for the given mode. From-scratch mode uses normalized
    /// absolute targets, so its action limit is 1.
    pub fn learner_config(&self, mode: Mode) -> LearnerConfig {
        LearnerConfig {
            obs_dim: OBS_DIM,
            act_dim: ACT_DIM,
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            batch_size: self.batch_size,
            actor_lr: self.learning_rate,
            critic_lr: self.learning_rate,
            alpha_lr: self.learning_rate,
            replay_capacity: self.replay_capacity,
            alpha: AlphaMode::Auto { init: 0.1 },
            action_limit: match mode {
                Mode::RlScratch => 1.0,
                _ => self.action_limit,
            },
            ..LearnerConfig::default()
        }
    }
}

/// One experiment run, serializable as the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub mode: Mode,
    pub seed: u64,
    /// Optimization budget in trials.
    pub trial_budget: usize,
    /// Training budget in control steps.
    pub training_budget: usize,
    /// Candidates re-evaluated after optimization.
    pub top_k: usize,
    /// Episodes per re-evaluated candidate.
    pub reeval_episodes: usize,
    /// Episodes per final evaluation report.
    pub eval_episodes: usize,
    pub robot: RobotModel,
    pub contact: ContactModel,
    pub episode: EpisodeConfig,
    pub weights: TaskWeights,
    pub cpg: CpgSettings,
    pub search_space: SearchSpace,
    pub tpe: TpeConfig,
    pub train: TrainSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Trot,
            mode: Mode::CpgOptimize,
            seed: 0,
            trial_budget: 250,
            training_budget: 60_000,
            top_k: 5,
            reeval_episodes: 5,
            eval_episodes: 5,
            robot: RobotModel::default(),
            contact: ContactModel::default(),
            episode: EpisodeConfig::default(),
            weights: TaskWeights::default(),
            cpg: CpgSettings::default(),
            search_space: SearchSpace::default(),
            tpe: TpeConfig::default(),
            train: TrainSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults matching the usual budgets per task (250 trot / 160 pronk trials).
    pub fn for_task(task: Task) -> Self {
        ExperimentConfig {
            task,
            trial_budget: match task {
                Task::Trot => 250,
                Task::Pronk => 160,
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Environment configuration for this experiment.
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            task: self.task,
            robot: self.robot.clone(),
            contact: self.contact,
            episode: self.episode.clone(),
            weights: self.weights,
            cpg: self.cpg,
            control_mode: match self.mode {
                Mode::RlScratch => ControlMode::AbsoluteTargets,
                _ => ControlMode::Residual,
            },
            action_limit: self.train.action_limit,
        }
    }

    /// Gradient steps per control step: 10 when learning from scratch.
    pub fn gradient_steps(&self) -> usize {
        match self.mode {
            Mode::RlScratch => 10,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn config_json_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut config = ExperimentConfig::for_task(Task::Pronk);
        config.seed = 99;
        config.mode = Mode::CpgRl;
        config.save(&path).unwrap();
        let loaded = ExperimentConfig::load(&path).unwrap();
        assert_eq!(loaded, config);
        assert_eq!(loaded.trial_budget, 160);
    }

    #[test]
    fn partial_config_files_use_defaults() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("partial.json");
        std::fs::write(&path, r#"{"task": "pronk", "seed": 7}"#).unwrap();
        let loaded = ExperimentConfig::load(&path).unwrap();
        assert_eq!(loaded.task, Task::Pronk);
        assert_eq!(loaded.seed, 7);
        assert_eq!(loaded.trial_budget, 250);
    }

    #[test]
    fn hand_tuned_presets_match_their_documented_timings() {
        let trot = presets::hand_tuned(Task::Trot);
        assert!((trot.swing_duration() - 0.14).abs() < 1e-12);
        assert!((trot.stance_duration() - 0.18).abs() < 1e-12);
        assert!((trot.step_length - 0.025).abs() < 1e-15);
        let pronk = presets::hand_tuned(Task::Pronk);
        assert!((pronk.swing_duration() - 0.18).abs() < 1e-12);
        assert!((pronk.stance_duration() - 0.15).abs() < 1e-12);
        assert_eq!(pronk.step_length, 0.0);
    }

    #[test]
    fn scratch_mode_extends_the_action_space() {
        let settings = TrainSettings::default();
        assert_eq!(settings.learner_config(Mode::CpgRl).action_limit, 0.02);
        assert_eq!(settings.learner_config(Mode::RlScratch).action_limit, 1.0);
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [Mode::CpgHandtuned, Mode::CpgOptimize, Mode::CpgRl, Mode::RlScratch] {
            assert_eq!(mode.to_string().parse::<Mode>().unwrap(), mode);
        }
        assert!("sim-to-real".parse::<Mode>().is_err());
    }
}
