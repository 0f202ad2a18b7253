//! Training loop: environment interaction at the control rate interleaved
//! with gradient steps, periodic deterministic evaluations and best-policy
//! checkpoint selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::learner::{LearnerError, TqcLearner};
use super::replay::Transition;
use crate::bbo::TerminationReason;
use crate::env::{EnvError, QuadrupedEnv, SmoothedExploration, ACT_DIM};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Exploration applied during training rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    /// Gaussian noise std on the pre-squash mean.
    pub noise_std: f64,
    /// First-order low-pass factor on executed actions.
    pub smoothing: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            noise_std: 0.3,
            smoothing: 0.6,
        }
    }
}

/// Training-loop parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Budget in control steps.
    pub budget: usize,
    /// Gradient steps per control step.
    pub gradient_steps: usize,
    /// Control steps before learning starts.
    pub warmup_steps: usize,
    /// Deterministic evaluation cadence, in control steps.
    pub eval_every: usize,
    /// Episodes per evaluation.
    pub eval_episodes: usize,
    pub exploration: ExplorationConfig,
    /// Keep the parameters with the best evaluation return.
    pub select_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            budget: 60_000,
            gradient_steps: 1,
            warmup_steps: 1_000,
            eval_every: 3_000,
            eval_episodes: 3,
            exploration: ExplorationConfig::default(),
            select_best: true,
        }
    }
}

/// One point of the learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean episode return of the deterministic policy.
    pub eval_return: f64,
    /// Mean forward speed of the deterministic policy, m/s.
    pub eval_speed: f64,
}

/// Result of a training run.
pub struct TrainOutcome {
    pub curve: Vec<CurvePoint>,
    /// Learner parameters at the end of training.
    pub final_params: Vec<f64>,
    /// Learner parameters at the best evaluation (equals `final_params` when
    /// `select_best` is off).
    pub best_params: Vec<f64>,
    pub best_eval_return: f64,
    /// Episodes started during training.
    pub episodes: usize,
    /// Training steps actually executed.
    pub steps: usize,
}

/// Deterministic evaluation of the current policy mean.
pub fn evaluate_policy(
    eval_env: &mut QuadrupedEnv,
    learner: &TqcLearner,
    episodes: usize,
    seed_base: u64,
) -> Result<(f64, f64), EnvError> {
    let mut total_return = 0.0;
    let mut total_speed = 0.0;
    for episode in 0..episodes {
        let outcome = eval_env.run_episode(seed_base + episode as u64, |obs, _| {
            let mut action = [0.0; ACT_DIM];
            for (slot, value) in action.iter_mut().zip(learner.mean_action(obs)) {
                *slot = value;
            }
            action
        })?;
        total_return += outcome.total_reward;
        total_speed += outcome.mean_forward_speed();
    }
    Ok((
        total_return / episodes as f64,
        total_speed / episodes as f64,
    ))
}

/// Trains the learner in the environment.
///
/// The loop alternates one control tick with `gradient_steps` learner
/// updates (after warmup), records a deterministic evaluation every
/// `eval_every` steps (including one before training), and tracks the
/// best-evaluated parameters. A zero budget returns the untrained policy,
/// whose mean action is exactly zero.
pub fn train(
    env: &mut QuadrupedEnv,
    eval_env: &mut QuadrupedEnv,
    learner: &mut TqcLearner,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut curve = Vec::new();
    let mut episodes = 0;

    let record_eval = |step: usize,
                           learner: &TqcLearner,
                           eval_env: &mut QuadrupedEnv,
                           curve: &mut Vec<CurvePoint>|
     -> Result<CurvePoint, TrainError> {
        let (eval_return, eval_speed) =
            evaluate_policy(eval_env, learner, config.eval_episodes.max(1), seed ^ 0x5eed)?;
        let point = CurvePoint {
            step,
            eval_return,
            eval_speed,
        };
        curve.push(point);
        Ok(point)
    };

    let first = record_eval(0, learner, eval_env, &mut curve)?;
    let mut best_params = learner.flatten_params();
    let mut best_eval_return = first.eval_return;

    if config.budget > 0 {
        let mut observation = env.reset(seeder.random());
        let mut exploration = SmoothedExploration::new(
            config.exploration.noise_std,
            config.exploration.smoothing,
            seeder.random(),
        );
        episodes = 1;

        for step in 0..config.budget {
            let mean = learner.policy_mean_raw(&observation);
            let action = exploration.apply(&mean, |pre| learner.squash(pre));
            let result = env.control_tick(&action)?;
            let terminal = matches!(
                result.termination,
                Some(TerminationReason::Fell) | Some(TerminationReason::Diverged)
            );
            learner.push_transition(Transition {
                obs: observation,
                action: action.to_vec(),
                reward: result.reward,
                next_obs: result.obs.clone(),
                terminal,
            });
            observation = result.obs;

            if step >= config.warmup_steps && learner.replay.len() >= learner.config.batch_size {
                for _ in 0..config.gradient_steps {
                    learner.update()?;
                }
            }

            if result.done {
                observation = env.reset(seeder.random());
                exploration = SmoothedExploration::new(
                    config.exploration.noise_std,
                    config.exploration.smoothing,
                    seeder.random(),
                );
                episodes += 1;
            }

            let now = step + 1;
            if now % config.eval_every.max(1) == 0 || now == config.budget {
                let point = record_eval(now, learner, eval_env, &mut curve)?;
                if point.eval_return > best_eval_return {
                    best_eval_return = point.eval_return;
                    best_params = learner.flatten_params();
                }
            }
        }
    }

    let final_params = learner.flatten_params();
    let best_params = if config.select_best {
        best_params
    } else {
        final_params.clone()
    };
    Ok(TrainOutcome {
        curve,
        final_params,
        best_params,
        best_eval_return,
        episodes,
        steps: config.budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{presets, Mode, TrainSettings};
    use crate::env::{EnvConfig, Task};

    fn quick_setup() -> (QuadrupedEnv, QuadrupedEnv, TqcLearner) {
        let config = EnvConfig::new(Task::Trot);
        let params = presets::hand_tuned(Task::Trot);
        let env = QuadrupedEnv::new(config.clone(), params).unwrap();
        let eval_env = QuadrupedEnv::new(config, params).unwrap();
        let mut settings = TrainSettings::default();
        settings.hidden = vec![32, 32];
        settings.batch_size = 64;
        settings.replay_capacity = 4096;
        let learner = TqcLearner::new(settings.learner_config(Mode::CpgRl), 0);
        (env, eval_env, learner)
    }

    #[test]
    fn zero_budget_returns_the_zero_mean_policy() {
        let (mut env, mut eval_env, mut learner) = quick_setup();
        let config = TrainConfig {
            budget: 0,
            eval_episodes: 1,
            ..TrainConfig::default()
        };
        let outcome = train(&mut env, &mut eval_env, &mut learner, &config, 1).unwrap();
        assert_eq!(outcome.steps, 0);
        assert_eq!(outcome.curve.len(), 1);
        let obs = eval_env.reset(0);
        let action = learner.mean_action(&obs);
        assert!(action.iter().all(|&a| a == 0.0));
        assert_eq!(outcome.best_params, outcome.final_params);
    }

    #[test]
    fn short_training_runs_and_is_seed_deterministic() {
        let run = || {
            let (mut env, mut eval_env, mut learner) = quick_setup();
            let config = TrainConfig {
                budget: 400,
                warmup_steps: 100,
                eval_every: 200,
                eval_episodes: 1,
                ..TrainConfig::default()
            };
            let outcome = train(&mut env, &mut eval_env, &mut learner, &config, 42).unwrap();
            (outcome.curve, learner.flatten_params())
        };
        let (curve_a, params_a) = run();
        let (curve_b, params_b) = run();
        assert_eq!(curve_a, curve_b);
        assert_eq!(params_a, params_b);
        assert!(curve_a.len() >= 3);
    }

    #[test]
    fn best_selection_never_falls_below_the_initial_policy() {
        let (mut env, mut eval_env, mut learner) = quick_setup();
        let config = TrainConfig {
            budget: 300,
            warmup_steps: 50,
            eval_every: 150,
            eval_episodes: 1,
            select_best: true,
            ..TrainConfig::default()
        };
        let outcome = train(&mut env, &mut eval_env, &mut learner, &config, 3).unwrap();
        let initial = outcome.curve[0].eval_return;
        assert!(outcome.best_eval_return >= initial);
    }
}
