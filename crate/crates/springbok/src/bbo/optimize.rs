//! The sequential optimization loop and the top-k re-evaluation pass.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::history::{EpisodeStats, HistoryError, OptimizationHistory, TerminationReason, TrialRecord};
use super::space::SearchSpace;
use super::tpe::{tpe_suggest, TpeConfig};
use crate::cpg::CpgParams;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("re-evaluation needs {needed} successful trials, history has {available}")]
    NotEnoughSuccesses { needed: usize, available: usize },
    #[error("budget must be at least 1")]
    EmptyBudget,
}

/// Result of one successful episode evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    /// Minimized objective value.
    pub objective: f64,
    pub stats: EpisodeStats,
}

/// Outcome of one objective evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalOutcome {
    Success(Evaluation),
    /// The episode fell over or the simulation diverged; no usable objective.
    Failure(EpisodeStats),
}

/// Objective callback: parameters plus a deterministic evaluation nonce that
/// seeds the episode, so re-evaluations can differ while staying reproducible.
pub type ObjectiveFn<'a> = dyn FnMut(&CpgParams, usize) -> EvalOutcome + 'a;

fn failure_penalty(history: &OptimizationHistory) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut best = f64::INFINITY;
    for trial in history.successful() {
        worst = worst.max(trial.objective);
        best = best.min(trial.objective);
    }
    if !worst.is_finite() {
        return 1.0;
    }
    let range = worst - best;
    worst + if range > 0.0 { range } else { 1.0 }
}

/// Runs the optimization loop for exactly `budget` trials (counting any
/// resumed trials toward the budget).
///
/// Every trial is recorded: failed episodes get a penalty objective of the
/// worst observed value plus one observed objective range. Records are
/// appended to `sink` and flushed as they complete, so an interruption loses
/// at most the in-flight trial. A panicking callback marks the trial failed
/// and the loop continues.
pub fn optimize(
    objective: &mut ObjectiveFn,
    space: &SearchSpace,
    budget: usize,
    config: &TpeConfig,
    rng: &mut ChaCha8Rng,
    sink: Option<&Path>,
    resume: OptimizationHistory,
) -> Result<OptimizationHistory, OptimizeError> {
    if budget == 0 {
        return Err(OptimizeError::EmptyBudget);
    }
    let mut history = resume;
    while history.len() < budget {
        let trial_id = history.len();
        let params = tpe_suggest(&history, space, config, rng);
        let outcome = catch_unwind(AssertUnwindSafe(|| objective(&params, trial_id)));
        let record = match outcome {
            Ok(EvalOutcome::Success(eval)) if eval.objective.is_finite() => TrialRecord {
                trial_id,
                params,
                objective: eval.objective,
                failed: false,
                episode: eval.stats,
                eval_time_s: eval.stats.duration_s,
            },
            Ok(EvalOutcome::Success(eval)) => TrialRecord {
                trial_id,
                params,
                objective: failure_penalty(&history),
                failed: true,
                episode: eval.stats,
                eval_time_s: eval.stats.duration_s,
            },
            Ok(EvalOutcome::Failure(stats)) => TrialRecord {
                trial_id,
                params,
                objective: failure_penalty(&history),
                failed: true,
                episode: stats,
                eval_time_s: stats.duration_s,
            },
            Err(_) => TrialRecord {
                trial_id,
                params,
                objective: failure_penalty(&history),
                failed: true,
                episode: EpisodeStats {
                    duration_s: 0.0,
                    termination: TerminationReason::Diverged,
                },
                eval_time_s: 0.0,
            },
        };
        if let Some(path) = sink {
            OptimizationHistory::append_to(path, &record)?;
        }
        history.push(record);
    }
    Ok(history)
}

/// A re-evaluated candidate with its spread over repeat episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub trial_id: usize,
    pub params: CpgParams,
    /// Objective from the original optimization trial.
    pub original_objective: f64,
    /// Mean objective over the re-evaluation episodes.
    pub mean: f64,
    /// Standard deviation over the re-evaluation episodes.
    pub sd: f64,
    pub objectives: Vec<f64>,
}

/// Re-runs the `k` best successful candidates for `episodes` episodes each and
/// ranks them by mean objective (ties broken by lower standard deviation).
///
/// Re-evaluation nonces continue above the optimization budget so they never
/// collide with trial seeds.
pub fn reevaluate_top_k(
    history: &OptimizationHistory,
    k: usize,
    episodes: usize,
    objective: &mut ObjectiveFn,
) -> Result<Vec<RankedCandidate>, OptimizeError> {
    let mut successes: Vec<&TrialRecord> = history.successful().collect();
    if successes.len() < k {
        return Err(OptimizeError::NotEnoughSuccesses {
            needed: k,
            available: successes.len(),
        });
    }
    successes.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    let penalty = failure_penalty(history);

    let mut ranked = Vec::with_capacity(k);
    for (slot, trial) in successes.iter().take(k).enumerate() {
        let mut objectives = Vec::with_capacity(episodes);
        for episode in 0..episodes {
            let nonce = history.len() + slot * episodes.max(1) + episode;
            let outcome = catch_unwind(AssertUnwindSafe(|| objective(&trial.params, nonce)));
            let value = match outcome {
                Ok(EvalOutcome::Success(eval)) if eval.objective.is_finite() => eval.objective,
                _ => penalty,
            };
            objectives.push(value);
        }
        let mean = objectives.iter().sum::<f64>() / objectives.len() as f64;
        let var = objectives
            .iter()
            .map(|o| (o - mean) * (o - mean))
            .sum::<f64>()
            / objectives.len() as f64;
        ranked.push(RankedCandidate {
            trial_id: trial.trial_id,
            params: trial.params,
            original_objective: trial.objective,
            mean,
            sd: var.sqrt(),
            objectives,
        });
    }
    ranked.sort_by(|a, b| a.mean.total_cmp(&b.mean).then(a.sd.total_cmp(&b.sd)));
    Ok(ranked)
}
