//! Trial records and their JSON-lines persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::CpgParams;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("history I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("history line {0} is not a valid trial record: {1}")]
    BadRecord(usize, serde_json::Error),
    #[error("trial ids must be dense from zero; found {found} at position {position}")]
    NonDenseIds { found: usize, position: usize },
}

/// Why an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Ran to the episode timeout.
    Completed,
    /// Trunk attitude or height left the safe envelope.
    Fell,
    /// Horizontal position left the allowed workspace box.
    OutOfBounds,
    /// Simulation produced a non-finite state.
    Diverged,
}

/// Episode statistics attached to one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    /// Episode length in simulated seconds.
    pub duration_s: f64,
    pub termination: TerminationReason,
}

/// One black-box evaluation.
///
/// `eval_time_s` is the simulated time spent evaluating the trial. Recording
/// simulated rather than wall-clock time keeps rerun artifacts byte-identical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub params: CpgParams,
    /// Minimized objective; failed trials carry a penalty value.
    pub objective: f64,
    pub failed: bool,
    pub episode: EpisodeStats,
    pub eval_time_s: f64,
}

/// Ordered trial records plus the running best.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationHistory {
    trials: Vec<TrialRecord>,
}

impl OptimizationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TrialRecord) {
        debug_assert_eq!(record.trial_id, self.trials.len(), "trial ids must be dense");
        self.trials.push(record);
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn successful(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(|t| !t.failed)
    }

    /// Best successful trial by objective.
    pub fn best(&self) -> Option<&TrialRecord> {
        self.successful()
            .min_by(|a, b| a.objective.total_cmp(&b.objective))
    }

    /// Running minimum of the objective over successful trials; positions
    /// before the first success carry the failure penalty of that prefix.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                if !t.failed {
                    best = best.min(t.objective);
                } else if best.is_infinite() {
                    best = best.min(t.objective);
                }
                best
            })
            .collect()
    }

    /// Appends one record to a JSON-lines sink and flushes it, so an
    /// interrupted run loses at most the in-flight trial.
    pub fn append_to(path: &Path, record: &TrialRecord) -> Result<(), HistoryError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, record).map_err(|e| {
            HistoryError::Io(std::io::Error::other(e))
        })?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    /// Loads a JSON-lines history written by [`OptimizationHistory::append_to`].
    pub fn load(path: &Path) -> Result<Self, HistoryError> {
        let file = BufReader::new(File::open(path)?);
        let mut history = OptimizationHistory::new();
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TrialRecord =
                serde_json::from_str(&line).map_err(|e| HistoryError::BadRecord(idx, e))?;
            if record.trial_id != history.len() {
                return Err(HistoryError::NonDenseIds {
                    found: record.trial_id,
                    position: history.len(),
                });
            }
            history.push(record);
        }
        Ok(history)
    }

    /// Writes the whole history to a JSON-lines file.
    pub fn save(&self, path: &Path) -> Result<(), HistoryError> {
        let mut writer = BufWriter::new(File::create(path)?);
        for record in &self.trials {
            serde_json::to_writer(&mut writer, record)
                .map_err(|e| HistoryError::Io(std::io::Error::other(e)))?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}
