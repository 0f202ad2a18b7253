//! Black-box optimization of the gait parameters.
//!
//! A Tree-structured Parzen Estimator proposes candidates by splitting the
//! observed trials at an objective quantile, fitting per-dimension kernel
//! densities to the good and bad sets, and picking the sampled candidate with
//! the best good-to-bad density ratio. A post-processing pass re-evaluates
//! the top candidates for several episodes and ranks them by mean objective,
//! which filters out lucky one-off evaluations.

mod history;
mod optimize;
mod space;
mod tpe;

pub use history::{
    EpisodeStats, HistoryError, OptimizationHistory, TerminationReason, TrialRecord,
};
pub use optimize::{
    optimize, reevaluate_top_k, EvalOutcome, Evaluation, ObjectiveFn, OptimizeError,
    RankedCandidate,
};
pub use space::{ParamRange, Scale, SearchSpace, SpaceError, NUM_PARAMS, PARAM_NAMES};
pub use tpe::{suggest_vector, tpe_suggest, TpeConfig};
