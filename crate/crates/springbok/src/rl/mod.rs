//! Residual reinforcement learning: replay, quantile-critic learner, policy
//! head, checkpoints and the training loop.

pub mod checkpoint;
mod learner;
mod nets;
pub mod policy;
pub mod quantile;
mod replay;
mod train;

pub use learner::{AlphaMode, LearnerConfig, LearnerError, TqcLearner, UpdateStats};
pub use nets::{Adam, Linear, LinearGrad, Mlp, ScalarAdam};
pub use replay::{ReplayBuffer, Transition};
pub use train::{train, CurvePoint, ExplorationConfig, TrainConfig, TrainError, TrainOutcome};
