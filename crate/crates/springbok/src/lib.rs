//! Desk-scale locomotion lab for a quadruped with series-elastic joints.
//!
//! The crate bundles everything needed to synthesize, optimize and refine
//! dynamic gaits for a small spring-legged quadruped, entirely in simulation:
//!
//! - [`cpg`] — four coupled nonlinear oscillators generating rhythmic foot
//!   trajectories (trot and pronk presets),
//! - [`kinematics`] — forward/inverse kinematics of the two-segment legs,
//! - [`sim`] — rigid-trunk physics with series-elastic joints,
//!   velocity-capped motor servos, penalty ground contact and a synthetic IMU,
//! - [`metrics`] — trace analysis: joint/motor velocity ratios, energy
//!   accounting, stance/swing patterns, mean forward speed,
//! - [`bbo`] — Tree-structured Parzen Estimator for gait parameter search,
//!   with top-k re-evaluation,
//! - [`rl`] — quantile-critic actor-critic learning residual foot offsets on
//!   top of the oscillator gait (or absolute targets from scratch),
//! - [`env`] — the episode runner wiring everything together,
//! - [`experiment`] — end-to-end commands behind the `springbok` CLI
//!   (`optimize`, `train`, `eval`, `export-figures`).
//!
//! Start with the examples (`cargo run --release --example open_loop_gait`)
//! or the CLI (`cargo run --release -- optimize --task trot --seed 0 --out runs/trot`).

pub mod bbo;
pub mod config;
pub mod cpg;
pub mod env;
pub mod experiment;
pub mod kinematics;
pub mod metrics;
pub mod rl;
pub mod sim;
pub mod trace;

pub use config::{ExperimentConfig, Mode};
pub use cpg::{CpgParams, Gait, GaitSpec, OscillatorNetwork};
pub use env::{QuadrupedEnv, Task};
pub use sim::{ContactModel, RobotModel, RobotState};
