//! Episode runner: couples the oscillator network, leg kinematics and the
//! physics simulation into a gym-style control-rate interface with task
//! rewards, termination predicates and trace recording.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::bbo::{EpisodeStats, EvalOutcome, Evaluation, TerminationReason};
use crate::cpg::{
    CpgParams, FootTarget, Gait, GaitSpec, OscillatorNetwork, PhaseInit, NUM_LEGS,
};
use crate::kinematics::{inverse_kinematics, FootPoint, JointAngles};
use crate::metrics;
use crate::sim::{
    commands_for_angles, read_imu, step_sim, ContactModel, ImuNoise, RobotModel, RobotState,
    SimError, NUM_JOINTS,
};
use crate::trace::EpisodeTrace;

/// Observation layout: q (8), q̇ (8), spring torques (8), linear acceleration
/// (3), angular velocity (3), desired foot targets (8).
pub const OBS_DIM: usize = 38;
/// Per-leg (x, z) target offsets.
pub const ACT_DIM: usize = NUM_JOINTS;

/// Fixed normalization scales per observation block.
pub const OBS_SCALE_JOINT_POS: f64 = 1.0;
pub const OBS_SCALE_JOINT_VEL: f64 = 10.0;
pub const OBS_SCALE_TORQUE: f64 = 1.0;
pub const OBS_SCALE_ACCEL: f64 = 10.0;
pub const OBS_SCALE_GYRO: f64 = 5.0;
pub const OBS_SCALE_TARGET: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cpg(#[from] crate::cpg::CpgError),
}

/// The two locomotion tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Move forward as fast as possible with a trotting gait.
    Trot,
    /// Jump in place without drifting or rotating.
    Pronk,
}

impl Task {
    pub fn gait(&self) -> Gait {
        match self {
            Task::Trot => Gait::Trot,
            Task::Pronk => Gait::Pronk,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Trot => write!(f, "trot"),
            Task::Pronk => write!(f, "pronk"),
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trot" => Ok(Task::Trot),
            "pronk" => Ok(Task::Pronk),
            other => Err(format!("unknown task `{other}` (expected trot|pronk)")),
        }
    }
}

/// Reward weights for the jumping task: `w1·|ż| − w2·(ψ̇r² + ψ̇y²) − w3·Δxy²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights {
            w1: 1.0,
            w2: 0.05,
            w3: 0.5,
        }
    }
}

/// Early-termination envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationLimits {
    pub max_roll: f64,
    pub max_pitch: f64,
    pub min_height: f64,
    /// Half-width of the allowed box along x, meters.
    pub x_limit: f64,
    /// Half-width of the allowed box along y, meters.
    pub y_limit: f64,
}

impl Default for TerminationLimits {
    fn default() -> Self {
        TerminationLimits {
            max_roll: 0.8,
            max_pitch: 0.8,
            min_height: 0.05,
            x_limit: 1.5,
            y_limit: 0.5,
        }
    }
}

/// Scheduled lateral shoves for robustness evaluations. The impulse sign is
/// drawn per episode from the episode seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Times at which a shove is applied, seconds.
    pub times: Vec<f64>,
    /// Magnitude of the lateral velocity change, m/s.
    pub lateral_impulse: f64,
}

/// Episode protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Episode timeout, seconds.
    pub duration: f64,
    /// Control rate, Hz.
    pub control_hz: u32,
    /// Physics step, seconds.
    pub physics_dt: f64,
    pub limits: TerminationLimits,
    pub phase_init: PhaseInit,
    /// Uniform jitter added to the common oscillator phase at reset, rad.
    pub phase_jitter: f64,
    pub imu_noise: ImuNoise,
    pub perturbation: Option<PerturbationConfig>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            duration: 5.0,
            control_hz: 30,
            physics_dt: 1e-3,
            limits: TerminationLimits::default(),
            phase_init: PhaseInit::Exact,
            phase_jitter: 0.0,
            imu_noise: ImuNoise::default(),
            perturbation: None,
        }
    }
}

/// Oscillator constants that are not part of the optimized parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpgSettings {
    pub convergence_rate: f64,
    pub mu: f64,
    pub coupling_weight: f64,
}

impl Default for CpgSettings {
    fn default() -> Self {
        CpgSettings {
            convergence_rate: 20.0,
            mu: 1.0,
            coupling_weight: 1.0,
        }
    }
}

/// What the action means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Actions are per-leg Cartesian offsets added to the oscillator targets.
    Residual,
    /// Actions are absolute foot targets in a box matching the oscillator
    /// workspace (learning from scratch); the oscillators are bypassed.
    AbsoluteTargets,
}

/// Everything needed to run episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub task: Task,
    #[serde(default)]
    pub robot: RobotModel,
    #[serde(default)]
    pub contact: ContactModel,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub weights: TaskWeights,
    #[serde(default)]
    pub cpg: CpgSettings,
    #[serde(default = "default_control_mode")]
    pub control_mode: ControlMode,
    /// Residual offset bound Δ_max, meters.
    #[serde(default = "default_action_limit")]
    pub action_limit: f64,
}

fn default_control_mode() -> ControlMode {
    ControlMode::Residual
}

fn default_action_limit() -> f64 {
    0.02
}

impl EnvConfig {
    pub fn new(task: Task) -> Self {
        EnvConfig {
            task,
            robot: RobotModel::default(),
            contact: ContactModel::default(),
            episode: EpisodeConfig::default(),
            weights: TaskWeights::default(),
            cpg: CpgSettings::default(),
            control_mode: ControlMode::Residual,
            action_limit: default_action_limit(),
        }
    }

    /// Absolute-target box used in from-scratch mode, matching the reachable
    /// oscillator workspace: x ∈ ±0.08 m, z ∈ [−0.03, 0.06] m.
    fn absolute_box(&self) -> (f64, f64, f64) {
        (0.08, 0.015, 0.045)
    }
}

/// Eq-style composition: learned offsets added to the oscillator targets.
pub fn compose_targets(cpg: &[FootTarget; NUM_LEGS], action: &[f64; ACT_DIM]) -> [FootTarget; NUM_LEGS] {
    let mut out = *cpg;
    for leg in 0..NUM_LEGS {
        out[leg].x += action[2 * leg];
        out[leg].z += action[2 * leg + 1];
    }
    out
}

/// Result of one control tick.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Set when `done`; `Completed` means the timeout was reached.
    pub termination: Option<TerminationReason>,
}

/// Summary of one finished episode.
#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    pub total_reward: f64,
    pub stats: EpisodeStats,
    /// Number of control ticks executed.
    pub ticks: usize,
    /// Workspace clamp events across all legs and ticks.
    pub clamp_events: usize,
}

impl EpisodeOutcome {
    pub fn mean_forward_speed(&self) -> f64 {
        metrics::mean_forward_speed(&self.trace).unwrap_or(0.0)
    }

    /// Task objective in minimization form.
    pub fn objective(&self, task: Task) -> f64 {
        match task {
            Task::Trot => -self.mean_forward_speed(),
            Task::Pronk => -self.total_reward,
        }
    }

    /// Packs the outcome for the optimizer: falls and divergence are
    /// failures, a completed or out-of-bounds episode yields its objective.
    pub fn into_eval(self, task: Task) -> EvalOutcome {
        match self.stats.termination {
            TerminationReason::Completed | TerminationReason::OutOfBounds => {
                EvalOutcome::Success(Evaluation {
                    objective: self.objective(task),
                    stats: self.stats,
                })
            }
            TerminationReason::Fell | TerminationReason::Diverged => {
                EvalOutcome::Failure(self.stats)
            }
        }
    }
}

/// The episode runner.
pub struct QuadrupedEnv {
    pub config: EnvConfig,
    params: CpgParams,
    gait: GaitSpec,
    couplings: [[f64; NUM_LEGS]; NUM_LEGS],
    state: RobotState,
    prev_tick_state: RobotState,
    oscillators: OscillatorNetwork,
    rng: ChaCha8Rng,
    tick: usize,
    n_ticks: usize,
    physics_step: usize,
    steps_per_second: usize,
    start_xy: (f64, f64),
    pending_cpg_targets: [FootTarget; NUM_LEGS],
    last_commanded_targets: [FootTarget; NUM_LEGS],
    perturbation_steps: Vec<(usize, f64)>,
    trace: EpisodeTrace,
    total_reward: f64,
    clamp_events: usize,
    finished: Option<TerminationReason>,
}

impl QuadrupedEnv {
    pub fn new(config: EnvConfig, params: CpgParams) -> Result<Self, EnvError> {
        params.validate()?;
        let (gait, couplings) = GaitSpec::new(config.task.gait(), config.cpg.coupling_weight)?;
        let effective = if gait.zero_step_length {
            params.with_zero_step_length()
        } else {
            params
        };
        let steps_per_second = (1.0 / config.episode.physics_dt).round() as usize;
        let n_ticks = (config.episode.duration * config.episode.control_hz as f64).round() as usize;
        let state = RobotState::standing(&config.robot);
        let mut env = QuadrupedEnv {
            oscillators: OscillatorNetwork::for_gait(&gait, couplings),
            prev_tick_state: state.clone(),
            state,
            rng: ChaCha8Rng::seed_from_u64(0),
            tick: 0,
            n_ticks,
            physics_step: 0,
            steps_per_second,
            start_xy: (0.0, 0.0),
            pending_cpg_targets: [FootTarget::default(); NUM_LEGS],
            last_commanded_targets: [FootTarget::default(); NUM_LEGS],
            perturbation_steps: Vec::new(),
            trace: EpisodeTrace::default(),
            total_reward: 0.0,
            clamp_events: 0,
            finished: None,
            params: effective,
            gait,
            couplings,
            config,
        };
        env.apply_cpg_settings();
        Ok(env)
    }

    fn apply_cpg_settings(&mut self) {
        self.oscillators.mu = self.config.cpg.mu;
        self.oscillators.convergence_rate = self.config.cpg.convergence_rate;
    }

    pub fn params(&self) -> &CpgParams {
        &self.params
    }

    pub fn ticks_per_episode(&self) -> usize {
        self.n_ticks
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.config.episode.control_hz as f64
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    /// Starts a fresh episode and returns the initial observation.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = RobotState::standing(&self.config.robot);
        self.prev_tick_state = self.state.clone();
        self.oscillators = OscillatorNetwork::for_gait_with_init(
            &self.gait,
            self.couplings,
            self.config.episode.phase_init,
            &mut self.rng,
        );
        self.apply_cpg_settings();
        if self.config.episode.phase_jitter > 0.0 {
            let jitter = self
                .rng
                .random_range(-self.config.episode.phase_jitter..self.config.episode.phase_jitter);
            for phi in self.oscillators.phi.iter_mut() {
                *phi = (*phi + jitter).rem_euclid(std::f64::consts::TAU);
            }
        }
        self.perturbation_steps = match &self.config.episode.perturbation {
            Some(p) => {
                let mut schedule = Vec::with_capacity(p.times.len());
                for &t in &p.times {
                    let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let step = (t * self.steps_per_second as f64).round() as usize;
                    schedule.push((step, sign * p.lateral_impulse));
                }
                schedule
            }
            None => Vec::new(),
        };
        self.tick = 0;
        self.physics_step = 0;
        self.start_xy = (self.state.trunk_position.x, self.state.trunk_position.y);
        self.total_reward = 0.0;
        self.clamp_events = 0;
        self.finished = None;
        self.trace = EpisodeTrace::with_capacity(self.n_ticks + 1);
        self.pending_cpg_targets = self.oscillators.foot_targets(&self.params);
        self.last_commanded_targets = match self.config.control_mode {
            ControlMode::Residual => self.pending_cpg_targets,
            ControlMode::AbsoluteTargets => [FootTarget::default(); NUM_LEGS],
        };
        let traced_targets = self.target_channels();
        self.trace
            .push_state(&self.state, &self.config.robot, &traced_targets);
        self.observation()
    }

    /// Targets exposed in the observation and the trace: oscillator output in
    /// residual mode, last commanded targets when learning from scratch.
    fn target_channels(&self) -> [FootTarget; NUM_LEGS] {
        match self.config.control_mode {
            ControlMode::Residual => self.pending_cpg_targets,
            ControlMode::AbsoluteTargets => self.last_commanded_targets,
        }
    }

    fn observation(&mut self) -> Vec<f64> {
        let imu = read_imu(
            &self.prev_tick_state,
            &self.state,
            self.control_dt(),
            &self.config.episode.imu_noise,
            &mut self.rng,
        );
        let torques = self.state.spring_torques(&self.config.robot);
        let targets = self.target_channels();
        let mut obs = Vec::with_capacity(OBS_DIM);
        for j in 0..NUM_JOINTS {
            obs.push(self.state.joint_positions[j] / OBS_SCALE_JOINT_POS);
        }
        for j in 0..NUM_JOINTS {
            obs.push(self.state.joint_velocities[j] / OBS_SCALE_JOINT_VEL);
        }
        for t in torques.iter() {
            obs.push(t / OBS_SCALE_TORQUE);
        }
        for axis in 0..3 {
            obs.push(imu.linear_acceleration[axis] / OBS_SCALE_ACCEL);
        }
        for axis in 0..3 {
            obs.push(imu.angular_velocity[axis] / OBS_SCALE_GYRO);
        }
        for target in targets.iter() {
            obs.push(target.x / OBS_SCALE_TARGET);
            obs.push(target.z / OBS_SCALE_TARGET);
        }
        debug_assert_eq!(obs.len(), OBS_DIM);
        obs
    }

    /// Maps composed foot targets into joint commands, counting clamps.
    fn commands_for_targets(&mut self, targets: &[FootTarget; NUM_LEGS]) -> [f64; NUM_JOINTS] {
        let neutral = self.config.robot.leg.neutral_foot;
        let mut angles = [JointAngles::default(); NUM_LEGS];
        for leg in 0..NUM_LEGS {
            // The target x axis runs against the travel direction, so the
            // swing half-cycle carries the foot toward the nose.
            let point = FootPoint {
                x: neutral.x - targets[leg].x,
                z: neutral.z - targets[leg].z,
            };
            let solution = inverse_kinematics(point, &self.config.robot.leg);
            if solution.clamped {
                self.clamp_events += 1;
            }
            angles[leg] = solution.angles;
        }
        commands_for_angles(&angles)
    }

    fn termination_check(&self) -> Option<TerminationReason> {
        let limits = &self.config.episode.limits;
        let (roll, pitch, _) = self.state.trunk_euler();
        if roll.abs() > limits.max_roll
            || pitch.abs() > limits.max_pitch
            || self.state.trunk_position.z < limits.min_height
        {
            return Some(TerminationReason::Fell);
        }
        if (self.state.trunk_position.x - self.start_xy.0).abs() > limits.x_limit
            || (self.state.trunk_position.y - self.start_xy.1).abs() > limits.y_limit
        {
            return Some(TerminationReason::OutOfBounds);
        }
        None
    }

    fn reward(&self) -> f64 {
        match self.config.task {
            Task::Trot => self.state.trunk_position.x - self.prev_tick_state.trunk_position.x,
            Task::Pronk => {
                let w = self.config.weights;
                let omega = self.state.trunk_angular_velocity;
                let dx = self.state.trunk_position.x - self.start_xy.0;
                let dy = self.state.trunk_position.y - self.start_xy.1;
                w.w1 * self.state.trunk_velocity.z.abs()
                    - w.w2 * (omega.x * omega.x + omega.z * omega.z)
                    - w.w3 * (dx * dx + dy * dy)
            }
        }
    }

    /// Advances one control tick with the given action.
    ///
    /// In residual mode the action is added to the oscillator targets; in
    /// absolute mode it selects targets inside the workspace box. Commands
    /// are zero-order-held across the physics substeps while the oscillators
    /// keep integrating at the physics rate.
    pub fn control_tick(&mut self, action: &[f64; ACT_DIM]) -> Result<StepResult, EnvError> {
        assert!(self.finished.is_none(), "episode already finished; call reset");
        let commanded = match self.config.control_mode {
            ControlMode::Residual => compose_targets(&self.pending_cpg_targets, action),
            ControlMode::AbsoluteTargets => {
                let (x_amp, z_mid, z_amp) = self.config.absolute_box();
                let mut targets = [FootTarget::default(); NUM_LEGS];
                for leg in 0..NUM_LEGS {
                    targets[leg] = FootTarget {
                        x: action[2 * leg] * x_amp,
                        z: z_mid + action[2 * leg + 1] * z_amp,
                    };
                }
                targets
            }
        };
        self.last_commanded_targets = commanded;
        let cmds = self.commands_for_targets(&commanded);

        self.prev_tick_state = self.state.clone();
        self.tick += 1;
        let end_step = self.tick * self.steps_per_second / self.config.episode.control_hz as usize;
        let mut diverged = false;
        while self.physics_step < end_step {
            for &(at, impulse) in &self.perturbation_steps {
                if at == self.physics_step {
                    self.state.trunk_velocity.y += impulse;
                }
            }
            if self.config.control_mode == ControlMode::Residual {
                self.oscillators = self
                    .oscillators
                    .step(&self.params, self.config.episode.physics_dt)?;
            }
            match step_sim(
                &self.state,
                &cmds,
                &self.config.robot,
                &self.config.contact,
                self.config.episode.physics_dt,
            ) {
                Ok((next, _)) => self.state = next,
                Err(SimError::Diverged { .. }) => {
                    diverged = true;
                    break;
                }
            }
            self.physics_step += 1;
        }

        self.pending_cpg_targets = self.oscillators.foot_targets(&self.params);
        let traced_targets = self.target_channels();
        self.trace
            .push_state(&self.state, &self.config.robot, &traced_targets);

        let reward = self.reward();
        self.total_reward += reward;

        let termination = if diverged {
            Some(TerminationReason::Diverged)
        } else if let Some(reason) = self.termination_check() {
            Some(reason)
        } else if self.tick >= self.n_ticks {
            Some(TerminationReason::Completed)
        } else {
            None
        };
        self.finished = termination;

        Ok(StepResult {
            obs: self.observation(),
            reward,
            done: termination.is_some(),
            termination,
        })
    }

    /// Bundles the episode after it finished (or was abandoned).
    pub fn finish(&mut self) -> EpisodeOutcome {
        let termination = self.finished.unwrap_or(TerminationReason::Completed);
        EpisodeOutcome {
            trace: std::mem::take(&mut self.trace),
            total_reward: self.total_reward,
            stats: EpisodeStats {
                duration_s: self.state.time,
                termination,
            },
            ticks: self.tick,
            clamp_events: self.clamp_events,
        }
    }

    /// Runs a whole episode with a per-tick action callback.
    pub fn run_episode(
        &mut self,
        seed: u64,
        mut policy: impl FnMut(&[f64], usize) -> [f64; ACT_DIM],
    ) -> Result<EpisodeOutcome, EnvError> {
        let mut obs = self.reset(seed);
        let mut tick = 0;
        loop {
            let action = policy(&obs, tick);
            let result = self.control_tick(&action)?;
            obs = result.obs;
            tick += 1;
            if result.done {
                break;
            }
        }
        Ok(self.finish())
    }

    /// Runs a whole episode with zero actions (pure oscillator gait).
    pub fn run_open_loop(&mut self, seed: u64) -> Result<EpisodeOutcome, EnvError> {
        self.run_episode(seed, |_, _| [0.0; ACT_DIM])
    }
}

/// Objective adapter for the optimizer: evaluates one episode per call.
pub fn episode_objective<'a>(
    config: &'a EnvConfig,
    base_seed: u64,
) -> impl FnMut(&CpgParams, usize) -> EvalOutcome + 'a {
    move |params: &CpgParams, nonce: usize| -> EvalOutcome {
        let mut env = match QuadrupedEnv::new(config.clone(), *params) {
            Ok(env) => env,
            Err(_) => {
                return EvalOutcome::Failure(EpisodeStats {
                    duration_s: 0.0,
                    termination: TerminationReason::Diverged,
                })
            }
        };
        let seed = base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(nonce as u64);
        match env.run_open_loop(seed) {
            Ok(outcome) => outcome.into_eval(config.task),
            Err(_) => EvalOutcome::Failure(EpisodeStats {
                duration_s: 0.0,
                termination: TerminationReason::Diverged,
            }),
        }
    }
}

/// First-order low-pass over actions plus per-episode Gaussian noise,
/// standing in for state-dependent exploration so the motors never see
/// step-like commands.
#[derive(Clone, Debug)]
pub struct SmoothedExploration {
    noise_std: f64,
    smoothing: f64,
    filtered: [f64; ACT_DIM],
    rng: ChaCha8Rng,
}

impl SmoothedExploration {
    pub fn new(noise_std: f64, smoothing: f64, episode_seed: u64) -> Self {
        SmoothedExploration {
            noise_std,
            smoothing,
            filtered: [0.0; ACT_DIM],
            rng: ChaCha8Rng::seed_from_u64(episode_seed),
        }
    }

    /// Perturbs the pre-squash policy mean and low-passes the result.
    pub fn apply(&mut self, pre_squash_mean: &[f64], squash: impl Fn(&[f64]) -> Vec<f64>) -> [f64; ACT_DIM] {
        let normal = rand_distr::Normal::new(0.0, self.noise_std).expect("valid std");
        let mut noisy = [0.0; ACT_DIM];
        for (slot, &mean) in noisy.iter_mut().zip(pre_squash_mean.iter()) {
            *slot = mean + normal.sample(&mut self.rng);
        }
        let squashed = squash(&noisy);
        for (filtered, &raw) in self.filtered.iter_mut().zip(squashed.iter()) {
            *filtered = self.smoothing * *filtered + (1.0 - self.smoothing) * raw;
        }
        self.filtered
    }
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn trot_env() -> QuadrupedEnv {
        let config = EnvConfig::new(Task::Trot);
        QuadrupedEnv::new(config, presets::hand_tuned(Task::Trot)).unwrap()
    }

    #[test]
    fn observation_has_the_documented_layout() {
        let mut env = trot_env();
        let obs = env.reset(0);
        assert_eq!(obs.len(), OBS_DIM);
        // At rest: specific force reads +g on the z accel channel.
        assert_relative_eq!(obs[27], 9.81 / OBS_SCALE_ACCEL, max_relative = 1e-9);
        // Joint positions land in the first block.
        assert_relative_eq!(
            obs[0],
            env.state().joint_positions[0] / OBS_SCALE_JOINT_POS,
            max_relative = 1e-12
        );
    }

    #[test]
    fn compose_targets_is_local_and_additive() {
        let cpg = [FootTarget { x: 0.01, z: -0.003 }; NUM_LEGS];
        let mut action = [0.0; ACT_DIM];
        let composed = compose_targets(&cpg, &action);
        assert_eq!(composed, cpg);

        action[0] = 0.01;
        let composed = compose_targets(&cpg, &action);
        assert_relative_eq!(composed[0].x, 0.02, max_relative = 1e-12);
        assert_eq!(composed[0].z, cpg[0].z);
        for leg in 1..NUM_LEGS {
            assert_eq!(composed[leg], cpg[leg]);
        }
    }

    #[test]
    fn saturated_offsets_raise_the_workspace_clamp() {
        let mut env = trot_env();
        env.reset(0);
        // Drive one leg far outside the annulus: clamp events must show up.
        let mut action = [0.0; ACT_DIM];
        action[0] = 0.2;
        action[1] = -0.2;
        for _ in 0..5 {
            env.control_tick(&action).unwrap();
        }
        assert!(env.clamp_events > 0);
    }

    #[test]
    fn open_loop_episode_completes_and_advances() {
        let mut env = trot_env();
        let outcome = env.run_open_loop(7).unwrap();
        assert_eq!(outcome.stats.termination, TerminationReason::Completed);
        assert_eq!(outcome.ticks, 150);
        assert_eq!(outcome.trace.len(), 151);
        outcome.trace.validate().unwrap();
        // The gait must drive the robot toward +x at a sane walking speed.
        let speed = outcome.mean_forward_speed();
        assert!(speed > 0.01, "forward speed {speed} m/s");
        assert!(speed < 2.0, "implausible speed {speed} m/s");
    }

    #[test]
    fn episodes_are_bit_deterministic() {
        let run = || {
            let mut env = trot_env();
            let outcome = env.run_open_loop(3).unwrap();
            (outcome.trace, outcome.total_reward)
        };
        let (trace_a, reward_a) = run();
        let (trace_b, reward_b) = run();
        assert_eq!(reward_a.to_bits(), reward_b.to_bits());
        assert_eq!(trace_a, trace_b);
    }

    #[test]
    fn zero_action_equals_open_loop_bitwise() {
        let mut env_a = trot_env();
        let open = env_a.run_open_loop(5).unwrap();
        let mut env_b = trot_env();
        let closed = env_b
            .run_episode(5, |_, _| [0.0; ACT_DIM])
            .unwrap();
        assert_eq!(open.trace, closed.trace);
    }

    #[test]
    fn trot_reward_is_the_per_tick_displacement() {
        let mut env = trot_env();
        env.reset(0);
        let mut total = 0.0;
        let mut done = false;
        while !done {
            let result = env.control_tick(&[0.0; ACT_DIM]).unwrap();
            total += result.reward;
            done = result.done;
        }
        let outcome = env.finish();
        let dx = outcome.trace.trunk_position[outcome.trace.len() - 1].x
            - outcome.trace.trunk_position[0].x;
        assert_relative_eq!(total, dx, max_relative = 1e-9);
    }

    #[test]
    fn pronk_reward_components_have_documented_signs() {
        let config = EnvConfig::new(Task::Pronk);
        let mut env = QuadrupedEnv::new(config, presets::hand_tuned(Task::Pronk)).unwrap();
        env.reset(0);
        // At rest at the origin the reward is zero.
        assert_relative_eq!(env.reward(), 0.0, epsilon = 1e-12);
        // Vertical velocity is rewarded.
        env.state.trunk_velocity.z = 1.0;
        assert_relative_eq!(env.reward(), 1.0, max_relative = 1e-12);
        // Yaw spin is penalized through w2.
        env.state.trunk_velocity.z = 0.0;
        env.state.trunk_angular_velocity = Vector3::new(0.0, 0.0, 2.0);
        assert_relative_eq!(env.reward(), -0.2, max_relative = 1e-12);
        // Drift is penalized through w3.
        env.state.trunk_angular_velocity = Vector3::zeros();
        env.state.trunk_position.x += 0.3;
        assert_relative_eq!(env.reward(), -0.5 * 0.09, max_relative = 1e-12);
    }

    #[test]
    fn pronking_keeps_step_length_zero() {
        let config = EnvConfig::new(Task::Pronk);
        let mut params = presets::hand_tuned(Task::Pronk);
        params.step_length = 0.05;
        let env = QuadrupedEnv::new(config, params).unwrap();
        assert_eq!(env.params().step_length, 0.0);
    }

    #[test]
    fn perturbations_change_the_trajectory() {
        let config_base = EnvConfig::new(Task::Pronk);
        let mut perturbed_cfg = config_base.clone();
        perturbed_cfg.episode.perturbation = Some(PerturbationConfig {
            times: vec![1.0],
            lateral_impulse: 0.3,
        });
        let params = presets::hand_tuned(Task::Pronk);
        let mut env = QuadrupedEnv::new(config_base, params).unwrap();
        let baseline = env.run_open_loop(1).unwrap();
        let mut env = QuadrupedEnv::new(perturbed_cfg, params).unwrap();
        let shoved = env.run_open_loop(1).unwrap();
        let last = baseline.trace.len().min(shoved.trace.len()) - 1;
        assert_ne!(
            baseline.trace.trunk_position[last].y,
            shoved.trace.trunk_position[last].y
        );
    }

    #[test]
    fn absolute_mode_bypasses_the_oscillators() {
        let mut config = EnvConfig::new(Task::Trot);
        config.control_mode = ControlMode::AbsoluteTargets;
        let mut env = QuadrupedEnv::new(config, presets::hand_tuned(Task::Trot)).unwrap();
        env.reset(0);
        // Holding the neutral point keeps the robot standing.
        let mut action = [0.0; ACT_DIM];
        for leg in 0..NUM_LEGS {
            action[2 * leg + 1] = -1.0 / 3.0; // z = 0.015 - 0.015 = 0
        }
        for _ in 0..30 {
            let result = env.control_tick(&action).unwrap();
            assert!(!result.done, "fell while holding the neutral stance");
        }
        assert!(env.state().trunk_position.z > 0.08);
    }
}
