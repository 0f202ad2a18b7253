//! Central pattern generator: four coupled nonlinear oscillators, one per leg.
//!
//! Each oscillator evolves in polar coordinates with a phase-dependent
//! frequency:
//!
//! ```text
//! ρ̇_i = a (μ − ρ_i²) ρ_i
//! φ̇_i = ω + Σ_j ρ_j c_ij sin(φ_j − φ_i − Φ_ij)
//! ω   = ω_swing  if sin(φ_i) > 0,  ω_stance otherwise
//! ```
//!
//! The amplitude converges to √μ, the pairwise phase biases Φ_ij select the
//! gait (trot, pronk), and the oscillator output is mapped to a desired foot
//! position in the leg's sagittal plane. The `x` target is measured against
//! the direction of travel, so the swing half-cycle (sin φ > 0) carries the
//! foot toward the nose and the stance half-cycle strokes it back.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Legs are indexed `[FR, FL, HR, HL]` everywhere in this crate.
pub const NUM_LEGS: usize = 4;

/// Display names matching the fixed leg indexing convention.
pub const LEG_NAMES: [&str; NUM_LEGS] = ["FR", "FL", "HR", "HL"];

/// Largest time step the explicit-Euler oscillator update accepts, in seconds.
pub const MAX_OSCILLATOR_DT: f64 = 2e-3;

#[derive(Debug, Error, PartialEq)]
pub enum CpgError {
    #[error("oscillator time step must be in (0, {MAX_OSCILLATOR_DT}] s, got {0}")]
    InvalidTimestep(f64),
    #[error("oscillator {index} diverged to a non-finite state (rho = {rho}, phi = {phi})")]
    Diverged { index: usize, rho: f64, phi: f64 },
    #[error("coupling weight must be positive, got {0}")]
    InvalidCouplingWeight(f64),
    #[error("unsupported gait `{0}`")]
    UnsupportedGait(String),
    #[error("gait parameter `{name}` = {value} violates {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },
}

/// The five optimizable gait parameters.
///
/// `clearance` and `penetration` shape the vertical foot trajectory during
/// swing and stance, `step_length` scales the fore-aft stroke, and the two
/// frequencies set the swing/stance half-cycle durations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpgParams {
    /// Swing-phase apex height above the neutral foot point (m). Must be > 0.
    pub clearance: f64,
    /// Stance-phase pressing depth below the neutral foot point (m). ≥ 0.
    pub penetration: f64,
    /// Fore-aft stroke amplitude (m). ≥ 0.
    pub step_length: f64,
    /// Phase rate during the swing half-cycle (rad/s). Must be > 0.
    pub omega_swing: f64,
    /// Phase rate during the stance half-cycle (rad/s). Must be > 0.
    pub omega_stance: f64,
}

impl CpgParams {
    /// Checks the sign/positivity constraints on all five parameters.
    pub fn validate(&self) -> Result<(), CpgError> {
        let positive = |name: &'static str, value: f64| -> Result<(), CpgError> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(CpgError::InvalidParameter {
                    name,
                    value,
                    constraint: "> 0".to_string(),
                })
            }
        };
        let non_negative = |name: &'static str, value: f64| -> Result<(), CpgError> {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(CpgError::InvalidParameter {
                    name,
                    value,
                    constraint: ">= 0".to_string(),
                })
            }
        };
        positive("clearance", self.clearance)?;
        non_negative("penetration", self.penetration)?;
        non_negative("step_length", self.step_length)?;
        positive("omega_swing", self.omega_swing)?;
        positive("omega_stance", self.omega_stance)?;
        Ok(())
    }

    /// Frequency selected for an oscillator at phase `phi`: the swing rate on
    /// the open half-cycle sin(φ) > 0, the stance rate on the complement.
    #[inline]
    pub fn omega_at(&self, phi: f64) -> f64 {
        if phi.sin() > 0.0 {
            self.omega_swing
        } else {
            self.omega_stance
        }
    }

    /// Duration of the swing half-cycle in seconds (π of phase at ω_swing).
    #[inline]
    pub fn swing_duration(&self) -> f64 {
        PI / self.omega_swing
    }

    /// Duration of the stance half-cycle in seconds.
    #[inline]
    pub fn stance_duration(&self) -> f64 {
        PI / self.omega_stance
    }

    /// (swing, stance) half-cycle durations in seconds.
    pub fn duty_durations(&self) -> (f64, f64) {
        (self.swing_duration(), self.stance_duration())
    }

    /// Copy with the fore-aft stroke zeroed (used by gaits that jump in place).
    pub fn with_zero_step_length(mut self) -> Self {
        self.step_length = 0.0;
        self
    }
}

/// Supported gait presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gait {
    /// Diagonal pairs in phase, half-cycle offset between the two diagonals.
    Trot,
    /// All legs synchronized; the fore-aft stroke is zeroed.
    Pronk,
}

impl fmt::Display for Gait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gait::Trot => write!(f, "trot"),
            Gait::Pronk => write!(f, "pronk"),
        }
    }
}

impl FromStr for Gait {
    type Err = CpgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trot" => Ok(Gait::Trot),
            "pronk" => Ok(Gait::Pronk),
            other => Err(CpgError::UnsupportedGait(other.to_string())),
        }
    }
}

/// A gait preset: pairwise phase biases plus the zero-step-length flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaitSpec {
    pub gait: Gait,
    /// Pairwise phase biases Φ_ij (rad), antisymmetric.
    pub phase_biases: [[f64; NUM_LEGS]; NUM_LEGS],
    /// When set, the fore-aft stroke is forced to zero (pronking).
    pub zero_step_length: bool,
}

impl GaitSpec {
    /// Builds the preset for `gait` with uniform off-diagonal coupling `weight`.
    pub fn new(gait: Gait, weight: f64) -> Result<(Self, [[f64; NUM_LEGS]; NUM_LEGS]), CpgError> {
        let (couplings, phase_biases) = make_coupling(gait, weight)?;
        Ok((
            GaitSpec {
                gait,
                phase_biases,
                zero_step_length: matches!(gait, Gait::Pronk),
            },
            couplings,
        ))
    }
}

/// Coupling weights and phase biases for a gait.
///
/// Trot keeps each diagonal pair (FR with HL, FL with HR) in phase and offsets
/// the two diagonals by a half cycle; pronking synchronizes all four legs.
pub fn make_coupling(
    gait: Gait,
    weight: f64,
) -> Result<([[f64; NUM_LEGS]; NUM_LEGS], [[f64; NUM_LEGS]; NUM_LEGS]), CpgError> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(CpgError::InvalidCouplingWeight(weight));
    }
    let mut couplings = [[weight; NUM_LEGS]; NUM_LEGS];
    for (i, row) in couplings.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let phase_biases = match gait {
        Gait::Pronk => [[0.0; NUM_LEGS]; NUM_LEGS],
        Gait::Trot => {
            // Nominal phases per leg [FR, FL, HR, HL]; biases are Φ_ij = φ_j − φ_i.
            let nominal = [0.0, PI, PI, 0.0];
            let mut biases = [[0.0; NUM_LEGS]; NUM_LEGS];
            for i in 0..NUM_LEGS {
                for j in 0..NUM_LEGS {
                    biases[i][j] = nominal[j] - nominal[i];
                }
            }
            biases
        }
    };
    Ok((couplings, phase_biases))
}

/// How oscillator phases are initialized at episode start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseInit {
    /// Phases already satisfy the gait biases exactly; no lock-in transient.
    Exact,
    /// Independent uniform phases per oscillator (robustness tests).
    Random,
}

/// State and constants of the four coupled oscillators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorNetwork {
    /// Amplitudes ρ_i ≥ 0 (dimensionless).
    pub rho: [f64; NUM_LEGS],
    /// Phases φ_i, kept wrapped to [0, 2π).
    pub phi: [f64; NUM_LEGS],
    /// Squared target amplitude; the limit cycle radius is √μ.
    pub mu: f64,
    /// Convergence rate toward the limit cycle (1/s).
    pub convergence_rate: f64,
    /// Coupling weights c_ij ≥ 0, zero diagonal.
    pub couplings: [[f64; NUM_LEGS]; NUM_LEGS],
    /// Pairwise phase biases Φ_ij, antisymmetric.
    pub phase_biases: [[f64; NUM_LEGS]; NUM_LEGS],
}

/// Per-leg desired foot offset about the neutral stance point, in the leg's
/// sagittal plane. `x` is measured against the direction of travel; `z` is
/// positive upward (swing apex positive, stance penetration negative).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FootTarget {
    pub x: f64,
    pub z: f64,
}

impl OscillatorNetwork {
    /// Network for a gait preset with phases placed exactly on the gait's
    /// bias pattern and amplitudes on the limit cycle.
    pub fn for_gait(spec: &GaitSpec, couplings: [[f64; NUM_LEGS]; NUM_LEGS]) -> Self {
        let mut phi = [0.0; NUM_LEGS];
        for (i, p) in phi.iter_mut().enumerate() {
            *p = spec.phase_biases[0][i].rem_euclid(TAU);
        }
        OscillatorNetwork {
            rho: [1.0; NUM_LEGS],
            phi,
            mu: 1.0,
            convergence_rate: 20.0,
            couplings,
            phase_biases: spec.phase_biases,
        }
    }

    /// Same as [`OscillatorNetwork::for_gait`] but with the requested phase
    /// initialization. `Exact` applies a common random offset only when a
    /// jitter is wanted; pass the RNG unused for deterministic starts.
    pub fn for_gait_with_init<R: Rng>(
        spec: &GaitSpec,
        couplings: [[f64; NUM_LEGS]; NUM_LEGS],
        init: PhaseInit,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::for_gait(spec, couplings);
        if init == PhaseInit::Random {
            for p in net.phi.iter_mut() {
                *p = rng.random_range(0.0..TAU);
            }
        }
        net
    }

    /// Advances all oscillators by one explicit-Euler step.
    ///
    /// Phases are wrapped to [0, 2π) and amplitudes clamped non-negative. The
    /// per-oscillator frequency is selected from the sign of sin(φ) before the
    /// step (see [`CpgParams::omega_at`]).
    pub fn step(&self, params: &CpgParams, dt: f64) -> Result<OscillatorNetwork, CpgError> {
        if !(dt > 0.0 && dt <= MAX_OSCILLATOR_DT) {
            return Err(CpgError::InvalidTimestep(dt));
        }
        let mut next = self.clone();
        for i in 0..NUM_LEGS {
            let rho = self.rho[i];
            let rho_dot = self.convergence_rate * (self.mu - rho * rho) * rho;
            let mut phi_dot = params.omega_at(self.phi[i]);
            for j in 0..NUM_LEGS {
                if self.couplings[i][j] != 0.0 {
                    phi_dot += self.rho[j]
                        * self.couplings[i][j]
                        * (self.phi[j] - self.phi[i] - self.phase_biases[i][j]).sin();
                }
            }
            next.rho[i] = (rho + dt * rho_dot).max(0.0);
            next.phi[i] = (self.phi[i] + dt * phi_dot).rem_euclid(TAU);
            if !next.rho[i].is_finite() || !next.phi[i].is_finite() {
                return Err(CpgError::Diverged {
                    index: i,
                    rho: next.rho[i],
                    phi: next.phi[i],
                });
            }
        }
        Ok(next)
    }

    /// Desired foot offsets for all four legs.
    ///
    /// `x = Δx · ρ · cos φ` and `z = Δz · ρ · sin φ`, where Δz is the swing
    /// clearance while sin φ > 0 and the stance penetration otherwise.
    pub fn foot_targets(&self, params: &CpgParams) -> [FootTarget; NUM_LEGS] {
        let mut targets = [FootTarget::default(); NUM_LEGS];
        for i in 0..NUM_LEGS {
            let (sin_phi, cos_phi) = self.phi[i].sin_cos();
            let dz = if sin_phi > 0.0 {
                params.clearance
            } else {
                params.penetration
            };
            targets[i] = FootTarget {
                x: params.step_length * self.rho[i] * cos_phi,
                z: dz * self.rho[i] * sin_phi,
            };
        }
        targets
    }
}

/// Signed phase difference `φ_b − φ_a` wrapped to (−π, π].
pub fn wrap_phase_difference(phi_a: f64, phi_b: f64) -> f64 {
    let mut d = (phi_b - phi_a).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    d
}
