//! The five-dimensional gait parameter search space.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::CpgParams;

/// Number of optimized gait parameters.
pub const NUM_PARAMS: usize = 5;

/// Parameter names in storage order.
pub const PARAM_NAMES: [&str; NUM_PARAMS] = [
    "clearance",
    "penetration",
    "step_length",
    "omega_swing",
    "omega_stance",
];

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("dimension {0}: lower bound {1} must be below upper bound {2}")]
    EmptyRange(usize, f64, f64),
    #[error("dimension {0}: log scale requires positive bounds, got [{1}, {2}]")]
    LogBounds(usize, f64, f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// Bounds and scale for one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl ParamRange {
    pub fn linear(lower: f64, upper: f64) -> Self {
        ParamRange {
            lower,
            upper,
            scale: Scale::Linear,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }

    /// Maps into the space the kernel density operates in.
    pub(crate) fn transform(&self, value: f64) -> f64 {
        match self.scale {
            Scale::Linear => value,
            Scale::Log => value.ln(),
        }
    }

    pub(crate) fn untransform(&self, value: f64) -> f64 {
        match self.scale {
            Scale::Linear => value,
            Scale::Log => value.exp(),
        }
    }

    pub(crate) fn transformed_bounds(&self) -> (f64, f64) {
        (self.transform(self.lower), self.transform(self.upper))
    }
}

/// Search space over the five gait parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ranges: [ParamRange; NUM_PARAMS],
}

impl Default for SearchSpace {
    /// Bounds bracketing both the hand-tuned and the optimized gaits:
    /// clearance 5–60 mm, penetration 0–30 mm, step length 0–80 mm, and both
    /// phase rates between 0.5 Hz and 8 Hz cycles.
    fn default() -> Self {
        use std::f64::consts::PI;
        SearchSpace {
            ranges: [
                ParamRange::linear(0.005, 0.06),
                ParamRange::linear(0.0, 0.03),
                ParamRange::linear(0.0, 0.08),
                ParamRange::linear(2.0 * PI * 0.5, 2.0 * PI * 8.0),
                ParamRange::linear(2.0 * PI * 0.5, 2.0 * PI * 8.0),
            ],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SpaceError> {
        for (dim, range) in self.ranges.iter().enumerate() {
            if !(range.lower < range.upper) {
                return Err(SpaceError::EmptyRange(dim, range.lower, range.upper));
            }
            if range.scale == Scale::Log && range.lower <= 0.0 {
                return Err(SpaceError::LogBounds(dim, range.lower, range.upper));
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[f64; NUM_PARAMS]) -> bool {
        self.ranges
            .iter()
            .zip(point.iter())
            .all(|(range, &value)| range.contains(value))
    }

    /// Uniform sample (uniform in log space for log-scaled dimensions).
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> [f64; NUM_PARAMS] {
        let mut point = [0.0; NUM_PARAMS];
        for (slot, range) in point.iter_mut().zip(self.ranges.iter()) {
            let (lo, hi) = range.transformed_bounds();
            *slot = range.untransform(rng.random_range(lo..hi));
        }
        point
    }

    pub fn to_params(&self, point: &[f64; NUM_PARAMS]) -> CpgParams {
        CpgParams {
            clearance: point[0],
            penetration: point[1],
            step_length: point[2],
            omega_swing: point[3],
            omega_stance: point[4],
        }
    }

    pub fn from_params(&self, params: &CpgParams) -> [f64; NUM_PARAMS] {
        [
            params.clearance,
            params.penetration,
            params.step_length,
            params.omega_swing,
            params.omega_stance,
        ]
    }
}
