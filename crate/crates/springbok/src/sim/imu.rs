//! Synthetic IMU: body-frame specific force and angular rate.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::RobotState;

/// Zero-mean Gaussian noise standard deviations per sensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuNoise {
    /// Accelerometer noise std per axis, m/s².
    pub accel_std: f64,
    /// Gyroscope noise std per axis, rad/s.
    pub gyro_std: f64,
}

/// One IMU reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    /// Specific force in the body frame, m/s² (reads +g upward at rest).
    pub linear_acceleration: Vector3<f64>,
    /// Angular velocity in the body frame, rad/s.
    pub angular_velocity: Vector3<f64>,
}

/// Reads the IMU between two states separated by `dt` seconds.
///
/// The accelerometer reports the finite-difference acceleration minus
/// gravity, rotated into the body frame, so it measures specific force:
/// `(0, 0, +g)` at rest and zero in free fall. Noise is only sampled when the
/// corresponding standard deviation is positive.
pub fn read_imu<R: Rng>(
    state_prev: &RobotState,
    state: &RobotState,
    dt: f64,
    noise: &ImuNoise,
    rng: &mut R,
) -> ImuSample {
    debug_assert!(dt > 0.0);
    let gravity = Vector3::new(0.0, 0.0, -9.81);
    let accel_world = (state.trunk_velocity - state_prev.trunk_velocity) / dt;
    let mut linear_acceleration = state
        .trunk_orientation
        .inverse_transform_vector(&(accel_world - gravity));
    let mut angular_velocity = state.trunk_angular_velocity;

    if noise.accel_std > 0.0 {
        let dist = Normal::new(0.0, noise.accel_std).expect("valid std");
        for axis in 0..3 {
            linear_acceleration[axis] += dist.sample(rng);
        }
    }
    if noise.gyro_std > 0.0 {
        let dist = Normal::new(0.0, noise.gyro_std).expect("valid std");
        for axis in 0..3 {
            angular_velocity[axis] += dist.sample(rng);
        }
    }

    ImuSample {
        linear_acceleration,
        angular_velocity,
    }
}
