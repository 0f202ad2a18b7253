//! Rigid-body simulation of the quadruped with series-elastic joints.
//!
//! The plant is a 6-DoF rigid trunk plus eight elastic joints; leg links are
//! massless with a point mass at each foot. Motors live in the trunk and act
//! on the links through linear torsional springs, so the link-side torque is
//! `k (θ − q)` per joint. Ground contact is a penalty model on the feet, and
//! motor velocities are hard-capped, which makes the springs the only path to
//! high joint velocities.

mod imu;
mod physics;

pub use imu::{read_imu, ImuNoise, ImuSample};
pub use physics::{
    commands_for_angles, contact_force, hold_commands, motor_servo, spring_torque, step_sim,
    StepInfo,
};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{forward_kinematics, inverse_kinematics, JointAngles, LegGeometry};
use crate::cpg::NUM_LEGS;

/// Eight actuated joints, ordered `[FR hip, FR knee, FL hip, FL knee, HR hip,
/// HR knee, HL hip, HL knee]`.
pub const NUM_JOINTS: usize = 2 * NUM_LEGS;

/// Physics integration step in seconds.
pub const PHYSICS_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation diverged: {quantity} became non-finite at t = {time:.3} s")]
    Diverged { quantity: String, time: f64 },
}

/// Mechanical description of the robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotModel {
    /// Trunk mass in kg (feet excluded).
    pub trunk_mass: f64,
    /// Diagonal trunk inertia in the body frame, kg·m².
    pub trunk_inertia: Vector3<f64>,
    /// Point mass at each foot, kg.
    pub foot_mass: f64,
    /// Hip positions in the body frame, `[FR, FL, HR, HL]`, meters.
    pub hip_positions: [Vector3<f64>; NUM_LEGS],
    /// Torsional spring stiffness per joint, N·m/rad.
    pub spring_stiffness: f64,
    /// Hard cap on motor velocity, rad/s.
    pub motor_vel_cap: f64,
    /// Proportional servo gain driving θ toward its command, 1/s.
    pub servo_gain: f64,
    /// Viscous damping on the link-side joints, N·m·s/rad.
    pub joint_damping: f64,
    /// Small link-side rotor inertia regularizing the leg dynamics, kg·m².
    pub joint_inertia: f64,
    /// Leg geometry shared by all four legs.
    pub leg: LegGeometry,
    /// Gravitational acceleration, m/s² (positive down).
    pub gravity: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            trunk_mass: 2.9,
            trunk_inertia: Vector3::new(0.01, 0.02, 0.02),
            foot_mass: 0.05,
            hip_positions: [
                Vector3::new(0.12, -0.06, 0.0),
                Vector3::new(0.12, 0.06, 0.0),
                Vector3::new(-0.12, -0.06, 0.0),
                Vector3::new(-0.12, 0.06, 0.0),
            ],
            spring_stiffness: 2.75,
            motor_vel_cap: 4.0,
            servo_gain: 100.0,
            joint_damping: 0.02,
            joint_inertia: 5e-5,
            leg: LegGeometry::default(),
            gravity: 9.81,
        }
    }
}

impl RobotModel {
    /// Total mass including the four foot point masses.
    pub fn total_mass(&self) -> f64 {
        self.trunk_mass + NUM_LEGS as f64 * self.foot_mass
    }

    /// Joint angles that put a foot on its neutral stance point.
    pub fn neutral_angles(&self) -> JointAngles {
        inverse_kinematics(self.leg.neutral_foot, &self.leg).angles
    }
}

/// Penalty ground-contact parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactModel {
    /// Normal penalty stiffness, N/m.
    pub ground_stiffness: f64,
    /// Normal penalty damping, N·s/m.
    pub ground_damping: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        ContactModel {
            ground_stiffness: 5000.0,
            ground_damping: 50.0,
            friction: 0.8,
        }
    }
}

/// Full dynamic state of the robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Trunk origin in the world frame, meters.
    pub trunk_position: Vector3<f64>,
    /// Body-to-world rotation.
    pub trunk_orientation: UnitQuaternion<f64>,
    /// Trunk linear velocity in the world frame, m/s.
    pub trunk_velocity: Vector3<f64>,
    /// Trunk angular velocity in the body frame, rad/s.
    pub trunk_angular_velocity: Vector3<f64>,
    /// Motor positions θ (before the springs), rad.
    pub motor_positions: [f64; NUM_JOINTS],
    /// Motor velocities θ̇, always within ±`motor_vel_cap`.
    pub motor_velocities: [f64; NUM_JOINTS],
    /// Link-side joint positions q, rad.
    pub joint_positions: [f64; NUM_JOINTS],
    /// Link-side joint velocities q̇, rad/s.
    pub joint_velocities: [f64; NUM_JOINTS],
    /// Per-leg ground contact flags from the last step.
    pub contacts: [bool; NUM_LEGS],
    /// Simulated time, seconds.
    pub time: f64,
}

impl RobotState {
    /// Robot standing with all feet on their neutral points, feet touching the
    /// ground plane exactly.
    pub fn standing(model: &RobotModel) -> Self {
        let angles = model.neutral_angles();
        Self::posed(model, model.leg.neutral_foot.z, angles)
    }

    /// Robot in the neutral pose with the trunk raised to `height` meters.
    pub fn airborne(model: &RobotModel, height: f64) -> Self {
        let angles = model.neutral_angles();
        Self::posed(model, height, angles)
    }

    fn posed(_model: &RobotModel, trunk_height: f64, angles: JointAngles) -> Self {
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            q[2 * leg] = angles.hip;
            q[2 * leg + 1] = angles.knee;
        }
        RobotState {
            trunk_position: Vector3::new(0.0, 0.0, trunk_height),
            trunk_orientation: UnitQuaternion::identity(),
            trunk_velocity: Vector3::zeros(),
            trunk_angular_velocity: Vector3::zeros(),
            motor_positions: q,
            motor_velocities: [0.0; NUM_JOINTS],
            joint_positions: q,
            joint_velocities: [0.0; NUM_JOINTS],
            contacts: [false; NUM_LEGS],
            time: 0.0,
        }
    }

    /// Joint angles of one leg.
    pub fn leg_angles(&self, leg: usize) -> JointAngles {
        JointAngles {
            hip: self.joint_positions[2 * leg],
            knee: self.joint_positions[2 * leg + 1],
        }
    }

    /// Foot position of `leg` in the body frame.
    pub fn foot_body_position(&self, leg: usize, model: &RobotModel) -> Vector3<f64> {
        let foot = forward_kinematics(self.leg_angles(leg), &model.leg);
        model.hip_positions[leg] + Vector3::new(foot.x, 0.0, -foot.z)
    }

    /// Foot position of `leg` in the world frame.
    pub fn foot_world_position(&self, leg: usize, model: &RobotModel) -> Vector3<f64> {
        self.trunk_position + self.trunk_orientation * self.foot_body_position(leg, model)
    }

    /// Foot velocity of `leg` in the world frame.
    pub fn foot_world_velocity(&self, leg: usize, model: &RobotModel) -> Vector3<f64> {
        let p_rel = self.foot_body_position(leg, model);
        let j = crate::kinematics::jacobian(self.leg_angles(leg), &model.leg);
        let qd = nalgebra::Vector2::new(
            self.joint_velocities[2 * leg],
            self.joint_velocities[2 * leg + 1],
        );
        let v_leg = j * qd;
        let v_rel = Vector3::new(v_leg.x, 0.0, -v_leg.y);
        self.trunk_velocity
            + self.trunk_orientation * (self.trunk_angular_velocity.cross(&p_rel) + v_rel)
    }

    /// Spring torques `k (θ − q)` for all joints.
    pub fn spring_torques(&self, model: &RobotModel) -> [f64; NUM_JOINTS] {
        let mut tau = [0.0; NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            tau[j] = spring_torque(
                self.motor_positions[j],
                self.joint_positions[j],
                model.spring_stiffness,
            );
        }
        tau
    }

    /// Roll, pitch, yaw of the trunk (intrinsic ZYX convention).
    pub fn trunk_euler(&self) -> (f64, f64, f64) {
        self.trunk_orientation.euler_angles()
    }

    /// Returns the name of the first non-finite quantity, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        let check_vec = |name: &str, v: &Vector3<f64>| -> Option<String> {
            if v.iter().all(|x| x.is_finite()) {
                None
            } else {
                Some(name.to_string())
            }
        };
        if let Some(bad) = check_vec("trunk position", &self.trunk_position) {
            return Some(bad);
        }
        if let Some(bad) = check_vec("trunk velocity", &self.trunk_velocity) {
            return Some(bad);
        }
        if let Some(bad) = check_vec("trunk angular velocity", &self.trunk_angular_velocity) {
            return Some(bad);
        }
        if !self
            .trunk_orientation
            .as_vector()
            .iter()
            .all(|x| x.is_finite())
        {
            return Some("trunk orientation".to_string());
        }
        for j in 0..NUM_JOINTS {
            if !self.motor_positions[j].is_finite() || !self.motor_velocities[j].is_finite() {
                return Some(format!("motor state of joint {j}"));
            }
            if !self.joint_positions[j].is_finite() || !self.joint_velocities[j].is_finite() {
                return Some(format!("joint state of joint {j}"));
            }
        }
        None
    }
}
