//! Trace analysis: velocity ratios, energy accounting, stance/swing patterns
//! and mean forward speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::NUM_LEGS;
use crate::kinematics;
use crate::sim::{RobotModel, NUM_JOINTS};
use crate::trace::EpisodeTrace;

/// Contact/flight intervals shorter than this are treated as chatter, s.
pub const DEBOUNCE_S: f64 = 0.02;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("velocity ratio undefined: joint {0} shows no motor motion")]
    UndefinedRatio(usize),
    #[error("joint index {0} out of range")]
    BadJointIndex(usize),
    #[error("trace too short for this metric")]
    TraceTooShort,
}

/// How the peak velocities entering the ratio are taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakMode {
    /// Maxima of the signed series.
    #[default]
    Signed,
    /// Maxima of the absolute series.
    Absolute,
}

/// Ratio of peak joint velocity to peak motor velocity for one joint.
///
/// Values above one mean the spring released energy into link motion faster
/// than the motor ever moved; a rigid drivetrain pins the ratio at one.
pub fn velocity_ratio(trace: &EpisodeTrace, joint: usize) -> Result<f64, MetricsError> {
    velocity_ratio_with(trace, joint, PeakMode::Signed)
}

/// [`velocity_ratio`] with an explicit peak convention.
pub fn velocity_ratio_with(
    trace: &EpisodeTrace,
    joint: usize,
    mode: PeakMode,
) -> Result<f64, MetricsError> {
    if joint >= NUM_JOINTS {
        return Err(MetricsError::BadJointIndex(joint));
    }
    if trace.is_empty() {
        return Err(MetricsError::TraceTooShort);
    }
    let fold = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        match mode {
            PeakMode::Signed => values.fold(f64::NEG_INFINITY, f64::max),
            PeakMode::Absolute => values.map(f64::abs).fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let motor_abs_max = trace
        .motor_velocities
        .iter()
        .map(|row| row[joint].abs())
        .fold(0.0, f64::max);
    if motor_abs_max == 0.0 {
        return Err(MetricsError::UndefinedRatio(joint));
    }
    let joint_peak = fold(&mut trace.joint_velocities.iter().map(|row| row[joint]));
    let motor_peak = fold(&mut trace.motor_velocities.iter().map(|row| row[joint]));
    Ok(joint_peak / motor_peak)
}

/// Mean of the per-joint velocity ratios over all joints with motor motion.
pub fn mean_velocity_ratio(trace: &EpisodeTrace, mode: PeakMode) -> Option<f64> {
    let ratios: Vec<f64> = (0..NUM_JOINTS)
        .filter_map(|j| velocity_ratio_with(trace, j, mode).ok())
        .collect();
    if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

/// Energy time series derived from a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub time: Vec<f64>,
    /// Total spring potential Σ ½ k (θ − q)², J.
    pub spring: Vec<f64>,
    /// Gravitational potential of the whole robot, zero-referenced at the
    /// first sample, J.
    pub gravitational: Vec<f64>,
    /// Translational kinetic energy of the center of mass, J.
    pub kinetic: Vec<f64>,
}

/// Spring, gravitational and center-of-mass kinetic energy per tick.
///
/// The center of mass combines the trunk with the four foot point masses;
/// rotational kinetic energy is deliberately left out.
pub fn energies(trace: &EpisodeTrace, model: &RobotModel) -> EnergySeries {
    let mut series = EnergySeries::default();
    let total_mass = model.total_mass();
    let mut z_ref = None;
    for i in 0..trace.len() {
        let mut spring = 0.0;
        for j in 0..NUM_JOINTS {
            let deflection = trace.motor_positions[i][j] - trace.joint_positions[i][j];
            spring += 0.5 * model.spring_stiffness * deflection * deflection;
        }

        let rot = trace.trunk_orientation[i];
        let omega = trace.trunk_angular_velocity[i];
        let mut com = trace.trunk_position[i] * model.trunk_mass;
        let mut com_vel = trace.trunk_velocity[i] * model.trunk_mass;
        for leg in 0..NUM_LEGS {
            let angles = kinematics::JointAngles {
                hip: trace.joint_positions[i][2 * leg],
                knee: trace.joint_positions[i][2 * leg + 1],
            };
            let fk = kinematics::forward_kinematics(angles, &model.leg);
            let p_rel = model.hip_positions[leg] + nalgebra::Vector3::new(fk.x, 0.0, -fk.z);
            let qd = nalgebra::Vector2::new(
                trace.joint_velocities[i][2 * leg],
                trace.joint_velocities[i][2 * leg + 1],
            );
            let v_leg = kinematics::jacobian(angles, &model.leg) * qd;
            let v_rel = nalgebra::Vector3::new(v_leg.x, 0.0, -v_leg.y);
            let p_world = trace.trunk_position[i] + rot * p_rel;
            let v_world = trace.trunk_velocity[i] + rot * (omega.cross(&p_rel) + v_rel);
            com += p_world * model.foot_mass;
            com_vel += v_world * model.foot_mass;
        }
        com /= total_mass;
        com_vel /= total_mass;

        let z_com = com.z;
        let reference = *z_ref.get_or_insert(z_com);
        series.time.push(trace.time[i]);
        series.spring.push(spring);
        series
            .gravitational
            .push(total_mass * model.gravity * (z_com - reference));
        series.kinetic.push(0.5 * total_mass * com_vel.norm_squared());
    }
    series
}

/// One leg's phase label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Stance,
    Swing,
}

/// A stance or swing interval, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub phase: Phase,
    pub start: f64,
    pub end: f64,
}

/// Per-leg partition of the episode into alternating stance/swing intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaitPattern {
    pub legs: [Vec<PhaseInterval>; NUM_LEGS],
}

/// Stance/swing intervals per leg, debounced at [`DEBOUNCE_S`].
pub fn extract_pattern(trace: &EpisodeTrace) -> GaitPattern {
    extract_pattern_with(trace, DEBOUNCE_S)
}

/// Stance/swing intervals with an explicit debounce threshold.
///
/// Intervals shorter than the threshold are absorbed into their neighbors
/// (shortest first), so penalty-contact chatter does not show up as phantom
/// steps.
pub fn extract_pattern_with(trace: &EpisodeTrace, debounce: f64) -> GaitPattern {
    let mut pattern = GaitPattern::default();
    if trace.is_empty() {
        return pattern;
    }
    let end_time = trace.time[trace.len() - 1];
    for leg in 0..NUM_LEGS {
        // Raw intervals from the contact flags. Each sample's flag holds
        // until the next sample.
        let mut intervals: Vec<PhaseInterval> = Vec::new();
        for i in 0..trace.len() {
            let phase = if trace.contacts[i][leg] {
                Phase::Stance
            } else {
                Phase::Swing
            };
            match intervals.last_mut() {
                Some(last) if last.phase == phase => last.end = end_time.max(trace.time[i]),
                _ => {
                    if let Some(last) = intervals.last_mut() {
                        last.end = trace.time[i];
                    }
                    intervals.push(PhaseInterval {
                        phase,
                        start: trace.time[i],
                        end: end_time,
                    });
                }
            }
        }
        // Absorb sub-threshold intervals, shortest first. Merging flips the
        // short interval's phase, so its neighbors coalesce with it.
        loop {
            if intervals.len() <= 1 {
                break;
            }
            let (idx, duration) = intervals
                .iter()
                .enumerate()
                .map(|(i, iv)| (i, iv.end - iv.start))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if duration >= debounce {
                break;
            }
            let removed = intervals.remove(idx);
            if idx > 0 && idx < intervals.len() {
                // Bridge the two (now same-phase) neighbors.
                let right = intervals.remove(idx);
                intervals[idx - 1].end = right.end;
            } else if idx == 0 {
                intervals[0].start = removed.start;
            } else {
                intervals[idx - 1].end = removed.end;
            }
        }
        pattern.legs[leg] = intervals;
    }
    pattern
}

/// Signed mean forward speed over the episode, m/s.
pub fn mean_forward_speed(trace: &EpisodeTrace) -> Result<f64, MetricsError> {
    if trace.len() < 2 || trace.duration() <= 0.0 {
        return Err(MetricsError::TraceTooShort);
    }
    let dx = trace.trunk_position[trace.len() - 1].x - trace.trunk_position[0].x;
    Ok(dx / trace.duration())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::FootTarget;
    use crate::sim::RobotState;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Builds a synthetic trace at `hz` with caller-provided row tweaks.
    fn synthetic_trace(
        ticks: usize,
        hz: f64,
        mut tweak: impl FnMut(usize, &mut RobotState),
    ) -> EpisodeTrace {
        let model = RobotModel::default();
        let mut trace = EpisodeTrace::default();
        let targets = [FootTarget::default(); NUM_LEGS];
        for i in 0..ticks {
            let mut state = RobotState::standing(&model);
            state.time = i as f64 / hz;
            tweak(i, &mut state);
            trace.push_state(&state, &model, &targets);
        }
        trace
    }

    #[test]
    fn rigid_coupling_gives_unit_ratio() {
        let trace = synthetic_trace(100, 30.0, |i, s| {
            let v = (i as f64 * 0.4).sin() * 3.0;
            s.motor_velocities = [v; NUM_JOINTS];
            s.joint_velocities = [v; NUM_JOINTS];
        });
        assert_relative_eq!(velocity_ratio(&trace, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn known_peaks_give_expected_ratios() {
        let trace = synthetic_trace(100, 30.0, |i, s| {
            s.motor_velocities = [if i == 40 { 4.0 } else { 0.5 }; NUM_JOINTS];
            s.joint_velocities = [if i == 55 { 14.0 } else { 0.2 }; NUM_JOINTS];
        });
        assert_relative_eq!(velocity_ratio(&trace, 3).unwrap(), 3.5, epsilon = 1e-12);

        let trace = synthetic_trace(100, 30.0, |i, s| {
            s.motor_velocities = [if i == 40 { 4.0 } else { 0.5 }; NUM_JOINTS];
            s.joint_velocities = [if i == 55 { 8.0 } else { 0.2 }; NUM_JOINTS];
        });
        assert_relative_eq!(velocity_ratio(&trace, 0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_motor_motion_is_an_error() {
        let trace = synthetic_trace(10, 30.0, |_, s| {
            s.joint_velocities = [1.0; NUM_JOINTS];
        });
        assert_eq!(
            velocity_ratio(&trace, 2),
            Err(MetricsError::UndefinedRatio(2))
        );
    }

    #[test]
    fn absolute_mode_uses_magnitude_peaks() {
        let trace = synthetic_trace(50, 30.0, |i, s| {
            s.motor_velocities = [if i == 10 { -4.0 } else { 1.0 }; NUM_JOINTS];
            s.joint_velocities = [if i == 20 { -12.0 } else { 2.0 }; NUM_JOINTS];
        });
        assert_relative_eq!(
            velocity_ratio_with(&trace, 0, PeakMode::Absolute).unwrap(),
            3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn undeflected_springs_store_nothing() {
        let trace = synthetic_trace(20, 30.0, |_, _| {});
        let model = RobotModel::default();
        let series = energies(&trace, &model);
        assert!(series.spring.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_deflection_energy_matches_hand_value() {
        let trace = synthetic_trace(1, 30.0, |_, s| {
            s.motor_positions[5] = s.joint_positions[5] + 0.2;
        });
        let model = RobotModel::default();
        let series = energies(&trace, &model);
        assert_relative_eq!(series.spring[0], 0.055, max_relative = 1e-12);
    }

    #[test]
    fn resting_com_has_zero_kinetic_energy() {
        let trace = synthetic_trace(10, 30.0, |_, _| {});
        let model = RobotModel::default();
        let series = energies(&trace, &model);
        assert!(series.kinetic.iter().all(|&e| e == 0.0));
        assert!(series.gravitational.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn always_on_contact_is_one_stance_interval() {
        let trace = synthetic_trace(60, 30.0, |_, s| {
            s.contacts = [true; NUM_LEGS];
        });
        let pattern = extract_pattern(&trace);
        for leg in 0..NUM_LEGS {
            assert_eq!(pattern.legs[leg].len(), 1);
            assert_eq!(pattern.legs[leg][0].phase, Phase::Stance);
        }
    }

    #[test]
    fn square_wave_contact_alternates() {
        // 2 Hz square wave sampled at 1 kHz: 0.25 s on, 0.25 s off.
        let trace = synthetic_trace(2000, 1000.0, |i, s| {
            let t = i as f64 / 1000.0;
            s.contacts = [(t % 0.5) < 0.25; NUM_LEGS];
        });
        let pattern = extract_pattern(&trace);
        let intervals = &pattern.legs[0];
        assert!(intervals.len() >= 6);
        for window in intervals.windows(2) {
            assert_ne!(window[0].phase, window[1].phase);
            assert_relative_eq!(window[0].end, window[1].start, epsilon = 1e-12);
        }
        for iv in &intervals[1..intervals.len() - 1] {
            assert_relative_eq!(iv.end - iv.start, 0.25, epsilon = 2e-3);
        }
    }

    #[test]
    fn short_blip_is_absorbed() {
        // 5 ms contact blip inside a long flight phase.
        let trace = synthetic_trace(1000, 1000.0, |i, s| {
            s.contacts = [(500..505).contains(&i); NUM_LEGS];
        });
        let pattern = extract_pattern(&trace);
        assert_eq!(pattern.legs[0].len(), 1);
        assert_eq!(pattern.legs[0][0].phase, Phase::Swing);
    }

    #[test]
    fn stationary_robot_has_zero_speed() {
        let trace = synthetic_trace(150, 30.0, |_, _| {});
        assert_eq!(mean_forward_speed(&trace).unwrap(), 0.0);
    }

    #[test]
    fn advancing_and_drifting_speeds_are_signed() {
        let trace = synthetic_trace(151, 30.0, |i, s| {
            s.trunk_position.x = 1.7 * (i as f64 / 150.0);
        });
        assert_relative_eq!(
            mean_forward_speed(&trace).unwrap(),
            1.7 / 5.0,
            max_relative = 1e-9
        );

        let trace = synthetic_trace(151, 30.0, |i, s| {
            s.trunk_position.x = -0.5 * (i as f64 / 150.0);
        });
        assert_relative_eq!(
            mean_forward_speed(&trace).unwrap(),
            -0.1,
            max_relative = 1e-9
        );
    }

    proptest! {
        #[test]
        fn proportional_joint_series_scale_the_ratio(c in 0.1f64..10.0) {
            let trace = synthetic_trace(80, 30.0, |i, s| {
                let v = (i as f64 * 0.3).sin() * 2.0 + 0.3;
                s.motor_velocities = [v; NUM_JOINTS];
                s.joint_velocities = [c * v; NUM_JOINTS];
            });
            let r = velocity_ratio(&trace, 0).unwrap();
            prop_assert!((r - c).abs() < 1e-9);
        }

        #[test]
        fn pattern_round_trips_interval_boundaries(
            seed in 0u64..1000, period_ticks in 10usize..40
        ) {
            // Synthetic alternating pattern at 30 Hz; period >= 10 ticks so
            // every interval survives the debounce.
            let _ = seed;
            let hz = 30.0;
            let trace = synthetic_trace(300, hz, |i, s| {
                s.contacts = [(i / period_ticks) % 2 == 0; NUM_LEGS];
            });
            let pattern = extract_pattern(&trace);
            let tick = 1.0 / hz;
            for iv in &pattern.legs[0] {
                let start_ticks = iv.start / tick;
                let err = (start_ticks - start_ticks.round()).abs();
                prop_assert!(err < 1e-6);
                // Interior boundaries land on multiples of the period.
                if iv.start > 0.0 {
                    let phase_ticks = start_ticks.round() as usize % period_ticks;
                    prop_assert_eq!(phase_ticks, 0);
                }
            }
        }

        #[test]
        fn spring_energy_jumps_bounded_by_velocity_cap(step_cmd in -0.5f64..0.5) {
            // Simulated: motors slew at most cap*dt per tick, joints move at
            // observed speed; the per-tick spring energy change is bounded by
            // ½k(|Δθ|+|Δq|)(|d0|+|d1|).
            let model = RobotModel::default();
            let cap = model.motor_vel_cap;
            let hz = 30.0;
            let dt = 1.0 / hz;
            let mut theta: f64 = 0.0;
            let mut q: f64 = 0.2;
            let trace = synthetic_trace(120, hz, |_, s| {
                let error: f64 = step_cmd - theta;
                theta += error.signum() * (cap * dt).min(error.abs());
                q = 0.9 * q + 0.1 * theta;
                s.motor_positions = [theta; NUM_JOINTS];
                s.joint_positions = [q; NUM_JOINTS];
            });
            let series = energies(&trace, &model);
            for i in 1..series.spring.len() {
                let d0 = (trace.motor_positions[i - 1][0] - trace.joint_positions[i - 1][0]).abs();
                let d1 = (trace.motor_positions[i][0] - trace.joint_positions[i][0]).abs();
                let dq = (trace.joint_positions[i][0] - trace.joint_positions[i - 1][0]).abs();
                let dtheta = (trace.motor_positions[i][0] - trace.motor_positions[i - 1][0]).abs();
                prop_assert!(dtheta <= cap * dt + 1e-9);
                let bound = 0.5 * model.spring_stiffness * (dtheta + dq) * (d0 + d1)
                    * NUM_JOINTS as f64 + 1e-12;
                let jump = (series.spring[i] - series.spring[i - 1]).abs();
                prop_assert!(jump <= bound, "jump {} > bound {}", jump, bound);
            }
        }
    }
}
