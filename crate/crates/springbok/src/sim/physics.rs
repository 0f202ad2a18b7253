//! Core dynamics step: motor servos, spring torques, leg/foot dynamics,
//! penalty contact and trunk integration.
//!
//! Per step, each leg's generalized dynamics are
//!
//! ```text
//! (Jᵀ m J + I_j + dt·d) q̈ = τ_spring − d q̇ − Jᵀ m J̇ q̇ + Jᵀ f_ext
//! ```
//!
//! with `f_ext` the planar projection of contact force plus `m (g − a_trunk)`
//! in the body frame. The trunk's linear acceleration couples linearly to all
//! four leg accelerations, so it is solved exactly from a 3×3 system instead
//! of lagging one step behind; in free fall this keeps the feet perfectly
//! still relative to the trunk. The chain reaction force on the trunk is the
//! foot's momentum rate minus the external forces acting on it, applied at
//! the foot position, which conserves linear and angular momentum of the
//! whole assembly.

use nalgebra::{Matrix2, Matrix3, UnitQuaternion, Vector2, Vector3};

use super::{ContactModel, RobotModel, RobotState, SimError, NUM_JOINTS};
use crate::cpg::NUM_LEGS;
use crate::kinematics::{forward_kinematics, jacobian, jacobian_dot, JointAngles};

/// Link-side torque inferred from the spring deflection, `τ = k (θ − q)`.
#[inline]
pub fn spring_torque(theta: f64, q: f64, stiffness: f64) -> f64 {
    stiffness * (theta - q)
}

/// Advances a motor toward its commanded position at a velocity-capped rate.
///
/// Returns the new position and the applied velocity; the magnitude of the
/// velocity never exceeds `cap`.
#[inline]
pub fn motor_servo(theta: f64, theta_cmd: f64, dt: f64, cap: f64, gain: f64) -> (f64, f64) {
    let error = theta_cmd - theta;
    let rate = (gain * error.abs()).min(cap);
    let theta_dot = rate.copysign(error);
    (theta + dt * theta_dot, theta_dot)
}

/// Ground reaction force on a foot, world frame.
///
/// Zero above the plane; below it, a damped penalty normal force clamped
/// non-negative plus regularized Coulomb friction opposing the tangential
/// velocity.
pub fn contact_force(foot_pos: Vector3<f64>, foot_vel: Vector3<f64>, model: &ContactModel) -> Vector3<f64> {
    if foot_pos.z > 0.0 {
        return Vector3::zeros();
    }
    let normal = (-model.ground_stiffness * foot_pos.z - model.ground_damping * foot_vel.z).max(0.0);
    let tangential = Vector3::new(foot_vel.x, foot_vel.y, 0.0);
    let speed = tangential.norm();
    let mut force = Vector3::new(0.0, 0.0, normal);
    if speed > 1e-9 {
        let magnitude = (model.friction * normal).min(model.ground_damping * speed);
        force -= tangential * (magnitude / speed);
    }
    force
}

/// Per-step diagnostics from [`step_sim`].
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    /// Normal contact force per leg, N (≥ 0 by construction).
    pub normal_forces: [f64; NUM_LEGS],
}

struct LegPartial {
    jac: Matrix2<f64>,
    m_inv: Matrix2<f64>,
    /// Leg-plane relative acceleration with the trunk term removed.
    accel_free: Vector2<f64>,
    /// Sensitivity of the relative acceleration to the leg-plane trunk term.
    gain: Matrix2<f64>,
    qdd_free: Vector2<f64>,
    p_rel: Vector3<f64>,
    contact_world: Vector3<f64>,
    jdot_qd: Vector2<f64>,
}

/// Body-frame vector → leg sagittal plane (x nose-ward, z down).
#[inline]
fn to_leg_plane(v: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(v.x, -v.z)
}

/// Leg sagittal plane → body-frame vector.
#[inline]
fn from_leg_plane(v: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(v.x, 0.0, -v.y)
}

/// Advances the full robot state by one physics step of length `dt`.
pub fn step_sim(
    state: &RobotState,
    motor_cmds: &[f64; NUM_JOINTS],
    model: &RobotModel,
    contact: &ContactModel,
    dt: f64,
) -> Result<(RobotState, StepInfo), SimError> {
    let mut next = state.clone();
    let rot = state.trunk_orientation;
    let gravity_world = Vector3::new(0.0, 0.0, -model.gravity);
    let gravity_body = rot.inverse_transform_vector(&gravity_world);

    // Motor servos first; the springs see the updated motor positions.
    for j in 0..NUM_JOINTS {
        let (theta, theta_dot) = motor_servo(
            state.motor_positions[j],
            motor_cmds[j],
            dt,
            model.motor_vel_cap,
            model.servo_gain,
        );
        next.motor_positions[j] = theta;
        next.motor_velocities[j] = theta_dot;
    }

    let m_foot = model.foot_mass;
    let mut info = StepInfo::default();
    let mut partials: [Option<LegPartial>; NUM_LEGS] = [None, None, None, None];

    // Leg dynamics split into the part independent of the trunk acceleration
    // and the linear sensitivity to it.
    for leg in 0..NUM_LEGS {
        let angles = state.leg_angles(leg);
        let qd = Vector2::new(
            state.joint_velocities[2 * leg],
            state.joint_velocities[2 * leg + 1],
        );
        let jac = jacobian(angles, &model.leg);
        let jdot = jacobian_dot(angles, qd, &model.leg);
        let jdot_qd = jdot * qd;

        let fk = forward_kinematics(angles, &model.leg);
        let p_rel = model.hip_positions[leg] + Vector3::new(fk.x, 0.0, -fk.z);
        let p_world = state.trunk_position + rot * p_rel;
        let v_rel_body = from_leg_plane(&(jac * qd));
        let v_world = state.trunk_velocity
            + rot * (state.trunk_angular_velocity.cross(&p_rel) + v_rel_body);

        let contact_world = contact_force(p_world, v_world, contact);
        info.normal_forces[leg] = contact_world.z;
        next.contacts[leg] = contact_world.z > 0.0;

        let tau = Vector2::new(
            spring_torque(
                next.motor_positions[2 * leg],
                state.joint_positions[2 * leg],
                model.spring_stiffness,
            ),
            spring_torque(
                next.motor_positions[2 * leg + 1],
                state.joint_positions[2 * leg + 1],
                model.spring_stiffness,
            ),
        );

        // Generalized mass with the rotor-inertia regularizer; joint damping
        // is folded in implicitly for stability.
        let mut mass = jac.transpose() * jac * m_foot;
        let diag = model.joint_inertia + dt * model.joint_damping;
        mass[(0, 0)] += diag;
        mass[(1, 1)] += diag;
        let m_inv = mass.try_inverse().expect("leg mass matrix is positive definite");

        let contact_leg = to_leg_plane(&rot.inverse_transform_vector(&contact_world));
        let rhs_free = tau - qd * model.joint_damping - jac.transpose() * (jdot_qd * m_foot)
            + jac.transpose() * contact_leg;
        let qdd_free = m_inv * rhs_free;
        let accel_free = jac * qdd_free + jdot_qd;
        let gain = jac * m_inv * jac.transpose() * m_foot;

        partials[leg] = Some(LegPartial {
            jac,
            m_inv,
            accel_free,
            gain,
            qdd_free,
            p_rel,
            contact_world,
            jdot_qd,
        });
    }

    // Solve the trunk's linear acceleration exactly. With u = g_b − a_b the
    // balance of trunk and foot momentum gives
    //   [(m_t + 4 m_f) I − m_f Σ L_i] u = m_f Σ lift(accel_free,i) − Σ F_c,i
    // where L_i(u) = lift(G_i · planar(u)).
    let mut system = Matrix3::identity() * model.total_mass();
    let mut rhs = Vector3::zeros();
    for partial in partials.iter().flatten() {
        // L_i in body coordinates: columns are responses to unit u axes.
        for axis in 0..3 {
            let mut unit = Vector3::zeros();
            unit[axis] = 1.0;
            let response = from_leg_plane(&(partial.gain * to_leg_plane(&unit)));
            for row in 0..3 {
                system[(row, axis)] -= m_foot * response[row];
            }
        }
        rhs += from_leg_plane(&partial.accel_free) * m_foot
            - rot.inverse_transform_vector(&partial.contact_world);
    }
    let u = system
        .lu()
        .solve(&rhs)
        .expect("trunk coupling system is diagonally dominant");
    let trunk_accel_body = gravity_body - u;
    let trunk_accel_world = rot * trunk_accel_body;

    // Finish the legs with the resolved trunk term and accumulate reactions.
    let mut torque_body = Vector3::zeros();
    for leg in 0..NUM_LEGS {
        let partial = partials[leg].as_ref().unwrap();
        let u_leg = to_leg_plane(&u);
        let qdd = partial.qdd_free + partial.m_inv * (partial.jac.transpose() * u_leg * m_foot);
        let accel_rel = from_leg_plane(&(partial.jac * qdd + partial.jdot_qd));
        let f_ext_body = rot.inverse_transform_vector(&partial.contact_world) + u * m_foot;
        let chain_force = accel_rel * m_foot - f_ext_body;
        torque_body += partial.p_rel.cross(&(-chain_force));

        next.joint_velocities[2 * leg] += dt * qdd.x;
        next.joint_velocities[2 * leg + 1] += dt * qdd.y;
        next.joint_positions[2 * leg] += dt * next.joint_velocities[2 * leg];
        next.joint_positions[2 * leg + 1] += dt * next.joint_velocities[2 * leg + 1];
    }

    // Trunk: semi-implicit Euler, angular dynamics with the gyroscopic term.
    next.trunk_velocity = state.trunk_velocity + trunk_accel_world * dt;
    next.trunk_position = state.trunk_position + next.trunk_velocity * dt;

    let inertia = model.trunk_inertia;
    let omega = state.trunk_angular_velocity;
    let momentum = Vector3::new(
        inertia.x * omega.x,
        inertia.y * omega.y,
        inertia.z * omega.z,
    );
    let omega_dot = Vector3::new(
        (torque_body.x - omega.cross(&momentum).x) / inertia.x,
        (torque_body.y - omega.cross(&momentum).y) / inertia.y,
        (torque_body.z - omega.cross(&momentum).z) / inertia.z,
    );
    next.trunk_angular_velocity = omega + omega_dot * dt;
    let delta = UnitQuaternion::from_scaled_axis(next.trunk_angular_velocity * dt);
    next.trunk_orientation = rot * delta;
    next.trunk_orientation.renormalize();

    next.time = state.time + dt;

    if let Some(quantity) = next.first_non_finite() {
        return Err(SimError::Diverged {
            quantity,
            time: next.time,
        });
    }
    Ok((next, info))
}

/// Commands that freeze the motors at their current positions.
pub fn hold_commands(state: &RobotState) -> [f64; NUM_JOINTS] {
    state.motor_positions
}

/// Joint-angle commands reaching the given per-leg foot targets, leg plane.
pub fn commands_for_angles(angles: &[JointAngles; NUM_LEGS]) -> [f64; NUM_JOINTS] {
    let mut cmds = [0.0; NUM_JOINTS];
    for leg in 0..NUM_LEGS {
        cmds[2 * leg] = angles[leg].hip;
        cmds[2 * leg + 1] = angles[leg].knee;
    }
    cmds
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> RobotModel {
        RobotModel::default()
    }

    #[test]
    fn spring_torque_matches_deflection() {
        assert_eq!(spring_torque(0.3, 0.3, 2.75), 0.0);
        assert_relative_eq!(spring_torque(0.5, 0.3, 2.75), 0.55, max_relative = 1e-12);
        // Antisymmetry.
        assert_eq!(
            spring_torque(0.7, 0.2, 2.75),
            -spring_torque(0.2, 0.7, 2.75)
        );
    }

    #[test]
    fn servo_saturates_at_the_cap() {
        let (theta, theta_dot) = motor_servo(0.0, 1.0, 1e-3, 4.0, 100.0);
        assert_relative_eq!(theta, 0.004, max_relative = 1e-12);
        assert_relative_eq!(theta_dot, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn servo_at_target_stays_put() {
        let (theta, theta_dot) = motor_servo(0.7, 0.7, 1e-3, 4.0, 100.0);
        assert_eq!(theta, 0.7);
        assert_eq!(theta_dot, 0.0);
    }

    #[test]
    fn servo_unsaturated_branch_is_proportional() {
        let (_, theta_dot) = motor_servo(0.0, 1e-5, 1e-3, 4.0, 100.0);
        assert_relative_eq!(theta_dot, 1e-3, max_relative = 1e-12);
        assert!(theta_dot < 4.0);
    }

    #[test]
    fn servo_never_exceeds_cap() {
        for cmd in [-10.0, -0.5, 0.0, 0.3, 25.0] {
            let (_, theta_dot) = motor_servo(0.1, cmd, 1e-3, 4.0, 100.0);
            assert!(theta_dot.abs() <= 4.0);
        }
    }

    #[test]
    fn no_force_above_ground() {
        let f = contact_force(
            Vector3::new(0.0, 0.0, 0.01),
            Vector3::new(1.0, 0.0, -3.0),
            &ContactModel::default(),
        );
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn penetration_produces_upward_normal() {
        let f = contact_force(
            Vector3::new(0.0, 0.0, -0.001),
            Vector3::zeros(),
            &ContactModel::default(),
        );
        assert_relative_eq!(f.z, 5.0, max_relative = 1e-12);
        assert_eq!(f.x, 0.0);
    }

    #[test]
    fn separating_contact_never_pulls_down() {
        let f = contact_force(
            Vector3::new(0.0, 0.0, -0.001),
            Vector3::new(0.0, 0.0, 1.0),
            &ContactModel::default(),
        );
        assert_eq!(f.z, 0.0);
    }

    #[test]
    fn friction_opposes_sliding() {
        let f = contact_force(
            Vector3::new(0.0, 0.0, -0.002),
            Vector3::new(0.5, 0.0, 0.0),
            &ContactModel::default(),
        );
        assert!(f.x < 0.0);
        assert!(f.z > 0.0);
        // Coulomb bound.
        let tangential = (f.x * f.x + f.y * f.y).sqrt();
        assert!(tangential <= 0.8 * f.z + 1e-12);
    }

    #[test]
    fn equilibrium_without_gravity_is_a_fixed_point() {
        let mut model = model();
        model.gravity = 0.0;
        let state = RobotState::airborne(&model, 0.5);
        let cmds = hold_commands(&state);
        let (next, _) = step_sim(&state, &cmds, &model, &ContactModel::default(), 1e-3).unwrap();
        assert_eq!(next.trunk_velocity, Vector3::zeros());
        assert_eq!(next.trunk_position, state.trunk_position);
        assert_eq!(next.joint_velocities, [0.0; NUM_JOINTS]);
        assert_eq!(next.joint_positions, state.joint_positions);
    }

    #[test]
    fn ballistic_flight_matches_closed_form() {
        let model = model();
        let mut state = RobotState::airborne(&model, 1.0);
        let cmds = state.motor_positions;
        let contact = ContactModel::default();
        for _ in 0..100 {
            let (next, _) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
            state = next;
        }
        assert_relative_eq!(state.trunk_velocity.z, -0.981, epsilon = 1e-6);
        // Free fall with undeflected springs: the legs do not move at all.
        for leg in 0..NUM_LEGS {
            assert!(state.joint_velocities[2 * leg].abs() < 1e-9);
            assert!(state.joint_velocities[2 * leg + 1].abs() < 1e-9);
        }
    }

    #[test]
    fn motor_velocity_cap_holds_under_aggressive_commands() {
        let model = model();
        let mut state = RobotState::standing(&model);
        let contact = ContactModel::default();
        let mut cmds = state.motor_positions;
        for step in 0..2000 {
            if step % 200 == 0 {
                for c in cmds.iter_mut() {
                    *c = -*c + 0.8;
                }
            }
            let (next, _) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
            state = next;
            for j in 0..NUM_JOINTS {
                assert!(state.motor_velocities[j].abs() <= model.motor_vel_cap + 1e-12);
            }
        }
    }

    #[test]
    fn normal_forces_never_negative_during_drop() {
        let model = model();
        let mut state = RobotState::airborne(&model, 0.3);
        let contact = ContactModel::default();
        let cmds = state.motor_positions;
        for _ in 0..3000 {
            let (next, info) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
            for n in info.normal_forces {
                assert!(n >= 0.0);
            }
            state = next;
        }
    }

    #[test]
    fn passive_drop_settles() {
        let model = model();
        let mut state = RobotState::airborne(&model, 0.3);
        let contact = ContactModel::default();
        let cmds = state.motor_positions;
        for _ in 0..3000 {
            let (next, _) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
            state = next;
        }
        let ke = 0.5 * model.trunk_mass * state.trunk_velocity.norm_squared()
            + 0.5
                * state
                    .trunk_angular_velocity
                    .component_mul(&model.trunk_inertia)
                    .dot(&state.trunk_angular_velocity);
        assert!(ke < 1e-3, "trunk kinetic energy {ke} J after 3 s");
    }

    #[test]
    fn flight_phase_conserves_mechanical_energy() {
        let mut model = model();
        model.joint_damping = 0.0;
        let mut state = RobotState::airborne(&model, 1.0);
        // Preload the springs so energy actually sloshes between stores.
        for j in 0..NUM_JOINTS {
            state.motor_positions[j] += if j % 2 == 0 { 0.2 } else { -0.15 };
        }
        let cmds = state.motor_positions;
        let contact = ContactModel::default();

        let energy = |s: &RobotState| -> f64 {
            let mut e = 0.5 * model.trunk_mass * s.trunk_velocity.norm_squared()
                + model.trunk_mass * model.gravity * s.trunk_position.z;
            for leg in 0..NUM_LEGS {
                let p = s.foot_world_position(leg, &model);
                let v = s.foot_world_velocity(leg, &model);
                e += 0.5 * model.foot_mass * v.norm_squared() + model.foot_mass * model.gravity * p.z;
            }
            for j in 0..NUM_JOINTS {
                let deflection = s.motor_positions[j] - s.joint_positions[j];
                e += 0.5 * model.spring_stiffness * deflection * deflection;
                e += 0.5 * model.joint_inertia * s.joint_velocities[j] * s.joint_velocities[j];
            }
            e
        };

        let e0 = energy(&state);
        for _ in 0..300 {
            let (next, info) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
            assert_eq!(info.normal_forces, [0.0; NUM_LEGS], "unexpected contact");
            state = next;
        }
        let e1 = energy(&state);
        let drift = ((e1 - e0) / e0).abs();
        assert!(drift < 0.01, "energy drift {drift} over 0.3 s (e0={e0}, e1={e1})");
    }

    #[test]
    fn fixed_seedless_step_is_deterministic() {
        let model = model();
        let contact = ContactModel::default();
        let run = || {
            let mut state = RobotState::airborne(&model, 0.25);
            let mut cmds = state.motor_positions;
            let mut trace = Vec::new();
            for step in 0..1500 {
                if step == 300 {
                    for c in cmds.iter_mut() {
                        *c += 0.3;
                    }
                }
                let (next, _) = step_sim(&state, &cmds, &model, &contact, 1e-3).unwrap();
                state = next;
                trace.push(state.clone());
            }
            trace
        };
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.trunk_position, y.trunk_position);
            assert_eq!(x.joint_positions, y.joint_positions);
            assert_eq!(x.joint_velocities, y.joint_velocities);
        }
    }
}
