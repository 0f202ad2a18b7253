//! Planar two-segment leg kinematics.
//!
//! The leg lives in its sagittal plane: `x` points toward the nose, `z` is
//! measured downward-positive from the hip. Joint angles are zero with the
//! leg fully extended straight down; the knee angle is kept on the backward
//! (cat-like) branch, so it is non-negative everywhere in the workspace.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Margin kept away from the workspace boundary when clamping, in meters.
pub const WORKSPACE_MARGIN: f64 = 1e-6;

/// Geometry of one leg: two segments and the neutral stance point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegGeometry {
    /// Thigh (hip-to-knee) length in meters.
    pub thigh: f64,
    /// Shank (knee-to-foot) length in meters.
    pub shank: f64,
    /// Neutral foot point below the hip, in the leg plane (x, z-down), meters.
    pub neutral_foot: FootPoint,
}

impl Default for LegGeometry {
    fn default() -> Self {
        LegGeometry {
            thigh: 0.08,
            shank: 0.08,
            neutral_foot: FootPoint { x: 0.0, z: 0.11 },
        }
    }
}

impl LegGeometry {
    /// Largest reachable distance from the hip (minus the clamp margin).
    pub fn max_reach(&self) -> f64 {
        self.thigh + self.shank - WORKSPACE_MARGIN
    }

    /// Smallest reachable distance from the hip (plus the clamp margin).
    pub fn min_reach(&self) -> f64 {
        (self.thigh - self.shank).abs() + WORKSPACE_MARGIN
    }
}

/// A point in the leg plane: `x` toward the nose, `z` downward from the hip.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FootPoint {
    pub x: f64,
    pub z: f64,
}

/// Hip and knee angles in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub hip: f64,
    pub knee: f64,
}

/// Result of an inverse-kinematics solve.
///
/// Unreachable targets are clamped to the workspace boundary instead of
/// erroring, because gait offsets can transiently exit the workspace and an
/// episode must not abort mid-stride; `clamped` reports when that happened.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkSolution {
    pub angles: JointAngles,
    pub clamped: bool,
}

/// Foot position in the leg plane for the given joint angles.
pub fn forward_kinematics(angles: JointAngles, geom: &LegGeometry) -> FootPoint {
    let (s1, c1) = angles.hip.sin_cos();
    let (s12, c12) = (angles.hip + angles.knee).sin_cos();
    FootPoint {
        x: geom.thigh * s1 + geom.shank * s12,
        z: geom.thigh * c1 + geom.shank * c12,
    }
}

/// Joint angles whose forward kinematics reach `target`, on the knee-backward
/// branch. Targets outside the annular workspace are clamped radially.
pub fn inverse_kinematics(target: FootPoint, geom: &LegGeometry) -> IkSolution {
    let r = (target.x * target.x + target.z * target.z).sqrt();
    let (r_min, r_max) = (geom.min_reach(), geom.max_reach());

    let mut clamped = false;
    let (x, z) = if r < r_min {
        clamped = true;
        if r < WORKSPACE_MARGIN {
            // Direction undefined at the hip itself; aim straight down.
            (0.0, r_min)
        } else {
            (target.x * r_min / r, target.z * r_min / r)
        }
    } else if r > r_max {
        clamped = true;
        (target.x * r_max / r, target.z * r_max / r)
    } else {
        (target.x, target.z)
    };

    let r2 = x * x + z * z;
    let cos_knee =
        ((r2 - geom.thigh * geom.thigh - geom.shank * geom.shank) / (2.0 * geom.thigh * geom.shank))
            .clamp(-1.0, 1.0);
    let knee = cos_knee.acos();
    let (sk, ck) = knee.sin_cos();
    let hip = x.atan2(z) - (geom.shank * sk).atan2(geom.thigh + geom.shank * ck);

    IkSolution {
        angles: JointAngles { hip, knee },
        clamped,
    }
}

/// Jacobian of the foot position with respect to (hip, knee).
///
/// Rows are (x, z-down), columns (hip, knee).
pub fn jacobian(angles: JointAngles, geom: &LegGeometry) -> Matrix2<f64> {
    let (s1, c1) = angles.hip.sin_cos();
    let (s12, c12) = (angles.hip + angles.knee).sin_cos();
    Matrix2::new(
        geom.thigh * c1 + geom.shank * c12,
        geom.shank * c12,
        -geom.thigh * s1 - geom.shank * s12,
        -geom.shank * s12,
    )
}

/// Time derivative of the Jacobian for joint velocities (hip_dot, knee_dot).
pub fn jacobian_dot(angles: JointAngles, vel: Vector2<f64>, geom: &LegGeometry) -> Matrix2<f64> {
    let (s1, c1) = angles.hip.sin_cos();
    let (s12, c12) = (angles.hip + angles.knee).sin_cos();
    let w1 = vel[0];
    let w12 = vel[0] + vel[1];
    Matrix2::new(
        -geom.thigh * s1 * w1 - geom.shank * s12 * w12,
        -geom.shank * s12 * w12,
        -geom.thigh * c1 * w1 - geom.shank * c12 * w12,
        -geom.shank * c12 * w12,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn straight_leg_points_down() {
        let geom = LegGeometry::default();
        let foot = forward_kinematics(JointAngles { hip: 0.0, knee: 0.0 }, &geom);
        assert_relative_eq!(foot.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(foot.z, 0.16, max_relative = 1e-12);
    }

    #[test]
    fn folded_leg_collapses_to_hip() {
        let geom = LegGeometry::default();
        let foot = forward_kinematics(JointAngles { hip: 0.0, knee: PI }, &geom);
        assert!(foot.x.abs() < 1e-15);
        assert!(foot.z.abs() < 1e-15);
    }

    #[test]
    fn near_boundary_target_extends_knee() {
        let geom = LegGeometry::default();
        let sol = inverse_kinematics(
            FootPoint {
                x: 0.0,
                z: 0.16 - 1e-6,
            },
            &geom,
        );
        assert!(!sol.clamped);
        assert!(sol.angles.knee.abs() < 0.01, "knee = {}", sol.angles.knee);
    }

    #[test]
    fn round_trip_recovers_known_angles() {
        let geom = LegGeometry::default();
        let angles = JointAngles { hip: 0.3, knee: 0.9 };
        let foot = forward_kinematics(angles, &geom);
        let sol = inverse_kinematics(foot, &geom);
        assert!(!sol.clamped);
        assert_relative_eq!(sol.angles.hip, 0.3, max_relative = 1e-9);
        assert_relative_eq!(sol.angles.knee, 0.9, max_relative = 1e-9);
    }

    #[test]
    fn unreachable_target_is_clamped_and_flagged() {
        let geom = LegGeometry::default();
        let sol = inverse_kinematics(FootPoint { x: 0.0, z: 0.20 }, &geom);
        assert!(sol.clamped);
        let foot = forward_kinematics(sol.angles, &geom);
        let r = (foot.x * foot.x + foot.z * foot.z).sqrt();
        assert_relative_eq!(r, 0.16 - 1e-6, max_relative = 1e-9);
    }

    #[test]
    fn round_trip_over_sampled_workspace() {
        let geom = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut max_err: f64 = 0.0;
        let mut knee_sign_ok = true;
        let mut samples = 0;
        while samples < 10_000 {
            let x: f64 = rng.random_range(-0.16..0.16);
            let z: f64 = rng.random_range(-0.16..0.16);
            let r = (x * x + z * z).sqrt();
            if r <= geom.min_reach() + 1e-4 || r >= geom.max_reach() - 1e-4 {
                continue;
            }
            samples += 1;
            let sol = inverse_kinematics(FootPoint { x, z }, &geom);
            assert!(!sol.clamped);
            knee_sign_ok &= sol.angles.knee >= 0.0;
            let foot = forward_kinematics(sol.angles, &geom);
            let err = ((foot.x - x).powi(2) + (foot.z - z).powi(2)).sqrt();
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-9, "max round-trip error {max_err}");
        assert!(knee_sign_ok, "knee branch flipped inside the workspace");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let geom = LegGeometry::default();
        let angles = JointAngles { hip: -0.4, knee: 1.2 };
        let j = jacobian(angles, &geom);
        let h = 1e-7;
        for col in 0..2 {
            let mut plus = angles;
            let mut minus = angles;
            if col == 0 {
                plus.hip += h;
                minus.hip -= h;
            } else {
                plus.knee += h;
                minus.knee -= h;
            }
            let fp = forward_kinematics(plus, &geom);
            let fm = forward_kinematics(minus, &geom);
            assert_relative_eq!(j[(0, col)], (fp.x - fm.x) / (2.0 * h), epsilon = 1e-6);
            assert_relative_eq!(j[(1, col)], (fp.z - fm.z) / (2.0 * h), epsilon = 1e-6);
        }
    }

    #[test]
    fn jacobian_dot_matches_finite_differences() {
        let geom = LegGeometry::default();
        let angles = JointAngles { hip: 0.25, knee: 0.8 };
        let vel = Vector2::new(1.3, -0.7);
        let jd = jacobian_dot(angles, vel, &geom);
        let h = 1e-7;
        let advanced = JointAngles {
            hip: angles.hip + h * vel[0],
            knee: angles.knee + h * vel[1],
        };
        let retreated = JointAngles {
            hip: angles.hip - h * vel[0],
            knee: angles.knee - h * vel[1],
        };
        let fd = (jacobian(advanced, &geom) - jacobian(retreated, &geom)) / (2.0 * h);
        for i in 0..2 {
            for k in 0..2 {
                assert_relative_eq!(jd[(i, k)], fd[(i, k)], epsilon = 1e-5);
            }
        }
    }

    proptest! {
        #[test]
        fn reachable_points_respect_triangle_inequality(
            hip in -PI..PI, knee in -PI..PI
        ) {
            let geom = LegGeometry::default();
            let foot = forward_kinematics(JointAngles { hip, knee }, &geom);
            let r = (foot.x * foot.x + foot.z * foot.z).sqrt();
            prop_assert!(r <= geom.thigh + geom.shank + 1e-12);
            prop_assert!(r >= (geom.thigh - geom.shank).abs() - 1e-12);
        }

        #[test]
        fn ik_always_lands_in_workspace(x in -0.5f64..0.5, z in -0.5f64..0.5) {
            let geom = LegGeometry::default();
            let sol = inverse_kinematics(FootPoint { x, z }, &geom);
            let foot = forward_kinematics(sol.angles, &geom);
            let r = (foot.x * foot.x + foot.z * foot.z).sqrt();
            prop_assert!(r <= geom.thigh + geom.shank + 1e-12);
            prop_assert!(sol.angles.knee >= 0.0);
        }
    }
}
