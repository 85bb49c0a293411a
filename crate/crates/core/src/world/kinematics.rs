use serde::{Deserialize, Serialize};

use crate::geometry::Pose2;
use crate::scalar::Scalar;
use crate::Driver;

/// Twist-style drive command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand<T> {
    pub linear: T,
    pub angular: T,
    pub source: Driver,
    pub stamp: f64,
}

impl<T: Scalar> VelocityCommand<T> {
    pub fn new(linear: T, angular: T, source: Driver, stamp: f64) -> Self {
        Self {
            linear,
            angular,
            source,
            stamp,
        }
    }

    pub fn zero(source: Driver, stamp: f64) -> Self {
        Self::new(T::zero(), T::zero(), source, stamp)
    }

    pub fn is_zero(&self) -> bool {
        self.linear.is_zero() && self.angular.is_zero()
    }
}

/// Speed envelope of the platform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits<T> {
    pub v_max: T,
    pub w_max: T,
}

impl<T: Scalar> VelocityLimits<T> {
    pub fn clamp(&self, cmd: VelocityCommand<T>) -> VelocityCommand<T> {
        VelocityCommand {
            linear: cmd.linear.max(-self.v_max).min(self.v_max),
            angular: cmd.angular.max(-self.w_max).min(self.w_max),
            ..cmd
        }
    }

    pub fn admits(&self, cmd: &VelocityCommand<T>) -> bool {
        cmd.linear.abs() <= self.v_max && cmd.angular.abs() <= self.w_max
    }
}

impl Default for VelocityLimits<f64> {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            w_max: 1.5,
        }
    }
}

impl Default for VelocityLimits<f32> {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            w_max: 1.5,
        }
    }
}

/// Exact unicycle integration over `dt`: a straight segment when the turn
/// rate is negligible, otherwise a circular arc of radius `linear/angular`.
pub fn step_kinematics<T: Scalar>(pose: Pose2<T>, cmd: &VelocityCommand<T>, dt: T) -> Pose2<T> {
    let (v, w) = (cmd.linear, cmd.angular);
    if w.abs() < T::lit(1e-9) {
        let (s, c) = pose.theta.sin_cos();
        return Pose2::new(pose.x + v * c * dt, pose.y + v * s * dt, pose.theta + w * dt);
    }
    let r = v / w;
    let theta_end = pose.theta + w * dt;
    Pose2::new(
        pose.x + r * (theta_end.sin() - pose.theta.sin()),
        pose.y + r * (pose.theta.cos() - theta_end.cos()),
        theta_end,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cmd(v: f64, w: f64) -> VelocityCommand<f64> {
        VelocityCommand::new(v, w, Driver::Machine, 0.0)
    }

    #[test]
    fn pure_translation() {
        let p = step_kinematics(Pose2::new(0.0, 0.0, 0.0), &cmd(1.0, 0.0), 1.0);
        assert_eq!(p, Pose2::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn pure_rotation() {
        let p = step_kinematics(Pose2::new(0.0, 0.0, 0.0), &cmd(0.0, FRAC_PI_2), 1.0);
        assert_relative_eq!(p.x, 0.0);
        assert_relative_eq!(p.y, 0.0);
        assert_relative_eq!(p.theta, FRAC_PI_2);
    }

    #[test]
    fn unit_arc_closed_form() {
        let p = step_kinematics(Pose2::new(0.0, 0.0, 0.0), &cmd(1.0, 1.0), 1.0);
        assert_relative_eq!(p.x, 1f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0 - 1f64.cos(), epsilon = 1e-12);
        assert_relative_eq!(p.theta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_precision_agrees() {
        let c = VelocityCommand::<f32>::new(0.8, -0.6, Driver::Human, 0.0);
        let p32 = step_kinematics(Pose2::new(1.0f32, 2.0, 0.3), &c, 0.1);
        let p64 = step_kinematics(Pose2::new(1.0f64, 2.0, 0.3), &cmd(0.8, -0.6), 0.1);
        assert!((p32.x as f64 - p64.x).abs() < 1e-5);
        assert!((p32.y as f64 - p64.y).abs() < 1e-5);
    }

    #[test]
    fn clamp_respects_limits() {
        let lim = VelocityLimits::<f64>::default();
        let c = lim.clamp(cmd(3.0, -9.0));
        assert_eq!((c.linear, c.angular), (1.0, -1.5));
        assert!(lim.admits(&c));
    }
}
