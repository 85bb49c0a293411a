//! Planar poses and path helpers.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Scalar>(theta: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut a = theta % two_pi;
    if a <= -pi {
        a = a + two_pi;
    } else if a > pi {
        a = a - two_pi;
    }
    a
}

/// Position in meters and heading in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Applies an increment expressed in this pose's body frame.
    pub fn compose(&self, delta: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            self.theta + delta.theta,
        )
    }

    /// Body-frame increment that takes `self` to `other`, so that
    /// `self.compose(&self.between(other)) == other` up to rounding.
    pub fn between(&self, other: &Self) -> Self {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Self::new(c * dx + s * dy, -s * dx + c * dy, other.theta - self.theta)
    }

    /// Bearing from this pose's position to a point, in the world frame.
    pub fn bearing_to(&self, x: T, y: T) -> T {
        (y - self.y).atan2(x - self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Length of the remaining route: distance from `pose` to its nearest
/// waypoint plus the polyline length from that waypoint to the end.
///
/// Returns `None` for an empty waypoint list.
pub fn remaining_path_length<T: Scalar>(waypoints: &[Pose2<T>], pose: &Pose2<T>) -> Option<T> {
    let (nearest, gap) = waypoints
        .iter()
        .enumerate()
        .map(|(k, w)| (k, pose.distance_to(w)))
        .fold(None, |best: Option<(usize, T)>, (k, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((k, d)),
        })?;
    let tail = waypoints[nearest..]
        .windows(2)
        .fold(T::zero(), |acc, w| acc + w[0].distance_to(&w[1]));
    Some(gap + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert_relative_eq!(normalize_angle(PI), PI);
        assert_relative_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(normalize_angle(-7.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(normalize_angle(0.25f32), 0.25f32);
    }

    #[test]
    fn between_inverts_compose() {
        let a = Pose2::new(1.0, -2.0, 0.7);
        let b = Pose2::new(-0.5, 3.0, -2.9);
        let back = a.compose(&a.between(&b));
        assert_relative_eq!(back.x, b.x, epsilon = 1e-12);
        assert_relative_eq!(back.y, b.y, epsilon = 1e-12);
        assert_relative_eq!(back.theta, b.theta, epsilon = 1e-12);
    }

    #[test]
    fn remaining_length_uses_nearest_waypoint() {
        let plan: Vec<Pose2<f64>> = (0..10).map(|k| Pose2::new(k as f64 * 0.25, 0.0, 0.0)).collect();
        assert_relative_eq!(remaining_path_length(&plan, &plan[0]).unwrap(), 9.0 * 0.25);
        assert_relative_eq!(remaining_path_length(&plan, &plan[9]).unwrap(), 0.0);
        let off = Pose2::new(1.0, 0.5, 0.0);
        assert_relative_eq!(remaining_path_length(&plan, &off).unwrap(), 0.5 + 5.0 * 0.25);
        assert!(remaining_path_length::<f64>(&[], &off).is_none());
    }
}
