use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::planner::GlobalPlan;
use super::NavError;
use crate::geometry::normalize_angle;
use crate::world::LaserScan;
use crate::{Driver, Pose2D, VelocityCommand, VelocityLimits};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPlannerConfig {
    pub lookahead: f64,
    pub heading_gain: f64,
    /// Turn rate while rotating in place to clear a blocked front arc.
    pub recovery_rate: f64,
    pub margin: f64,
    pub robot_radius: f64,
    pub limits: VelocityLimits,
}

impl Default for LocalPlannerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.6,
            heading_gain: 2.0,
            recovery_rate: 0.8,
            margin: 0.05,
            robot_radius: crate::world::DEFAULT_ROBOT_RADIUS,
            limits: VelocityLimits::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Recovery {
    #[default]
    None,
    Rotate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavigatorState {
    pub active_plan: Option<GlobalPlan>,
    pub lookahead: f64,
    pub recovery: Recovery,
    pub replan_count: u64,
    /// Set when a recovery finishes; cleared by the next replan.
    pub replan_requested: bool,
    /// Turn direction (+1 left, -1 right) fixed when a recovery starts.
    pub rotate_sign: f64,
}

impl NavigatorState {
    pub fn new(lookahead: f64) -> Self {
        Self {
            active_plan: None,
            lookahead,
            recovery: Recovery::None,
            replan_count: 0,
            replan_requested: false,
            rotate_sign: 1.0,
        }
    }
}

/// Straight-line travel available before the robot disc touches a scan
/// endpoint. Endpoints with lateral offset inside the radius count.
pub fn front_clearance(scan: &LaserScan, robot_radius: f64) -> f64 {
    scan.beams()
        .filter(|&(a, r)| a.abs() <= FRAC_PI_2 && !scan.is_max_range(r))
        .filter_map(|(a, r)| {
            let (s, c) = a.sin_cos();
            let (x, y) = (r * c, r * s);
            (y.abs() < robot_radius).then(|| (x - (robot_radius * robot_radius - y * y).sqrt()).max(0.0))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Pursuit target: the first waypoint at or beyond `lookahead` from the
/// pose, searching forward from the nearest waypoint; the goal otherwise.
pub fn lookahead_point(plan: &GlobalPlan, pose: &Pose2D, lookahead: f64) -> Option<Pose2D> {
    let wps = &plan.waypoints;
    let nearest = wps
        .iter()
        .enumerate()
        .min_by(|a, b| pose.distance_to(a.1).total_cmp(&pose.distance_to(b.1)))?
        .0;
    wps[nearest..]
        .iter()
        .find(|w| pose.distance_to(w) >= lookahead)
        .or(wps.last())
        .copied()
}

/// True when no scan endpoint lies in the robot-wide corridor from the
/// sensor toward `bearing` (robot frame) out to `length`.
pub fn corridor_clear(scan: &LaserScan, bearing: f64, length: f64, half_width: f64) -> bool {
    let (sb, cb) = bearing.sin_cos();
    scan.beams().filter(|&(_, r)| !scan.is_max_range(r)).all(|(a, r)| {
        let (x, y) = (r * a.cos(), r * a.sin());
        let forward = x * cb + y * sb;
        let lateral = y * cb - x * sb;
        !(forward >= 0.0 && forward <= length && lateral.abs() < half_width)
    })
}

/// Lookahead point pulled back along the plan until the straight corridor
/// to it is clear in the scan, so the chord does not cut wall corners.
/// Falls back to the waypoint after the nearest one.
pub fn pursuit_target(plan: &GlobalPlan, pose: &Pose2D, lookahead: f64, scan: &LaserScan, half_width: f64) -> Option<Pose2D> {
    let wps = &plan.waypoints;
    let nearest = wps
        .iter()
        .enumerate()
        .min_by(|a, b| pose.distance_to(a.1).total_cmp(&pose.distance_to(b.1)))?
        .0;
    let far = wps[nearest..]
        .iter()
        .position(|w| pose.distance_to(w) >= lookahead)
        .map_or(wps.len() - 1, |k| nearest + k);
    let fallback = wps[(nearest + 1).min(wps.len() - 1)];
    let visible = (nearest + 1..=far).rev().map(|k| wps[k]).find(|w| {
        let bearing = normalize_angle(pose.bearing_to(w.x, w.y) - pose.theta);
        bearing.abs() > FRAC_PI_2 || corridor_clear(scan, bearing, pose.distance_to(w), half_width)
    });
    Some(visible.unwrap_or(fallback))
}

/// Pure pursuit with a rotate-in-place recovery when the front arc is blocked.
pub fn plan_local(
    state: &mut NavigatorState,
    pose: &Pose2D,
    scan: &LaserScan,
    cfg: &LocalPlannerConfig,
    stamp: f64,
) -> Result<VelocityCommand, NavError> {
    let plan = state.active_plan.as_ref().ok_or(NavError::NoPlan)?;
    let target = pursuit_target(plan, pose, state.lookahead, scan, cfg.robot_radius).ok_or(NavError::NoPlan)?;
    let heading_error = normalize_angle(pose.bearing_to(target.x, target.y) - pose.theta);
    let clearance = front_clearance(scan, cfg.robot_radius);
    let stop_at = cfg.margin;

    if clearance < stop_at {
        if state.recovery == Recovery::None {
            state.rotate_sign = if heading_error < 0.0 { -1.0 } else { 1.0 };
        }
        state.recovery = Recovery::Rotate;
        return Ok(cfg.limits.clamp(VelocityCommand::new(
            0.0,
            state.rotate_sign * cfg.recovery_rate,
            Driver::Machine,
            stamp,
        )));
    }
    if state.recovery == Recovery::Rotate {
        state.recovery = Recovery::None;
        state.replan_requested = true;
    }

    let angular = cfg.heading_gain * heading_error;
    let alignment = heading_error.cos();
    let mut linear = if alignment > 1e-9 {
        cfg.limits.v_max * alignment
    } else {
        0.0
    };
    let slow_at = cfg.robot_radius + cfg.margin;
    if clearance < slow_at {
        linear *= ((clearance - stop_at) / (slow_at - stop_at)).clamp(0.0, 1.0);
    }
    Ok(cfg
        .limits
        .clamp(VelocityCommand::new(linear, angular, Driver::Machine, stamp)))
}
