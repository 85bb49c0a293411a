//! The machine driver: inflated costmap, optimal global planner, pure
//! pursuit local planner with rotate recovery, and the remaining-path
//! distance used by the heuristic engine.

mod costmap;
mod local;
mod planner;

use std::collections::VecDeque;

pub use costmap::{build_costmap, build_costmap_with, inflation_cost, Costmap, InflationConfig, LETHAL};
pub use local::{
    corridor_clear, front_clearance, lookahead_point, plan_local, pursuit_target, LocalPlannerConfig, NavigatorState,
    Recovery,
};
pub use planner::{plan_global, successors, GlobalPlan, PathCost, PlanError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::TernaryGrid;
use crate::world::LaserScan;
use crate::{Driver, Pose2D, VelocityCommand};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("no active plan")]
    NoPlan,
}

/// Distance left along `plan` from `pose`.
pub fn remaining_path_length(plan: &GlobalPlan, pose: &Pose2D) -> Result<f64, NavError> {
    crate::geometry::remaining_path_length(&plan.waypoints, pose).ok_or(NavError::NoPlan)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavigatorConfig {
    pub inflation: InflationConfig,
    pub local: LocalPlannerConfig,
    /// Sim-time interval between periodic global replans (s).
    pub replan_period: f64,
    /// Stop radius around the goal, judged on the estimated pose.
    pub goal_tolerance: f64,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        Self {
            inflation: InflationConfig::default(),
            local: LocalPlannerConfig::default(),
            replan_period: 2.0,
            goal_tolerance: 0.1,
        }
    }
}

/// Owns the planning state; advanced once per tick.
pub struct Navigator {
    config: NavigatorConfig,
    state: NavigatorState,
    goal: Option<Pose2D>,
    last_replan: Option<f64>,
    costmap: Option<Costmap>,
}

impl Navigator {
    pub fn new(config: NavigatorConfig) -> Self {
        Self {
            state: NavigatorState::new(config.local.lookahead),
            config,
            goal: None,
            last_replan: None,
            costmap: None,
        }
    }

    pub fn config(&self) -> &NavigatorConfig {
        &self.config
    }

    pub fn state(&self) -> &NavigatorState {
        &self.state
    }

    pub fn plan(&self) -> Option<&GlobalPlan> {
        self.state.active_plan.as_ref()
    }

    pub fn costmap(&self) -> Option<&Costmap> {
        self.costmap.as_ref()
    }

    pub fn goal(&self) -> Option<&Pose2D> {
        self.goal.as_ref()
    }

    /// Sets a new goal; the next tick replans.
    pub fn set_goal(&mut self, goal: Pose2D) {
        self.goal = Some(goal);
        self.state.active_plan = None;
        self.last_replan = None;
    }

    pub fn at_goal(&self, pose: &Pose2D) -> bool {
        self.goal
            .is_some_and(|g| g.distance_to(pose) <= self.config.goal_tolerance)
    }

    /// Rebuilds the costmap from `map` and replans from `pose`. A lethal
    /// start is moved to the nearest non-lethal cell. On failure the
    /// previous plan stays active.
    pub fn replan(&mut self, pose: &Pose2D, map: &TernaryGrid, now: f64) -> Result<(), PlanError> {
        let goal = self.goal.ok_or(PlanError::OutOfBounds("goal"))?;
        let costmap = build_costmap_with(map, &self.config.inflation);
        self.last_replan = Some(now);
        self.state.replan_requested = false;
        let start = nearest_open_cell(&costmap, pose).unwrap_or(*pose);
        let result = plan_global(&costmap, &start, &goal);
        self.costmap = Some(costmap);
        let plan = result?;
        self.state.active_plan = Some(plan);
        self.state.replan_count += 1;
        Ok(())
    }

    /// One control cycle: periodic or requested replanning, then the local
    /// planner. Commands zero velocity at the goal or without a plan.
    pub fn tick(&mut self, now: f64, pose: &Pose2D, scan: &LaserScan, map: &TernaryGrid) -> VelocityCommand {
        let stop = VelocityCommand::zero(Driver::Machine, now);
        if self.goal.is_none() || self.at_goal(pose) {
            return stop;
        }
        let due = self.state.active_plan.is_none()
            || self.state.replan_requested
            || self
                .last_replan
                .is_none_or(|t| now - t >= self.config.replan_period - 1e-9);
        if due && self.state.recovery == Recovery::None {
            if let Err(e) = self.replan(pose, map, now) {
                log::debug!("replan at t={now:.2} failed: {e}");
            }
        }
        plan_local(&mut self.state, pose, scan, &self.config.local, now).unwrap_or(stop)
    }
}

/// Center of the closest non-lethal cell (breadth-first over the grid),
/// keeping the pose unchanged when its own cell is already open.
fn nearest_open_cell(costmap: &Costmap, pose: &Pose2D) -> Option<Pose2D> {
    let g = &costmap.geometry;
    let (i, j) = g.world_to_cell(pose.x, pose.y)?;
    if !costmap.is_lethal(i, j) {
        return Some(*pose);
    }
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([g.index(i, j)]);
    seen[g.index(i, j)] = true;
    while let Some(k) = queue.pop_front() {
        let (ci, cj) = g.coords(k);
        if !costmap.is_lethal(ci, cj) {
            let (x, y) = g.cell_center(ci, cj);
            return Some(Pose2D::new(x, y, pose.theta));
        }
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (ci as i64 + di, cj as i64 + dj);
            if g.contains(ni, nj) {
                let n = g.index(ni as usize, nj as usize);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    None
}
