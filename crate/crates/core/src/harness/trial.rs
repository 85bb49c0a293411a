//! Single scripted trial from the start pose to the shared goal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::driver::{DriverError, ScriptedDriver};
use super::session::{RunMode, Session, SessionConfig, SessionError};
use super::subject::Subject;
use crate::bus::{Payload, Topic};
use crate::cognitive::{make_priority_config, Group};
use crate::grid::squared_distance_transform;
use crate::heuristic::DistanceSample;
use crate::memory::MemoryStore;
use crate::navigator::{build_costmap_with, plan_global, Costmap, GlobalPlan, InflationConfig};
use crate::perception::TernaryGrid;
use crate::world::{Cell, GridWorld};
use crate::Pose2D;

pub const DEFAULT_TIME_LIMIT: f64 = 600.0;
/// The subject re-reads the route when this far from it.
const ROUTE_DEVIATION: f64 = 0.75;
/// Minimum wall clearance of an automatically chosen goal cell.
const GOAL_CLEARANCE: f64 = 0.75;

pub const REFERENCE_MAZE: &str = include_str!("../../assets/reference_maze.txt");

pub fn reference_world() -> GridWorld {
    crate::world::load_maze(REFERENCE_MAZE).expect("reference maze parses")
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: RunMode,
    pub world: GridWorld,
    pub subject: Subject,
    /// Defaults to [`far_corner_goal`].
    pub goal_cell: Option<(usize, usize)>,
    pub seed: u64,
    pub time_limit: f64,
}

impl RunConfig {
    pub fn new(mode: RunMode, world: GridWorld, subject: Subject, seed: u64) -> Self {
        Self {
            mode,
            world,
            subject,
            goal_cell: None,
            seed,
            time_limit: DEFAULT_TIME_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub subject_id: String,
    pub score: u8,
    pub group: Group,
    pub mode: RunMode,
    pub seed: u64,
    /// `None` when the time limit ran out first.
    pub manoeuvring_time: Option<f64>,
    pub takeover_count: u32,
    pub reclaim_count: u32,
    pub path_length: f64,
    pub distance_trace: Vec<DistanceSample>,
}

impl RunResult {
    pub fn timeout(&self) -> bool {
        self.manoeuvring_time.is_none()
    }
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid run configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Free cell farthest (straight-line) from the start among those with at
/// least [`GOAL_CLEARANCE`] to the nearest wall.
pub fn far_corner_goal(world: &GridWorld) -> Option<(usize, usize)> {
    let g = &world.geometry;
    let walls: Vec<bool> = world.cells.iter().map(|c| *c == Cell::Wall).collect();
    let d2 = squared_distance_transform(g.width, g.height, |k| walls[k]);
    let min_cells = GOAL_CLEARANCE / g.resolution;
    let start = world.start_pose;
    (0..g.len())
        .filter(|&k| !walls[k] && d2[k] >= min_cells * min_cells)
        .map(|k| {
            let (i, j) = g.coords(k);
            let (x, y) = g.cell_center(i, j);
            ((x - start.x).hypot(y - start.y), k)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, k)| g.coords(k))
}

/// Mixes the trial seed with the subject id so subjects do not share
/// random streams.
pub fn driver_seed(seed: u64, subject_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in subject_id.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The subject's mental route: planned on the true maze.
pub struct RouteKeeper {
    costmap: Costmap,
    goal: Pose2D,
    route: Option<GlobalPlan>,
}

impl RouteKeeper {
    pub fn new(world: &GridWorld, goal: Pose2D) -> Self {
        let inflation = InflationConfig::for_radius(world.robot_radius);
        Self {
            costmap: build_costmap_with(&TernaryGrid::from_world(world), &inflation),
            goal,
            route: None,
        }
    }

    pub fn route_from(&mut self, pose: &Pose2D) -> Option<&GlobalPlan> {
        let stale = self.route.as_ref().is_none_or(|r| {
            r.waypoints
                .iter()
                .map(|w| w.distance_to(pose))
                .fold(f64::INFINITY, f64::min)
                > ROUTE_DEVIATION
        });
        if stale {
            match plan_global(&self.costmap, pose, &self.goal) {
                Ok(p) => self.route = Some(p),
                Err(e) => log::debug!("subject route from ({:.2}, {:.2}) failed: {e}", pose.x, pose.y),
            }
        }
        self.route.as_ref()
    }
}

pub fn run_trial(config: &RunConfig) -> Result<RunResult, TrialError> {
    run_trial_with_memory(config, MemoryStore::in_memory()).map(|(r, _)| r)
}

/// Runs a trial, logging procedural and episodic memory into `memory`.
pub fn run_trial_with_memory(config: &RunConfig, memory: MemoryStore) -> Result<(RunResult, MemoryStore), TrialError> {
    if !(config.time_limit > 0.0 && config.time_limit.is_finite()) {
        return Err(TrialError::ConfigInvalid("time_limit must be positive".into()));
    }
    let (gi, gj) = match config.goal_cell {
        Some(c) => c,
        None => far_corner_goal(&config.world)
            .ok_or_else(|| TrialError::ConfigInvalid("maze has no open cell for a goal".into()))?,
    };
    let priority = make_priority_config(&config.subject.profile);
    let session_cfg = SessionConfig::new(config.mode, priority, config.seed);
    let mut session = Session::new(config.world.clone(), session_cfg, memory);
    let goal = session.set_goal_cell(gi, gj).map_err(|e| TrialError::ConfigInvalid(e.to_string()))?;

    let mut routes = RouteKeeper::new(&config.world, goal.pose);
    if routes.route_from(&config.world.start_pose).is_none() {
        return Err(TrialError::ConfigInvalid(format!("goal cell ({gi}, {gj}) is unreachable")));
    }
    let mut driver = match config.mode {
        RunMode::Machine => None,
        _ => Some(
            ScriptedDriver::new(config.subject.driver, driver_seed(config.seed, &config.subject.profile.subject_id))
                .map_err(|e| TrialError::ConfigInvalid(e.to_string()))?,
        ),
    };

    let max_ticks = (config.time_limit / session.dt()).round() as u64;
    let mut reached = None;
    for _ in 0..max_ticks {
        if let Some(d) = driver.as_mut() {
            let pose = session.estimate().mean;
            let now = session.now();
            let view = session.scan().clone();
            match d.step(&pose, routes.route_from(&pose), Some(&view), now) {
                Ok(Some(cmd)) => {
                    session
                        .bus()
                        .publish(Topic::CmdVelHuman, now, Payload::VelocityCommand(cmd))
                        .expect("human commands match the topic schema");
                }
                Ok(None) => {}
                Err(DriverError::NoPlan) => log::debug!("subject has no route at t={now:.2}"),
                Err(e) => return Err(TrialError::ConfigInvalid(e.to_string())),
            }
        }
        let report = session.step()?;
        if report.reached {
            reached = Some(report.now);
            break;
        }
    }
    session.finish()?;

    let state = *session.arbitration();
    let result = RunResult {
        subject_id: config.subject.profile.subject_id.clone(),
        score: config.subject.profile.score,
        group: config.subject.profile.group,
        mode: config.mode,
        seed: config.seed,
        manoeuvring_time: reached,
        takeover_count: state.takeover_count,
        reclaim_count: state.reclaim_count,
        path_length: session.path_length(),
        distance_trace: session.distance_trace().to_vec(),
    };
    Ok((result, session.into_memory()))
}
