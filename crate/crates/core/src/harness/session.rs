//! One live run: the deterministic tick loop wiring every module over the bus.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Bus, Payload, Subscription, Topic};
use crate::cognitive::PriorityConfig;
use crate::heuristic::{sample_distance, DistanceSample, GoalPose, TrendLabel, TrendWindow};
use crate::memory::{EpisodeKind, MemoryError, MemoryStore, ProceduralRecord, RecordPayload, StateAction};
use crate::mux::{mux_step, ArbitrationState, ModeAnnouncement, ModeCause, MuxConfig};
use crate::navigator::{Navigator, NavigatorConfig};
use crate::perception::{classify, MappingConfig, Mcl, MclConfig, OccupancyGridMap, PoseEstimate, TernaryGrid};
use crate::world::{advance, cast_scan, disc_overlaps_wall, GridWorld, LaserScan, LidarConfig, SimClock};
use crate::{Driver, Pose2D, VelocityCommand, VelocityLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RunMode {
    Human,
    Machine,
    Collaborative,
}

impl RunMode {
    pub const ALL: [RunMode; 3] = [RunMode::Human, RunMode::Machine, RunMode::Collaborative];

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Human => "HUMAN",
            RunMode::Machine => "MACHINE",
            RunMode::Collaborative => "COLLABORATIVE",
        }
    }

    /// Accepts the CLI spellings `human`, `machine`, `collab` and the full names.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" => Some(RunMode::Human),
            "machine" => Some(RunMode::Machine),
            "collab" | "collaborative" => Some(RunMode::Collaborative),
            _ => None,
        }
    }

    pub fn mux_config(self, priority: &PriorityConfig) -> MuxConfig {
        match self {
            RunMode::Human => MuxConfig::human_only(priority),
            RunMode::Machine => MuxConfig::machine_only(priority),
            RunMode::Collaborative => MuxConfig::collaborative(priority),
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub mode: RunMode,
    pub priority: PriorityConfig,
    pub seed: u64,
    pub dt: f64,
    pub lidar: LidarConfig,
    pub mapping: MappingConfig,
    pub mcl: MclConfig,
    pub navigator: NavigatorConfig,
    /// Spread of the initial particle cloud around the start pose.
    pub init_sigma_xy: f64,
    pub init_sigma_theta: f64,
    pub map_period: f64,
    pub metric_period: f64,
    pub memory_period: f64,
    /// Arrival radius checked against the true pose.
    pub goal_tolerance: f64,
}

impl SessionConfig {
    pub fn new(mode: RunMode, priority: PriorityConfig, seed: u64) -> Self {
        Self {
            mode,
            priority,
            seed,
            dt: 0.05,
            lidar: LidarConfig::default(),
            mapping: MappingConfig::default(),
            mcl: MclConfig::default(),
            navigator: NavigatorConfig::default(),
            init_sigma_xy: 0.1,
            init_sigma_theta: 0.05,
            map_period: 1.0,
            metric_period: 0.5,
            memory_period: 0.5,
            goal_tolerance: 0.3,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("goal cell ({0}, {1}) is outside the maze")]
    GoalOutside(usize, usize),
    #[error("goal cell ({0}, {1}) is not reachable by the robot footprint")]
    GoalBlocked(usize, usize),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// What happened during one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickReport {
    pub now: f64,
    pub mode: Driver,
    pub output: VelocityCommand,
    pub announcement: Option<ModeAnnouncement>,
    pub reached: bool,
}

fn period_ticks(period: f64, dt: f64) -> u64 {
    ((period / dt).round() as u64).max(1)
}

pub struct Session {
    world: GridWorld,
    config: SessionConfig,
    clock: SimClock,
    bus: Bus,
    human_in: Subscription,
    goal_in: Subscription,
    limits: VelocityLimits,
    truth: Pose2D,
    estimate: PoseEstimate,
    scan: LaserScan,
    lidar_rng: ChaCha8Rng,
    map: OccupancyGridMap,
    ternary: TernaryGrid,
    mcl: Mcl,
    navigator: Navigator,
    window: TrendWindow,
    trend: TrendLabel,
    distance_trace: Vec<DistanceSample>,
    mux: MuxConfig,
    arbitration: ArbitrationState,
    output: VelocityCommand,
    memory: MemoryStore,
    goal: Option<GoalPose>,
    goal_set_at: f64,
    reached_at: Option<f64>,
    open_episode: Option<(EpisodeKind, f64)>,
    path_length: f64,
}

impl Session {
    pub fn new(world: GridWorld, config: SessionConfig, memory: MemoryStore) -> Self {
        let truth = world.start_pose;
        let mut bus = Bus::new();
        let human_in = bus.subscribe(Topic::CmdVelHuman);
        let goal_in = bus.subscribe(Topic::Goal);
        let mux = config.mode.mux_config(&config.priority);
        let arbitration = ArbitrationState::new(&mux, 0.0);
        let mapping = OccupancyGridMap::new(world.geometry, config.mapping);
        let ternary = TernaryGrid::unknown(world.geometry);
        let mcl = Mcl::around(config.mcl, config.seed, truth, config.init_sigma_xy, config.init_sigma_theta);
        let estimate = mcl.estimate(0.0);
        let scan = cast_scan(&world, &truth, &config.lidar);
        let mut session = Self {
            clock: SimClock::new(config.dt),
            lidar_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15),
            navigator: Navigator::new(config.navigator),
            output: VelocityCommand::zero(arbitration.mode, 0.0),
            limits: config.navigator.local.limits,
            world,
            bus,
            human_in,
            goal_in,
            truth,
            estimate,
            scan,
            map: mapping,
            ternary,
            mcl,
            window: TrendWindow::new(),
            trend: TrendLabel::Neutral,
            distance_trace: Vec::new(),
            mux,
            arbitration,
            memory,
            goal: None,
            goal_set_at: 0.0,
            reached_at: None,
            open_episode: None,
            path_length: 0.0,
            config,
        };
        let init = session.arbitration.initial_announcement(0.0);
        session.publish(Topic::Mode, Payload::ModeAnnouncement(init));
        session.publish(Topic::Map, Payload::TernaryGrid(session.ternary.clone()));
        session
    }

    fn publish(&mut self, topic: Topic, payload: Payload) {
        let now = self.clock.now();
        self.bus
            .publish(topic, now, payload)
            .expect("session payloads follow the topic schema");
    }

    /// Goal at the center of cell `(i, j)`, checked against the true maze.
    pub fn goal_for_cell(&self, i: usize, j: usize) -> Result<GoalPose, SessionError> {
        let g = &self.world.geometry;
        if !g.contains(i as i64, j as i64) {
            return Err(SessionError::GoalOutside(i, j));
        }
        let (x, y) = g.cell_center(i, j);
        if disc_overlaps_wall(&self.world, x, y, self.world.robot_radius) {
            return Err(SessionError::GoalBlocked(i, j));
        }
        Ok(GoalPose {
            pose: Pose2D::new(x, y, 0.0),
            cell: (i, j),
            stamp: self.clock.now(),
        })
    }

    /// Publishes a goal on `/goal`; it takes effect at the next tick.
    pub fn set_goal_cell(&mut self, i: usize, j: usize) -> Result<GoalPose, SessionError> {
        let goal = self.goal_for_cell(i, j)?;
        self.publish(Topic::Goal, Payload::GoalPose(goal));
        Ok(goal)
    }

    fn accept_goals(&mut self) -> Result<(), SessionError> {
        for env in self.goal_in.drain() {
            let Payload::GoalPose(requested) = &env.payload else {
                continue;
            };
            let Some((i, j)) = self.world.geometry.world_to_cell(requested.pose.x, requested.pose.y) else {
                log::warn!("ignoring goal outside the maze at ({:.2}, {:.2})", requested.pose.x, requested.pose.y);
                continue;
            };
            let goal = match self.goal_for_cell(i, j) {
                Ok(g) => g,
                Err(e) => {
                    log::warn!("ignoring goal: {e}");
                    continue;
                }
            };
            let now = self.clock.now();
            self.navigator.set_goal(goal.pose);
            self.goal = Some(goal);
            self.goal_set_at = now;
            self.reached_at = None;
            self.window.clear();
            self.memory.put(ProceduralRecord {
                stamp: now,
                payload: RecordPayload::Goal(goal),
            })?;
            let event = self.memory.record_episode(EpisodeKind::GoalSet, now, now)?;
            self.publish(Topic::Episode, Payload::Episode(event));
        }
        Ok(())
    }

    fn latest_human_command(&mut self, now: f64) -> Option<VelocityCommand> {
        let last = self.human_in.drain().into_iter().rev().find_map(|e| match e.payload {
            Payload::VelocityCommand(c) => Some(c),
            _ => None,
        })?;
        if self.config.mode == RunMode::Machine {
            return None;
        }
        let cmd = VelocityCommand::new(last.linear, last.angular, Driver::Human, now);
        (cmd.linear.is_finite() && cmd.angular.is_finite()).then(|| self.limits.clamp(cmd))
    }

    fn close_episode(&mut self, now: f64) -> Result<(), SessionError> {
        if let Some((kind, start)) = self.open_episode.take() {
            let event = self.memory.record_episode(kind, start, now)?;
            self.publish(Topic::Episode, Payload::Episode(event));
        }
        Ok(())
    }

    /// Advances the simulation by one tick.
    pub fn step(&mut self) -> Result<TickReport, SessionError> {
        self.accept_goals()?;
        let dt = self.clock.dt();

        // World.
        let previous = self.truth;
        self.truth = advance(&self.world, previous, &self.output, dt);
        let now = self.clock.tick();
        let tick = self.clock.ticks();
        self.path_length += previous.distance_to(&self.truth);
        self.publish(Topic::PoseTruth, Payload::PoseEstimate(PoseEstimate::exact(self.truth, now)));
        let mut scan = cast_scan(&self.world, &self.truth, &self.config.lidar);
        scan.stamp = now;
        scan.add_noise(self.config.lidar.noise_sigma, &mut self.lidar_rng);
        self.scan = scan;
        self.publish(Topic::Scan, Payload::LaserScan(self.scan.clone()));

        // Perception.
        self.map
            .integrate_scan(&self.truth, &self.scan)
            .expect("the robot stays inside the maze");
        self.ternary = classify(&self.map);
        if tick % period_ticks(self.config.map_period, dt) == 0 {
            self.publish(Topic::Map, Payload::TernaryGrid(self.ternary.clone()));
        }
        let odom = previous.between(&self.truth);
        self.estimate = match self.mcl.step(&odom, &self.scan, &self.ternary) {
            Ok(e) => PoseEstimate { stamp: now, ..e },
            Err(e) => {
                log::warn!("localization reset at t={now:.2}: {e}");
                self.mcl.estimate(now)
            }
        };
        self.publish(Topic::PoseEstimate, Payload::PoseEstimate(self.estimate));

        // Heuristic engine.
        if tick % period_ticks(self.config.metric_period, dt) == 0 {
            if let Ok(sample) = sample_distance(&self.estimate.mean, self.goal.as_ref(), self.navigator.plan(), now) {
                self.window.push(sample, self.config.priority.trend_window);
                self.trend = self.window.classify(&self.config.priority);
                self.distance_trace.push(sample);
                self.publish(Topic::MetricDistance, Payload::DistanceSample(sample));
                self.publish(Topic::MetricTrend, Payload::TrendLabel(self.trend));
            }
        }

        // Navigator.
        let machine = self.navigator.tick(now, &self.estimate.mean, &self.scan, &self.ternary);
        self.publish(Topic::CmdVelMachine, Payload::VelocityCommand(machine));

        // Arbitration.
        let human = self.latest_human_command(now);
        let step = mux_step(&self.arbitration, human.as_ref(), &machine, self.trend, &self.mux, now);
        self.arbitration = step.state;
        self.output = step.output;
        self.publish(Topic::CmdVel, Payload::VelocityCommand(self.output));
        if let Some(a) = step.announcement {
            self.publish(Topic::Mode, Payload::ModeAnnouncement(a));
        }

        // Memory.
        if tick % period_ticks(self.config.memory_period, dt) == 0 {
            let sa = StateAction {
                mode: self.arbitration.mode,
                cmd: self.output,
                pose: self.estimate.mean,
            };
            self.memory.put(ProceduralRecord {
                stamp: now,
                payload: RecordPayload::StateAction(sa),
            })?;
            self.memory.put(ProceduralRecord {
                stamp: now,
                payload: RecordPayload::AgentPosition(self.estimate.mean),
            })?;
            self.publish(Topic::StateAction, Payload::StateAction(sa));
        }
        if let Some(a) = step.announcement {
            self.close_episode(now)?;
            let kind = match a.cause {
                ModeCause::Takeover => EpisodeKind::Takeover,
                _ => EpisodeKind::Reclaim,
            };
            self.open_episode = Some((kind, now));
        }

        // Goal.
        let reached = self.reached_at.is_none()
            && self
                .goal
                .is_some_and(|g| g.pose.distance_to(&self.truth) <= self.config.goal_tolerance);
        if reached {
            self.reached_at = Some(now);
            let event = self.memory.record_episode(EpisodeKind::GoalReached, self.goal_set_at, now)?;
            self.publish(Topic::Episode, Payload::Episode(event));
        }

        Ok(TickReport {
            now,
            mode: self.arbitration.mode,
            output: self.output,
            announcement: step.announcement,
            reached,
        })
    }

    /// Closes any open takeover/reclaim episode.
    pub fn finish(&mut self) -> Result<(), SessionError> {
        let now = self.clock.now();
        self.close_episode(now)
    }

    pub fn bus(&mut self) -> &mut Bus {
        &mut self.bus
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn dt(&self) -> f64 {
        self.clock.dt()
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn truth(&self) -> &Pose2D {
        &self.truth
    }

    pub fn scan(&self) -> &LaserScan {
        &self.scan
    }

    pub fn estimate(&self) -> &PoseEstimate {
        &self.estimate
    }

    pub fn map(&self) -> &TernaryGrid {
        &self.ternary
    }

    pub fn navigator(&self) -> &Navigator {
        &self.navigator
    }

    pub fn arbitration(&self) -> &ArbitrationState {
        &self.arbitration
    }

    pub fn trend(&self) -> TrendLabel {
        self.trend
    }

    pub fn goal(&self) -> Option<&GoalPose> {
        self.goal.as_ref()
    }

    pub fn reached_at(&self) -> Option<f64> {
        self.reached_at
    }

    pub fn path_length(&self) -> f64 {
        self.path_length
    }

    pub fn distance_trace(&self) -> &[DistanceSample] {
        &self.distance_trace
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn into_memory(self) -> MemoryStore {
        self.memory
    }
}
