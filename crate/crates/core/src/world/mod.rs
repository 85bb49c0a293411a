//! Deterministic 2D maze world: unicycle kinematics, collision handling and
//! a simulated planar lidar.

mod collision;
mod kinematics;
mod lidar;
mod maze;

pub use collision::{advance, disc_overlaps_wall};
pub use kinematics::{step_kinematics, VelocityCommand, VelocityLimits};
pub use lidar::{cast_scan, LaserScan, LidarConfig};
pub use maze::{load_maze, Cell, GridWorld, MazeError, DEFAULT_RESOLUTION, DEFAULT_ROBOT_RADIUS};

use serde::{Deserialize, Serialize};

/// Simulation time base. `t` is derived from the tick count so that it
/// advances by exactly `dt` per tick without accumulated rounding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    ticks: u64,
    dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0 && dt.is_finite(), "tick length must be positive");
        Self { ticks: 0, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn now(&self) -> f64 {
        self.ticks as f64 * self.dt
    }

    pub fn tick(&mut self) -> f64 {
        self.ticks += 1;
        self.now()
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(0.05)
    }
}
