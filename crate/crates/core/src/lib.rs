//! Collaborative human/machine control of a simulated wheelchair.
//!
//! A human driver and an autonomous navigator steer the same robot through
//! a maze. A velocity multiplexer hands control to the machine when the
//! human pauses while the distance-to-goal trend is adverse, and returns it
//! the moment the human issues a command. How eagerly the machine steps in
//! is set by a questionnaire-derived cognitive score.
//!
//! The geometric core ([`geometry`], [`world`] kinematics) is generic over
//! [`Scalar`]; the runtime pipeline uses the `f64` aliases exported here.

pub mod bus;
pub mod cognitive;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod heuristic;
pub mod memory;
pub mod mux;
pub mod navigator;
pub mod perception;
pub mod scalar;
pub mod world;

use serde::{Deserialize, Serialize};

pub use scalar::Scalar;

/// Planar pose in the runtime precision.
pub type Pose2D = geometry::Pose2<f64>;
/// Drive command in the runtime precision.
pub type VelocityCommand = world::VelocityCommand<f64>;
/// Speed envelope in the runtime precision.
pub type VelocityLimits = world::VelocityLimits<f64>;

/// Which party issues drive commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Driver {
    Human,
    Machine,
}

impl Driver {
    pub fn as_str(self) -> &'static str {
        match self {
            Driver::Human => "HUMAN",
            Driver::Machine => "MACHINE",
        }
    }
}

impl std::fmt::Display for Driver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
