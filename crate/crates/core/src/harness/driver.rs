//! Parametric stand-in for a human subject at the keyboard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::normalize_angle;
use crate::navigator::{front_clearance, lookahead_point, pursuit_target, GlobalPlan};
use crate::world::{LaserScan, DEFAULT_ROBOT_RADIUS};
use crate::{Driver, Pose2D, VelocityCommand, VelocityLimits};

/// Free travel below which the driver stops pushing and turns away.
const STOP_MARGIN: f64 = 0.05;
const ESCAPE_RATE: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    /// 1 is fully attentive; wrong turns and steering noise scale with
    /// `1 - attentiveness`.
    pub attentiveness: f64,
    pub heading_noise_sigma: f64,
    /// Chance per tick of starting a pause.
    pub pause_prob: f64,
    pub pause_duration: (f64, f64),
    /// Chance per tick (before attentiveness scaling) of heading the wrong way.
    pub wrong_turn_prob: f64,
    pub wrong_turn_duration: (f64, f64),
    pub lookahead: f64,
    pub heading_gain: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            attentiveness: 1.0,
            heading_noise_sigma: 0.0,
            pause_prob: 0.0,
            pause_duration: (0.0, 0.0),
            wrong_turn_prob: 0.0,
            wrong_turn_duration: (0.0, 0.0),
            lookahead: 0.6,
            heading_gain: 2.0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DriverError {
    #[error("driver has no route to follow")]
    NoPlan,
    #[error("invalid driver parameter {0}")]
    InvalidParameter(&'static str),
}

impl DriverParams {
    pub fn validate(&self) -> Result<(), DriverError> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        let range = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 <= a && a <= b;
        if !unit(self.attentiveness) {
            return Err(DriverError::InvalidParameter("attentiveness"));
        }
        if !unit(self.pause_prob) {
            return Err(DriverError::InvalidParameter("pause_prob"));
        }
        if !unit(self.wrong_turn_prob) {
            return Err(DriverError::InvalidParameter("wrong_turn_prob"));
        }
        if !(self.heading_noise_sigma >= 0.0 && self.heading_noise_sigma.is_finite()) {
            return Err(DriverError::InvalidParameter("heading_noise_sigma"));
        }
        if !range(self.pause_duration) {
            return Err(DriverError::InvalidParameter("pause_duration"));
        }
        if !range(self.wrong_turn_duration) {
            return Err(DriverError::InvalidParameter("wrong_turn_duration"));
        }
        if !(self.lookahead > 0.0 && self.heading_gain > 0.0) {
            return Err(DriverError::InvalidParameter("lookahead"));
        }
        Ok(())
    }

    pub fn effective_wrong_turn_prob(&self) -> f64 {
        self.wrong_turn_prob * (1.0 - self.attentiveness)
    }

    pub fn effective_heading_sigma(&self) -> f64 {
        self.heading_noise_sigma * (1.0 - self.attentiveness)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriverActivity {
    Following,
    WrongWay,
    Paused,
}

#[derive(Clone, Debug)]
pub struct ScriptedDriver {
    params: DriverParams,
    rng_seed: u64,
    rng: ChaCha8Rng,
    limits: VelocityLimits,
    paused_until: f64,
    wrong_until: f64,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl ScriptedDriver {
    pub fn new(params: DriverParams, rng_seed: u64) -> Result<Self, DriverError> {
        params.validate()?;
        Ok(Self {
            params,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            limits: VelocityLimits::default(),
            paused_until: f64::NEG_INFINITY,
            wrong_until: f64::NEG_INFINITY,
        })
    }

    pub fn params(&self) -> &DriverParams {
        &self.params
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn activity(&self, now: f64) -> DriverActivity {
        if now < self.paused_until {
            DriverActivity::Paused
        } else if now < self.wrong_until {
            DriverActivity::WrongWay
        } else {
            DriverActivity::Following
        }
    }

    /// One keyboard decision. `None` is silence: the subject is pausing.
    ///
    /// A following subject steers at the route's lookahead point; one that
    /// has taken a wrong turn steers back along the route toward its start.
    /// One command decision. With a `view` of the surroundings the driver
    /// aims only at route points it can see past the walls.
    pub fn step(
        &mut self,
        pose: &Pose2D,
        route: Option<&GlobalPlan>,
        view: Option<&LaserScan>,
        now: f64,
    ) -> Result<Option<VelocityCommand>, DriverError> {
        let route = route.filter(|r| !r.waypoints.is_empty()).ok_or(DriverError::NoPlan)?;
        if now < self.paused_until {
            return Ok(None);
        }
        if self.rng.random_bool(self.params.pause_prob) {
            self.paused_until = now + draw(&mut self.rng, self.params.pause_duration);
            return Ok(None);
        }
        if now >= self.wrong_until && self.rng.random_bool(self.params.effective_wrong_turn_prob()) {
            self.wrong_until = now + draw(&mut self.rng, self.params.wrong_turn_duration);
        }
        let reversed;
        let route = if now < self.wrong_until {
            reversed = GlobalPlan {
                waypoints: route.waypoints.iter().rev().copied().collect(),
                ..route.clone()
            };
            &reversed
        } else {
            route
        };
        let target = match view {
            Some(scan) => pursuit_target(route, pose, self.params.lookahead, scan, DEFAULT_ROBOT_RADIUS),
            None => lookahead_point(route, pose, self.params.lookahead),
        }
        .ok_or(DriverError::NoPlan)?;
        let mut error = normalize_angle(pose.bearing_to(target.x, target.y) - pose.theta);
        let sigma = self.params.effective_heading_sigma();
        if sigma > 0.0 {
            error += Normal::new(0.0, sigma).expect("finite sigma").sample(&mut self.rng);
        }
        if let Some(side) = view.and_then(blocked_side) {
            return Ok(Some(VelocityCommand::new(0.0, -side * ESCAPE_RATE, Driver::Human, now)));
        }
        let alignment = error.cos();
        let linear = if alignment > 1e-9 { self.limits.v_max * alignment } else { 0.0 };
        let cmd = VelocityCommand::new(linear, self.params.heading_gain * error, Driver::Human, now);
        Ok(Some(self.limits.clamp(cmd)))
    }
}

/// Side (+1 left, -1 right) of the closest contact when the front is
/// blocked for the robot disc.
fn blocked_side(scan: &LaserScan) -> Option<f64> {
    if front_clearance(scan, DEFAULT_ROBOT_RADIUS) >= STOP_MARGIN {
        return None;
    }
    scan.beams()
        .filter(|&(a, r)| a.abs() <= std::f64::consts::FRAC_PI_2 && !scan.is_max_range(r))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(a, _)| if a < 0.0 { -1.0 } else { 1.0 })
}
