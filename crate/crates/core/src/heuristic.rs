//! Performance metric: distance to the shared goal, its trend over a
//! sliding window, and the resulting smart-driver recommendation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognitive::PriorityConfig;
use crate::navigator::{remaining_path_length, GlobalPlan};
use crate::scalar::Scalar;
use crate::{Driver, Pose2D};

/// Shared goal as set by the user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalPose {
    pub pose: Pose2D,
    pub cell: (usize, usize),
    pub stamp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DistanceBasis {
    Path,
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub t: f64,
    pub d: f64,
    pub basis: DistanceBasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TrendLabel {
    Improving,
    Worsening,
    Neutral,
}

impl TrendLabel {
    pub const ALL: [TrendLabel; 3] = [TrendLabel::Improving, TrendLabel::Worsening, TrendLabel::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            TrendLabel::Improving => "IMPROVING",
            TrendLabel::Worsening => "WORSENING",
            TrendLabel::Neutral => "NEUTRAL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmartDriverDecision {
    pub recommended: Driver,
    pub trend: TrendLabel,
    pub stamp: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeuristicError {
    #[error("no shared goal has been set")]
    NoGoal,
}

/// Distance from the agent to the goal: along the active plan when there is
/// one, straight-line otherwise.
pub fn sample_distance(
    pose: &Pose2D,
    goal: Option<&GoalPose>,
    plan: Option<&GlobalPlan>,
    t: f64,
) -> Result<DistanceSample, HeuristicError> {
    let goal = goal.ok_or(HeuristicError::NoGoal)?;
    if let Some(d) = plan.and_then(|p| remaining_path_length(p, pose).ok()) {
        return Ok(DistanceSample {
            t,
            d,
            basis: DistanceBasis::Path,
        });
    }
    Ok(DistanceSample {
        t,
        d: pose.distance_to(&goal.pose),
        basis: DistanceBasis::Euclidean,
    })
}

/// Labels a change in distance against a symmetric deadband.
pub fn trend_from_delta<T: Scalar>(delta: T, epsilon: T) -> TrendLabel {
    if delta > epsilon {
        TrendLabel::Worsening
    } else if delta < -epsilon {
        TrendLabel::Improving
    } else {
        TrendLabel::Neutral
    }
}

const SPAN_EPS: f64 = 1e-9;

/// Compares the newest sample with the oldest one inside the trailing
/// `trend_window`. Windows shorter than `trend_window` are neutral.
pub fn classify_trend(window: &[DistanceSample], config: &PriorityConfig) -> TrendLabel {
    let Some(newest) = window.last() else {
        return TrendLabel::Neutral;
    };
    let horizon = newest.t - config.trend_window - SPAN_EPS;
    let Some(oldest) = window.iter().find(|s| s.t >= horizon) else {
        return TrendLabel::Neutral;
    };
    if newest.t - oldest.t < config.trend_window - SPAN_EPS {
        return TrendLabel::Neutral;
    }
    trend_from_delta(newest.d - oldest.d, config.worsen_epsilon)
}

/// Which party should drive right now.
///
/// MACHINE when the human is driving but paused and the trend is one the
/// configuration treats as needing help; HUMAN when the machine is driving
/// and the human is active; otherwise the current driver.
pub fn recommend(
    trend: TrendLabel,
    config: &PriorityConfig,
    mode: Driver,
    human_paused: bool,
    stamp: f64,
) -> SmartDriverDecision {
    let recommended = match mode {
        Driver::Human if human_paused && config.takeover_trends.contains(&trend) => Driver::Machine,
        Driver::Machine if !human_paused => Driver::Human,
        current => current,
    };
    SmartDriverDecision {
        recommended,
        trend,
        stamp,
    }
}

/// Sliding window of distance samples owned by the tick loop.
#[derive(Clone, Debug, Default)]
pub struct TrendWindow {
    samples: VecDeque<DistanceSample>,
}

impl TrendWindow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sample (time-ordered) and drops those no longer needed.
    pub fn push(&mut self, sample: DistanceSample, trend_window: f64) {
        if let Some(last) = self.samples.back() {
            debug_assert!(sample.t >= last.t, "distance samples must be time ordered");
        }
        self.samples.push_back(sample);
        let horizon = sample.t - trend_window - SPAN_EPS;
        while self.samples.len() > 1 && self.samples[1].t <= horizon {
            self.samples.pop_front();
        }
    }

    pub fn classify(&mut self, config: &PriorityConfig) -> TrendLabel {
        classify_trend(self.samples.make_contiguous(), config)
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
