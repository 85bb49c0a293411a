//! In-process publish/subscribe backbone with a fixed topic roster.
//!
//! Delivery is synchronous: a publish lands in every live subscriber queue
//! before it returns, so a tick loop that publishes in a fixed order yields
//! a reproducible envelope sequence.

mod bridge;

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, Weak};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bridge::{decode_client_frame, decode_frame, encode_frame, BridgeError, CLIENT_TOPICS};
pub use crate::mux::{ModeAnnouncement, ModeCause};

use crate::heuristic::{DistanceSample, GoalPose, TrendLabel};
use crate::memory::{EpisodicEvent, StateAction};
use crate::perception::{PoseEstimate, TernaryGrid};
use crate::world::LaserScan;
use crate::VelocityCommand;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topic {
    #[serde(rename = "/cmd_vel_human")]
    CmdVelHuman,
    #[serde(rename = "/cmd_vel_machine")]
    CmdVelMachine,
    #[serde(rename = "/cmd_vel")]
    CmdVel,
    #[serde(rename = "/scan")]
    Scan,
    #[serde(rename = "/pose_truth")]
    PoseTruth,
    #[serde(rename = "/pose_estimate")]
    PoseEstimate,
    #[serde(rename = "/map")]
    Map,
    #[serde(rename = "/goal")]
    Goal,
    #[serde(rename = "/mode")]
    Mode,
    #[serde(rename = "/metric/distance")]
    MetricDistance,
    #[serde(rename = "/metric/trend")]
    MetricTrend,
    #[serde(rename = "/state_action")]
    StateAction,
    #[serde(rename = "/episode")]
    Episode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    VelocityCommand,
    LaserScan,
    PoseEstimate,
    TernaryGrid,
    GoalPose,
    ModeAnnouncement,
    DistanceSample,
    TrendLabel,
    StateAction,
    Episode,
}

impl Topic {
    pub const ALL: [Topic; 13] = [
        Topic::CmdVelHuman,
        Topic::CmdVelMachine,
        Topic::CmdVel,
        Topic::Scan,
        Topic::PoseTruth,
        Topic::PoseEstimate,
        Topic::Map,
        Topic::Goal,
        Topic::Mode,
        Topic::MetricDistance,
        Topic::MetricTrend,
        Topic::StateAction,
        Topic::Episode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topic::CmdVelHuman => "/cmd_vel_human",
            Topic::CmdVelMachine => "/cmd_vel_machine",
            Topic::CmdVel => "/cmd_vel",
            Topic::Scan => "/scan",
            Topic::PoseTruth => "/pose_truth",
            Topic::PoseEstimate => "/pose_estimate",
            Topic::Map => "/map",
            Topic::Goal => "/goal",
            Topic::Mode => "/mode",
            Topic::MetricDistance => "/metric/distance",
            Topic::MetricTrend => "/metric/trend",
            Topic::StateAction => "/state_action",
            Topic::Episode => "/episode",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, BusError> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| BusError::UnknownTopic(name.to_string()))
    }

    pub fn is_latched(self) -> bool {
        matches!(self, Topic::Map | Topic::Goal | Topic::Mode)
    }

    pub fn schema(self) -> PayloadKind {
        match self {
            Topic::CmdVelHuman | Topic::CmdVelMachine | Topic::CmdVel => PayloadKind::VelocityCommand,
            Topic::Scan => PayloadKind::LaserScan,
            Topic::PoseTruth | Topic::PoseEstimate => PayloadKind::PoseEstimate,
            Topic::Map => PayloadKind::TernaryGrid,
            Topic::Goal => PayloadKind::GoalPose,
            Topic::Mode => PayloadKind::ModeAnnouncement,
            Topic::MetricDistance => PayloadKind::DistanceSample,
            Topic::MetricTrend => PayloadKind::TrendLabel,
            Topic::StateAction => PayloadKind::StateAction,
            Topic::Episode => PayloadKind::Episode,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Topic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture flow labels (1..=7) and the topics that carry them.
pub fn label_topics(label: u8) -> &'static [Topic] {
    match label {
        1 => &[Topic::StateAction],
        2 => &[Topic::Map],
        3 => &[Topic::Goal],
        4 => &[Topic::MetricTrend, Topic::MetricDistance],
        5 | 7 => &[Topic::Episode],
        6 => &[Topic::PoseEstimate],
        _ => &[],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    VelocityCommand(VelocityCommand),
    LaserScan(LaserScan),
    PoseEstimate(PoseEstimate),
    TernaryGrid(TernaryGrid),
    GoalPose(GoalPose),
    ModeAnnouncement(ModeAnnouncement),
    DistanceSample(DistanceSample),
    TrendLabel(TrendLabel),
    StateAction(StateAction),
    Episode(EpisodicEvent),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::VelocityCommand(_) => PayloadKind::VelocityCommand,
            Payload::LaserScan(_) => PayloadKind::LaserScan,
            Payload::PoseEstimate(_) => PayloadKind::PoseEstimate,
            Payload::TernaryGrid(_) => PayloadKind::TernaryGrid,
            Payload::GoalPose(_) => PayloadKind::GoalPose,
            Payload::ModeAnnouncement(_) => PayloadKind::ModeAnnouncement,
            Payload::DistanceSample(_) => PayloadKind::DistanceSample,
            Payload::TrendLabel(_) => PayloadKind::TrendLabel,
            Payload::StateAction(_) => PayloadKind::StateAction,
            Payload::Episode(_) => PayloadKind::Episode,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub topic: Topic,
    pub stamp: f64,
    pub seq: u64,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("{topic} carries {expected:?}, got {found:?}")]
    PayloadTypeMismatch {
        topic: Topic,
        expected: PayloadKind,
        found: PayloadKind,
    },
}

type Queue = Arc<Mutex<VecDeque<Arc<Envelope>>>>;

/// Receiving end of a subscription. Dropping it unsubscribes.
#[derive(Debug)]
pub struct Subscription {
    queue: Queue,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<Arc<Envelope>> {
        self.queue.lock().expect("queue poisoned").pop_front()
    }

    pub fn drain(&self) -> Vec<Arc<Envelope>> {
        self.queue.lock().expect("queue poisoned").drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.queue.lock().expect("queue poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Default)]
struct TopicState {
    next_seq: u64,
    latched: Option<Arc<Envelope>>,
    subscribers: Vec<Weak<Mutex<VecDeque<Arc<Envelope>>>>>,
}

#[derive(Default)]
pub struct Bus {
    topics: [TopicState; 13],
    taps: Vec<Weak<Mutex<VecDeque<Arc<Envelope>>>>>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus").finish_non_exhaustive()
    }
}

fn deliver(subs: &mut Vec<Weak<Mutex<VecDeque<Arc<Envelope>>>>>, env: &Arc<Envelope>) {
    subs.retain(|w| match w.upgrade() {
        Some(q) => {
            q.lock().expect("queue poisoned").push_back(Arc::clone(env));
            true
        }
        None => false,
    });
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stamps `payload` with the topic's next sequence number and delivers it.
    pub fn publish(&mut self, topic: Topic, stamp: f64, payload: Payload) -> Result<Arc<Envelope>, BusError> {
        if payload.kind() != topic.schema() {
            return Err(BusError::PayloadTypeMismatch {
                topic,
                expected: topic.schema(),
                found: payload.kind(),
            });
        }
        let state = &mut self.topics[topic.slot()];
        state.next_seq += 1;
        let env = Arc::new(Envelope {
            topic,
            stamp,
            seq: state.next_seq,
            payload,
        });
        if topic.is_latched() {
            state.latched = Some(Arc::clone(&env));
        }
        deliver(&mut state.subscribers, &env);
        deliver(&mut self.taps, &env);
        Ok(env)
    }

    pub fn publish_named(&mut self, name: &str, stamp: f64, payload: Payload) -> Result<Arc<Envelope>, BusError> {
        self.publish(Topic::from_name(name)?, stamp, payload)
    }

    pub fn subscribe(&mut self, topic: Topic) -> Subscription {
        let queue: Queue = Arc::default();
        let state = &mut self.topics[topic.slot()];
        if let Some(l) = &state.latched {
            queue.lock().expect("queue poisoned").push_back(Arc::clone(l));
        }
        state.subscribers.push(Arc::downgrade(&queue));
        Subscription { queue }
    }

    pub fn subscribe_named(&mut self, name: &str) -> Result<Subscription, BusError> {
        Ok(self.subscribe(Topic::from_name(name)?))
    }

    /// Receives every envelope on every topic in publish order, preceded by
    /// the latched values (in roster order).
    pub fn subscribe_all(&mut self) -> Subscription {
        let queue: Queue = Arc::default();
        {
            let mut q = queue.lock().expect("queue poisoned");
            for t in Topic::ALL {
                if let Some(l) = &self.topics[t.slot()].latched {
                    q.push_back(Arc::clone(l));
                }
            }
        }
        self.taps.push(Arc::downgrade(&queue));
        Subscription { queue }
    }

    pub fn latched(&self, topic: Topic) -> Option<&Arc<Envelope>> {
        self.topics[topic.slot()].latched.as_ref()
    }
}
