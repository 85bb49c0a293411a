//! JSON text frames for the UI socket: `{"topic", "stamp", "seq", "data"}`.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{BusError, Envelope, Payload, PayloadKind, Topic};

/// Topics a client may publish.
pub const CLIENT_TOPICS: [Topic; 2] = [Topic::CmdVelHuman, Topic::Goal];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BridgeError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("clients may not publish on {0}")]
    ForbiddenTopic(Topic),
}

impl From<BusError> for BridgeError {
    fn from(e: BusError) -> Self {
        match e {
            BusError::UnknownTopic(t) => BridgeError::UnknownTopic(t),
            other => BridgeError::MalformedFrame(other.to_string()),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payloads serialize to JSON")
}

fn data_value(payload: &Payload) -> Value {
    match payload {
        Payload::VelocityCommand(v) => to_value(v),
        Payload::LaserScan(v) => to_value(v),
        Payload::PoseEstimate(v) => to_value(v),
        Payload::TernaryGrid(v) => to_value(v),
        Payload::GoalPose(v) => to_value(v),
        Payload::ModeAnnouncement(v) => to_value(v),
        Payload::DistanceSample(v) => to_value(v),
        Payload::TrendLabel(v) => to_value(v),
        Payload::StateAction(v) => to_value(v),
        Payload::Episode(v) => to_value(v),
    }
}

fn parse<T: DeserializeOwned>(data: Value) -> Result<T, BridgeError> {
    serde_json::from_value(data).map_err(|e| BridgeError::MalformedFrame(format!("data: {e}")))
}

fn payload_from(kind: PayloadKind, data: Value) -> Result<Payload, BridgeError> {
    Ok(match kind {
        PayloadKind::VelocityCommand => Payload::VelocityCommand(parse(data)?),
        PayloadKind::LaserScan => Payload::LaserScan(parse(data)?),
        PayloadKind::PoseEstimate => Payload::PoseEstimate(parse(data)?),
        PayloadKind::TernaryGrid => Payload::TernaryGrid(parse(data)?),
        PayloadKind::GoalPose => Payload::GoalPose(parse(data)?),
        PayloadKind::ModeAnnouncement => Payload::ModeAnnouncement(parse(data)?),
        PayloadKind::DistanceSample => Payload::DistanceSample(parse(data)?),
        PayloadKind::TrendLabel => Payload::TrendLabel(parse(data)?),
        PayloadKind::StateAction => Payload::StateAction(parse(data)?),
        PayloadKind::Episode => Payload::Episode(parse(data)?),
    })
}

pub fn encode_frame(env: &Envelope) -> String {
    let mut m = Map::new();
    m.insert("topic".into(), Value::from(env.topic.name()));
    m.insert("stamp".into(), to_value(&env.stamp));
    m.insert("seq".into(), Value::from(env.seq));
    m.insert("data".into(), data_value(&env.payload));
    Value::Object(m).to_string()
}

pub fn decode_frame(frame: &str) -> Result<Envelope, BridgeError> {
    let value: Value = serde_json::from_str(frame).map_err(|e| BridgeError::MalformedFrame(e.to_string()))?;
    let Value::Object(mut m) = value else {
        return Err(BridgeError::MalformedFrame("frame is not an object".into()));
    };
    let mut take = |k: &str| m.remove(k).ok_or_else(|| BridgeError::MalformedFrame(format!("missing \"{k}\"")));
    let topic = take("topic")?;
    let stamp = take("stamp")?;
    let seq = take("seq")?;
    let data = take("data")?;
    let name = topic
        .as_str()
        .ok_or_else(|| BridgeError::MalformedFrame("topic must be a string".into()))?;
    let topic = Topic::from_name(name)?;
    let stamp = stamp
        .as_f64()
        .filter(|s| s.is_finite())
        .ok_or_else(|| BridgeError::MalformedFrame("stamp must be a number".into()))?;
    let seq = seq
        .as_u64()
        .ok_or_else(|| BridgeError::MalformedFrame("seq must be a non-negative integer".into()))?;
    Ok(Envelope {
        topic,
        stamp,
        seq,
        payload: payload_from(topic.schema(), data)?,
    })
}

/// Decodes a frame received from a client, rejecting server-only topics.
pub fn decode_client_frame(frame: &str) -> Result<Envelope, BridgeError> {
    let env = decode_frame(frame)?;
    if !CLIENT_TOPICS.contains(&env.topic) {
        return Err(BridgeError::ForbiddenTopic(env.topic));
    }
    Ok(env)
}
