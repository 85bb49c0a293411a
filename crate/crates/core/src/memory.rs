//! Procedural and episodic memory backed by an append-only JSON-lines log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognitive::CognitiveProfile;
use crate::heuristic::GoalPose;
use crate::{Driver, Pose2D, VelocityCommand};

pub const LOG_SCHEMA: &str = "c3a-memory";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProceduralKey {
    CognitiveScore,
    Goal,
    AgentPosition,
    StateAction,
}

impl ProceduralKey {
    pub const ALL: [ProceduralKey; 4] = [
        ProceduralKey::CognitiveScore,
        ProceduralKey::Goal,
        ProceduralKey::AgentPosition,
        ProceduralKey::StateAction,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

/// One tick's (mode, command, pose) triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateAction {
    pub mode: Driver,
    pub cmd: VelocityCommand,
    pub pose: Pose2D,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "key", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RecordPayload {
    CognitiveScore(CognitiveProfile),
    Goal(GoalPose),
    AgentPosition(Pose2D),
    StateAction(StateAction),
}

impl RecordPayload {
    pub fn key(&self) -> ProceduralKey {
        match self {
            RecordPayload::CognitiveScore(_) => ProceduralKey::CognitiveScore,
            RecordPayload::Goal(_) => ProceduralKey::Goal,
            RecordPayload::AgentPosition(_) => ProceduralKey::AgentPosition,
            RecordPayload::StateAction(_) => ProceduralKey::StateAction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProceduralRecord {
    pub stamp: f64,
    pub payload: RecordPayload,
}

impl ProceduralRecord {
    pub fn key(&self) -> ProceduralKey {
        self.payload.key()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EpisodeKind {
    Takeover,
    Reclaim,
    GoalSet,
    GoalReached,
}

impl EpisodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeKind::Takeover => "TAKEOVER",
            EpisodeKind::Reclaim => "RECLAIM",
            EpisodeKind::GoalSet => "GOAL_SET",
            EpisodeKind::GoalReached => "GOAL_REACHED",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stamp: f64,
    pub state: StateAction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodicEvent {
    pub event_id: u64,
    pub kind: EpisodeKind,
    pub t_start: f64,
    pub t_end: f64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("stale stamp {stamp} for {key:?}, latest is {latest}")]
    StaleStamp { key: ProceduralKey, stamp: f64, latest: f64 },
    #[error("no record for {0:?}")]
    KeyAbsent(ProceduralKey),
    #[error("episode interval [{t_start}, {t_end}] is reversed")]
    InvalidInterval { t_start: f64, t_end: f64 },
    #[error("memory log {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("memory log {path} line {line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },
}

/// Result of [`MemoryStore::get`].
#[derive(Clone, Debug, PartialEq)]
pub enum Lookup<'a> {
    Latest(&'a ProceduralRecord),
    Log(&'a [ProceduralRecord]),
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    schema: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LogLine {
    Record(ProceduralRecord),
    Episode(EpisodicEvent),
}

struct Backing {
    path: PathBuf,
    file: File,
}

impl Backing {
    fn append(&mut self, line: &LogLine) -> Result<(), MemoryError> {
        let mut text = serde_json::to_string(line).expect("memory records serialize");
        text.push('\n');
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| MemoryError::IoFailure {
                path: self.path.clone(),
                source,
            })
    }
}

/// Keyed procedural log plus an episode list.
#[derive(Default)]
pub struct MemoryStore {
    procedural: [Vec<ProceduralRecord>; 4],
    episodes: Vec<EpisodicEvent>,
    backing: Option<Backing>,
}

impl std::fmt::Debug for MemoryStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryStore")
            .field("records", &self.procedural.iter().map(Vec::len).sum::<usize>())
            .field("episodes", &self.episodes.len())
            .field("backing", &self.backing.as_ref().map(|b| &b.path))
            .finish()
    }
}

impl MemoryStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Starts a fresh log at `path`, truncating any existing file.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| MemoryError::IoFailure {
            path: path.clone(),
            source,
        };
        let mut file = File::create(&path).map_err(io)?;
        let header = serde_json::to_string(&LogHeader {
            schema: LOG_SCHEMA.into(),
            version: LOG_VERSION,
        })
        .expect("header serializes");
        writeln!(file, "{header}").and_then(|_| file.flush()).map_err(io)?;
        Ok(Self {
            backing: Some(Backing { path, file }),
            ..Self::default()
        })
    }

    /// Replays an existing log and keeps appending to it. A missing or
    /// empty file starts a new log.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let path = path.as_ref().to_path_buf();
        match std::fs::metadata(&path) {
            Ok(m) if m.len() > 0 => {}
            _ => return Self::create(&path),
        }
        let mut store = Self::replay(&path)?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|source| MemoryError::IoFailure {
                path: path.clone(),
                source,
            })?;
        store.backing = Some(Backing { path, file });
        Ok(store)
    }

    /// Rebuilds the in-memory view from a log without opening it for writing.
    pub fn replay(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let path = path.as_ref().to_path_buf();
        let corrupt = |line: usize, message: String| MemoryError::CorruptLog {
            path: path.clone(),
            line,
            message,
        };
        let file = File::open(&path).map_err(|source| MemoryError::IoFailure {
            path: path.clone(),
            source,
        })?;
        let mut store = Self::default();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| MemoryError::IoFailure {
                path: path.clone(),
                source,
            })?;
            if n == 0 {
                let h: LogHeader = serde_json::from_str(&line).map_err(|e| corrupt(1, e.to_string()))?;
                if h.schema != LOG_SCHEMA || h.version != LOG_VERSION {
                    return Err(corrupt(1, format!("unsupported log {} v{}", h.schema, h.version)));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogLine>(&line).map_err(|e| corrupt(n + 1, e.to_string()))? {
                LogLine::Record(r) => store.insert(r).map_err(|e| corrupt(n + 1, e.to_string()))?,
                LogLine::Episode(e) => store.episodes.push(e),
            }
        }
        if store.episodes.is_empty() && store.procedural.iter().all(Vec::is_empty) {
            log::debug!("memory log {} holds no entries", path.display());
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.backing.as_ref().map(|b| b.path.as_path())
    }

    fn insert(&mut self, record: ProceduralRecord) -> Result<(), MemoryError> {
        let key = record.key();
        let log = &mut self.procedural[key.slot()];
        if let Some(last) = log.last() {
            if record.stamp < last.stamp {
                return Err(MemoryError::StaleStamp {
                    key,
                    stamp: record.stamp,
                    latest: last.stamp,
                });
            }
        }
        log.push(record);
        Ok(())
    }

    pub fn put(&mut self, record: ProceduralRecord) -> Result<(), MemoryError> {
        if let Some(last) = self.procedural[record.key().slot()].last() {
            if record.stamp < last.stamp {
                return Err(MemoryError::StaleStamp {
                    key: record.key(),
                    stamp: record.stamp,
                    latest: last.stamp,
                });
            }
        }
        if let Some(b) = self.backing.as_mut() {
            b.append(&LogLine::Record(record.clone()))?;
        }
        self.insert(record)
    }

    /// Latest record, or the whole ordered log for `STATE_ACTION`.
    pub fn get(&self, key: ProceduralKey) -> Result<Lookup<'_>, MemoryError> {
        let log = &self.procedural[key.slot()];
        match (key, log.last()) {
            (_, None) => Err(MemoryError::KeyAbsent(key)),
            (ProceduralKey::StateAction, Some(_)) => Ok(Lookup::Log(log)),
            (_, Some(last)) => Ok(Lookup::Latest(last)),
        }
    }

    pub fn latest(&self, key: ProceduralKey) -> Option<&ProceduralRecord> {
        self.procedural[key.slot()].last()
    }

    pub fn state_actions(&self) -> &[ProceduralRecord] {
        &self.procedural[ProceduralKey::StateAction.slot()]
    }

    /// Creates an episode from the `STATE_ACTION` records stamped inside
    /// `[t_start, t_end]`. An empty slice still yields an event.
    pub fn record_episode(&mut self, kind: EpisodeKind, t_start: f64, t_end: f64) -> Result<EpisodicEvent, MemoryError> {
        if t_start > t_end || !t_start.is_finite() || !t_end.is_finite() {
            return Err(MemoryError::InvalidInterval { t_start, t_end });
        }
        let log = self.state_actions();
        let lo = log.partition_point(|r| r.stamp < t_start);
        let hi = log.partition_point(|r| r.stamp <= t_end);
        let trace: Vec<TraceEntry> = log[lo..hi]
            .iter()
            .filter_map(|r| match &r.payload {
                RecordPayload::StateAction(s) => Some(TraceEntry {
                    stamp: r.stamp,
                    state: *s,
                }),
                _ => None,
            })
            .collect();
        if trace.is_empty() {
            log::warn!("{} episode over [{t_start}, {t_end}] has an empty trace", kind.as_str());
        }
        let event = EpisodicEvent {
            event_id: self.episodes.last().map_or(1, |e| e.event_id + 1),
            kind,
            t_start,
            t_end,
            trace,
        };
        if let Some(b) = self.backing.as_mut() {
            b.append(&LogLine::Episode(event.clone()))?;
        }
        self.episodes.push(event.clone());
        Ok(event)
    }

    pub fn recall(&self, kind: EpisodeKind) -> Vec<&EpisodicEvent> {
        self.episodes.iter().filter(|e| e.kind == kind).collect()
    }

    pub fn episodes(&self) -> &[EpisodicEvent] {
        &self.episodes
    }

    pub fn records(&self, key: ProceduralKey) -> &[ProceduralRecord] {
        &self.procedural[key.slot()]
    }
}
