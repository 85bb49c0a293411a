//! Ten-item cognitive questionnaire, scoring, and the priority
//! configuration that sets how eagerly the machine intervenes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristic::TrendLabel;
use crate::memory::{MemoryError, MemoryStore, ProceduralRecord, RecordPayload};

pub const ITEM_COUNT: usize = 10;
/// Highest score still placed in the low group.
pub const LCS_MAX_SCORE: u8 = 4;

pub const LCS_PAUSE_TIMEOUT: f64 = 0.4;
pub const HCS_PAUSE_TIMEOUT: f64 = 0.8;
pub const TREND_WINDOW: f64 = 3.0;
pub const WORSEN_EPSILON: f64 = 0.05;

const VOWEL_WORD: &str = "aeroplane";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Group {
    Lcs,
    Hcs,
}

impl Group {
    pub fn from_score(score: u8) -> Self {
        if score <= LCS_MAX_SCORE {
            Group::Lcs
        } else {
            Group::Hcs
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Lcs => "LCS",
            Group::Hcs => "HCS",
        }
    }

    /// Letter used in subject tables: A for the high group, B for the low.
    pub fn letter(self) -> char {
        match self {
            Group::Hcs => 'A',
            Group::Lcs => 'B',
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LCS" | "B" => Some(Group::Lcs),
            "HCS" | "A" => Some(Group::Hcs),
            _ => None,
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FactKind {
    Date,
    City,
    Season,
    Floor,
    VowelCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemKind {
    YesNo,
    Fact(FactKind),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub id: u8,
    pub prompt: String,
    pub kind: ItemKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Questionnaire {
    items: Vec<QuestionItem>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssessmentError {
    #[error("expected {ITEM_COUNT} answers, got {0}")]
    WrongAnswerCount(usize),
    #[error("questionnaire must have {ITEM_COUNT} items with ids 1..={ITEM_COUNT}")]
    InvalidQuestionnaire,
    #[error("assessment aborted at item {item}")]
    AbortedByUser { item: u8 },
    #[error("memory write failed: {0}")]
    Memory(String),
}

impl Questionnaire {
    pub fn new(items: Vec<QuestionItem>) -> Result<Self, AssessmentError> {
        let ids: BTreeSet<u8> = items.iter().map(|i| i.id).collect();
        let expected: BTreeSet<u8> = (1..=ITEM_COUNT as u8).collect();
        if items.len() != ITEM_COUNT || ids != expected {
            return Err(AssessmentError::InvalidQuestionnaire);
        }
        Ok(Self { items })
    }

    /// Five yes/no self-reports followed by five orientation checks.
    pub fn standard() -> Self {
        let yes_no = [
            "Have you ever played a game?",
            "Are you familiar with mazes?",
            "Could you solve a maze drawn on paper?",
            "Can you use the basic functions of a mobile phone?",
            "Given the ingredients, can you cook a proper meal?",
        ];
        let facts = [
            ("What is the date today?", FactKind::Date),
            ("Which city are we in?", FactKind::City),
            ("What season is it now?", FactKind::Season),
            ("Which floor are we on?", FactKind::Floor),
            ("How many vowels does the word \"aeroplane\" contain?", FactKind::VowelCount),
        ];
        let mut items: Vec<QuestionItem> = yes_no
            .iter()
            .map(|p| (p.to_string(), ItemKind::YesNo))
            .chain(facts.iter().map(|(p, f)| (p.to_string(), ItemKind::Fact(*f))))
            .enumerate()
            .map(|(k, (prompt, kind))| QuestionItem {
                id: k as u8 + 1,
                prompt,
                kind,
            })
            .collect();
        items.sort_by_key(|i| i.id);
        Self { items }
    }

    pub fn items(&self) -> &[QuestionItem] {
        &self.items
    }
}

/// Ground truth for the orientation items, supplied per run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSheet {
    pub date: String,
    pub city: String,
    pub season: String,
    pub floor: String,
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn vowel_count(word: &str) -> usize {
    word.chars().filter(|c| "aeiouAEIOU".contains(*c)).count()
}

impl FactSheet {
    pub fn check(&self, fact: FactKind, response: &str) -> bool {
        let expected = match fact {
            FactKind::Date => &self.date,
            FactKind::City => &self.city,
            FactKind::Season => &self.season,
            FactKind::Floor => &self.floor,
            FactKind::VowelCount => {
                return response.trim().parse::<usize>().ok() == Some(vowel_count(VOWEL_WORD));
            }
        };
        let (a, b) = (normalize(expected), normalize(response));
        if a.is_empty() {
            return false;
        }
        match (a.parse::<i64>(), b.parse::<i64>()) {
            (Ok(x), Ok(y)) => x == y,
            _ => a == b,
        }
    }
}

/// Scores one raw response.
pub fn evaluate(item: &QuestionItem, response: &str, facts: &FactSheet) -> bool {
    match item.kind {
        ItemKind::YesNo => matches!(normalize(response).as_str(), "yes" | "y"),
        ItemKind::Fact(f) => facts.check(f, response),
    }
}

pub fn score_answers(answers: &[bool]) -> Result<(u8, Group), AssessmentError> {
    if answers.len() != ITEM_COUNT {
        return Err(AssessmentError::WrongAnswerCount(answers.len()));
    }
    let score = answers.iter().filter(|a| **a).count() as u8;
    Ok((score, Group::from_score(score)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CognitiveProfile {
    pub subject_id: String,
    pub answers: [bool; ITEM_COUNT],
    pub score: u8,
    pub group: Group,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// values keep their inner spacing. Keys map to (line, value).
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, (usize, String)>, ParseError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ParseError::new(n + 1, "expected key=value"))?;
        let key = k.trim().to_string();
        if out.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
            return Err(ParseError::new(n + 1, format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

fn required<'a>(kv: &'a BTreeMap<String, (usize, String)>, key: &str) -> Result<(usize, &'a str), ParseError> {
    kv.get(key)
        .map(|(l, v)| (*l, v.as_str()))
        .ok_or_else(|| ParseError::new(0, format!("missing key {key}")))
}

fn parse_f64(kv: &BTreeMap<String, (usize, String)>, key: &str) -> Result<f64, ParseError> {
    let (line, v) = required(kv, key)?;
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::new(line, format!("{key}: not a number: {v}")))
}

impl CognitiveProfile {
    pub fn from_answers(subject_id: impl Into<String>, answers: [bool; ITEM_COUNT]) -> Self {
        let (score, group) = score_answers(&answers).expect("fixed-size answers");
        Self {
            subject_id: subject_id.into(),
            answers,
            score,
            group,
        }
    }

    /// Profile whose first `score` items are positive.
    pub fn with_score(subject_id: impl Into<String>, score: u8) -> Self {
        assert!(score as usize <= ITEM_COUNT, "score out of range");
        let mut answers = [false; ITEM_COUNT];
        answers[..score as usize].iter_mut().for_each(|a| *a = true);
        Self::from_answers(subject_id, answers)
    }

    pub fn answers_string(&self) -> String {
        self.answers.iter().map(|a| if *a { '1' } else { '0' }).collect()
    }

    pub fn to_kv(&self) -> String {
        format!(
            "subject_id={}\nanswers={}\nscore={}\ngroup={}\n",
            self.subject_id,
            self.answers_string(),
            self.score,
            self.group
        )
    }

    pub fn from_kv(text: &str) -> Result<Self, ParseError> {
        Self::from_key_values(&parse_key_values(text)?)
    }

    /// Builds a profile from parsed pairs; `score` and `group`, when given,
    /// must agree with the answers. Unknown keys are ignored.
    pub fn from_key_values(kv: &BTreeMap<String, (usize, String)>) -> Result<Self, ParseError> {
        let (_, id) = required(kv, "subject_id")?;
        let (line, raw) = required(kv, "answers")?;
        let bits: Vec<bool> = raw
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(ParseError::new(line, "answers must be 0/1 digits")),
            })
            .collect::<Result<_, _>>()?;
        let answers: [bool; ITEM_COUNT] = bits
            .try_into()
            .map_err(|_| ParseError::new(line, format!("answers must have {ITEM_COUNT} digits")))?;
        let profile = Self::from_answers(id, answers);
        if let Some((l, s)) = kv.get("score") {
            if s.parse::<u8>().ok() != Some(profile.score) {
                return Err(ParseError::new(*l, "score disagrees with answers"));
            }
        }
        if let Some((l, g)) = kv.get("group") {
            if Group::parse(g) != Some(profile.group) {
                return Err(ParseError::new(*l, "group disagrees with score"));
            }
        }
        Ok(profile)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub group: Group,
    pub pause_timeout: f64,
    pub trend_window: f64,
    pub worsen_epsilon: f64,
    pub takeover_trends: BTreeSet<TrendLabel>,
}

fn takeover_trends_for(group: Group) -> BTreeSet<TrendLabel> {
    match group {
        Group::Lcs => [TrendLabel::Worsening, TrendLabel::Neutral].into(),
        Group::Hcs => [TrendLabel::Worsening].into(),
    }
}

pub fn make_priority_config(profile: &CognitiveProfile) -> PriorityConfig {
    PriorityConfig::for_group(profile.group)
}

impl PriorityConfig {
    pub fn for_group(group: Group) -> Self {
        Self {
            group,
            pause_timeout: match group {
                Group::Lcs => LCS_PAUSE_TIMEOUT,
                Group::Hcs => HCS_PAUSE_TIMEOUT,
            },
            trend_window: TREND_WINDOW,
            worsen_epsilon: WORSEN_EPSILON,
            takeover_trends: takeover_trends_for(group),
        }
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let trends: Vec<&str> = self.takeover_trends.iter().map(|t| t.as_str()).collect();
        let _ = writeln!(s, "group={}", self.group);
        let _ = writeln!(s, "pause_timeout={}", self.pause_timeout);
        let _ = writeln!(s, "trend_window={}", self.trend_window);
        let _ = writeln!(s, "worsen_epsilon={}", self.worsen_epsilon);
        let _ = writeln!(s, "takeover_trends={}", trends.join(","));
        s
    }

    pub fn from_kv(text: &str) -> Result<Self, ParseError> {
        let kv = parse_key_values(text)?;
        let (gl, g) = required(&kv, "group")?;
        let group = Group::parse(g).ok_or_else(|| ParseError::new(gl, format!("unknown group {g}")))?;
        let pause_timeout = parse_f64(&kv, "pause_timeout")?;
        let trend_window = parse_f64(&kv, "trend_window")?;
        let worsen_epsilon = parse_f64(&kv, "worsen_epsilon")?;
        let (tl, t) = required(&kv, "takeover_trends")?;
        let takeover_trends = t
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| TrendLabel::parse(s).ok_or_else(|| ParseError::new(tl, format!("unknown trend {s}"))))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if pause_timeout <= 0.0 || trend_window <= 0.0 || worsen_epsilon < 0.0 {
            return Err(ParseError::new(0, "timeouts must be positive and epsilon non-negative"));
        }
        if takeover_trends != takeover_trends_for(group) {
            return Err(ParseError::new(tl, format!("takeover_trends inconsistent with group {group}")));
        }
        Ok(Self {
            group,
            pause_timeout,
            trend_window,
            worsen_epsilon,
            takeover_trends,
        })
    }
}

/// Supplies one raw response per item; `None` means the user quit.
pub trait AnswerSource {
    fn answer(&mut self, item: &QuestionItem) -> Option<String>;
}

/// Replays a fixed list of responses.
#[derive(Clone, Debug, Default)]
pub struct ScriptedAnswers {
    responses: std::collections::VecDeque<String>,
}

impl ScriptedAnswers {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(responses: I) -> Self {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }
}

impl AnswerSource for ScriptedAnswers {
    fn answer(&mut self, _item: &QuestionItem) -> Option<String> {
        self.responses.pop_front()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assessment {
    pub profile: CognitiveProfile,
    pub responses: Vec<String>,
}

/// Runs the questionnaire, scores it and stores the profile in procedural
/// memory under `COGNITIVE_SCORE`.
pub fn administer(
    questionnaire: &Questionnaire,
    source: &mut dyn AnswerSource,
    facts: &FactSheet,
    subject_id: &str,
    memory: &mut MemoryStore,
    stamp: f64,
) -> Result<Assessment, AssessmentError> {
    let mut responses = Vec::with_capacity(ITEM_COUNT);
    let mut answers = [false; ITEM_COUNT];
    for (k, item) in questionnaire.items().iter().enumerate() {
        let r = source.answer(item).ok_or(AssessmentError::AbortedByUser { item: item.id })?;
        answers[k] = evaluate(item, &r, facts);
        responses.push(r);
    }
    let profile = CognitiveProfile::from_answers(subject_id, answers);
    memory
        .put(ProceduralRecord {
            stamp,
            payload: RecordPayload::CognitiveScore(profile.clone()),
        })
        .map_err(|e: MemoryError| AssessmentError::Memory(e.to_string()))?;
    Ok(Assessment { profile, responses })
}
