//! Subject presets: a cognitive profile plus driving behaviour.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::driver::DriverParams;
use crate::cognitive::{parse_key_values, CognitiveProfile, ParseError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub profile: CognitiveProfile,
    pub driver: DriverParams,
}

#[derive(Debug, Error)]
pub enum SubjectError {
    #[error("subject file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("subject file: {0}")]
    Parse(#[from] ParseError),
    #[error("unknown built-in subject {0}")]
    UnknownPreset(String),
}

const PRESETS: [(&str, &str); 6] = [
    ("subject_1", include_str!("../../assets/subjects/subject_1.txt")),
    ("subject_2", include_str!("../../assets/subjects/subject_2.txt")),
    ("subject_3", include_str!("../../assets/subjects/subject_3.txt")),
    ("subject_4", include_str!("../../assets/subjects/subject_4.txt")),
    ("subject_5", include_str!("../../assets/subjects/subject_5.txt")),
    ("subject_6", include_str!("../../assets/subjects/subject_6.txt")),
];

impl Subject {
    pub fn parse(text: &str) -> Result<Self, SubjectError> {
        let kv = parse_key_values(text)?;
        let profile = CognitiveProfile::from_key_values(&kv)?;
        let num = |key: &str, default: Option<f64>| -> Result<f64, ParseError> {
            match kv.get(key) {
                Some((line, v)) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ParseError {
                        line: *line,
                        message: format!("{key}: not a number: {v}"),
                    }),
                None => default.ok_or_else(|| ParseError {
                    line: 0,
                    message: format!("missing key {key}"),
                }),
            }
        };
        let base = DriverParams::default();
        let driver = DriverParams {
            attentiveness: num("attentiveness", Some(1.0))?,
            heading_noise_sigma: num("heading_noise_sigma", Some(0.0))?,
            pause_prob: num("pause_prob", Some(0.0))?,
            pause_duration: (num("pause_min", Some(0.0))?, num("pause_max", Some(0.0))?),
            wrong_turn_prob: num("wrong_turn_prob", Some(0.0))?,
            wrong_turn_duration: (num("wrong_turn_min", Some(0.0))?, num("wrong_turn_max", Some(0.0))?),
            lookahead: num("lookahead", Some(base.lookahead))?,
            heading_gain: num("heading_gain", Some(base.heading_gain))?,
        };
        driver.validate().map_err(|e| ParseError {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(Self { profile, driver })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SubjectError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SubjectError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// One of the six shipped presets, `subject_1` .. `subject_6`.
    pub fn builtin(name: &str) -> Result<Self, SubjectError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| SubjectError::UnknownPreset(name.to_string()))?;
        Ok(Self::parse(text).expect("shipped presets parse"))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn to_kv(&self) -> String {
        let d = &self.driver;
        format!(
            "{}attentiveness={}\nheading_noise_sigma={}\npause_prob={}\npause_min={}\npause_max={}\n\
             wrong_turn_prob={}\nwrong_turn_min={}\nwrong_turn_max={}\nlookahead={}\nheading_gain={}\n",
            self.profile.to_kv(),
            d.attentiveness,
            d.heading_noise_sigma,
            d.pause_prob,
            d.pause_duration.0,
            d.pause_duration.1,
            d.wrong_turn_prob,
            d.wrong_turn_duration.0,
            d.wrong_turn_duration.1,
            d.lookahead,
            d.heading_gain
        )
    }
}
