//! Cartesian product of subjects, modes and seeds, with CSV output.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use super::session::RunMode;
use super::subject::Subject;
use super::trial::{run_trial, RunConfig, RunResult, DEFAULT_TIME_LIMIT};
use crate::cognitive::Group;
use crate::world::GridWorld;

pub const CSV_HEADER: &str =
    "subject_id,score,group,mode,seed,manoeuvring_time_s,timeout,takeover_count,reclaim_count,path_length_m";

#[derive(Clone, Debug)]
pub struct SuiteSpec {
    pub world: GridWorld,
    pub goal_cell: Option<(usize, usize)>,
    pub subjects: Vec<Subject>,
    pub modes: Vec<RunMode>,
    pub seeds: Vec<u64>,
    pub time_limit: f64,
}

impl SuiteSpec {
    pub fn new(world: GridWorld, subjects: Vec<Subject>, modes: Vec<RunMode>, seeds: Vec<u64>) -> Self {
        Self {
            world,
            goal_cell: None,
            subjects,
            modes,
            seeds,
            time_limit: DEFAULT_TIME_LIMIT,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuiteError {
    #[error("suite needs at least one {0}")]
    Empty(&'static str),
}

#[derive(Clone, Debug)]
pub struct SuiteRow {
    pub subject_id: String,
    pub score: u8,
    pub group: Group,
    pub mode: RunMode,
    pub seed: u64,
    /// The trial error message when the trial could not run.
    pub outcome: Result<RunResult, String>,
}

impl SuiteRow {
    pub fn from_result(result: RunResult) -> Self {
        Self {
            subject_id: result.subject_id.clone(),
            score: result.score,
            group: result.group,
            mode: result.mode,
            seed: result.seed,
            outcome: Ok(result),
        }
    }

    /// One CSV record without the line break. Failed trials print ERROR in
    /// the time column and leave the rest empty.
    pub fn to_csv_line(&self) -> String {
        let mut out = format!("{},{},{},{},{},", self.subject_id, self.score, self.group, self.mode, self.seed);
        match &self.outcome {
            Ok(res) => {
                let time = res.manoeuvring_time.map_or_else(String::new, |t| format!("{t:.3}"));
                let _ = write!(
                    out,
                    "{time},{},{},{},{:.3}",
                    res.timeout(),
                    res.takeover_count,
                    res.reclaim_count,
                    res.path_length
                );
            }
            Err(_) => out.push_str("ERROR,,,,"),
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResults {
    pub rows: Vec<SuiteRow>,
    pub time_limit: f64,
}

pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteResults, SuiteError> {
    if spec.subjects.is_empty() {
        return Err(SuiteError::Empty("subject"));
    }
    if spec.modes.is_empty() {
        return Err(SuiteError::Empty("mode"));
    }
    if spec.seeds.is_empty() {
        return Err(SuiteError::Empty("seed"));
    }
    let mut jobs: Vec<(&Subject, RunMode, u64)> = spec
        .subjects
        .iter()
        .flat_map(|s| spec.modes.iter().flat_map(move |&m| spec.seeds.iter().map(move |&seed| (s, m, seed))))
        .collect();
    jobs.sort_by(|a, b| {
        (&a.0.profile.subject_id, a.1, a.2).cmp(&(&b.0.profile.subject_id, b.1, b.2))
    });
    jobs.dedup_by(|a, b| a.0.profile.subject_id == b.0.profile.subject_id && a.1 == b.1 && a.2 == b.2);
    let rows = jobs
        .par_iter()
        .map(|&(subject, mode, seed)| {
            let config = RunConfig {
                goal_cell: spec.goal_cell,
                time_limit: spec.time_limit,
                ..RunConfig::new(mode, spec.world.clone(), subject.clone(), seed)
            };
            SuiteRow {
                subject_id: subject.profile.subject_id.clone(),
                score: subject.profile.score,
                group: subject.profile.group,
                mode,
                seed,
                outcome: run_trial(&config).map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(SuiteResults {
        rows,
        time_limit: spec.time_limit,
    })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

impl SuiteResults {
    fn completed<'a>(&'a self, subject_id: &'a str, mode: RunMode) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.subject_id == subject_id && r.mode == mode)
            .filter_map(|r| r.outcome.as_ref().ok())
    }

    /// Median manoeuvring time, counting a timeout as the time limit.
    pub fn median_time(&self, subject_id: &str, mode: RunMode) -> Option<f64> {
        let limit = self.time_limit;
        let mut t: Vec<f64> = self
            .completed(subject_id, mode)
            .map(|r| r.manoeuvring_time.unwrap_or(limit))
            .collect();
        median(&mut t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv_line());
            out.push('\n');
        }
        let mut groups: Vec<(&str, u8, Group, RunMode)> = self
            .rows
            .iter()
            .map(|r| (r.subject_id.as_str(), r.score, r.group, r.mode))
            .collect();
        groups.dedup();
        for (id, score, group, mode) in groups {
            let done: Vec<&RunResult> = self.completed(id, mode).collect();
            let med = |f: &dyn Fn(&RunResult) -> f64| {
                let mut v: Vec<f64> = done.iter().map(|r| f(r)).collect();
                median(&mut v).map_or_else(String::new, |m| format!("{m:.3}"))
            };
            let limit = self.time_limit;
            let _ = writeln!(
                out,
                "{id},{score},{group},{mode},median,{},{},{},{},{}",
                med(&|r| r.manoeuvring_time.unwrap_or(limit)),
                done.iter().filter(|r| r.timeout()).count(),
                med(&|r| r.takeover_count as f64),
                med(&|r| r.reclaim_count as f64),
                med(&|r| r.path_length),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn empty_lists_rejected() {
        let spec = SuiteSpec::new(super::super::trial::reference_world(), vec![], vec![RunMode::Machine], vec![1]);
        assert_eq!(run_suite(&spec).unwrap_err(), SuiteError::Empty("subject"));
    }
}
