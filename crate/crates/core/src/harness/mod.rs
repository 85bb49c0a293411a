//! Scripted experiments: subject presets, the live session loop, single
//! trials, suites and the mapping coverage tour.

mod driver;
mod session;
mod subject;
mod suite;
mod tour;
mod trial;

pub use driver::{DriverActivity, DriverError, DriverParams, ScriptedDriver};
pub use session::{RunMode, Session, SessionConfig, SessionError, TickReport};
pub use subject::{Subject, SubjectError};
pub use suite::{median, run_suite, SuiteError, SuiteResults, SuiteRow, SuiteSpec, CSV_HEADER};
pub use tour::{coverage_tour, viewpoints};
pub use trial::{
    driver_seed, far_corner_goal, reference_world, run_trial, run_trial_with_memory, RouteKeeper, RunConfig,
    RunResult, TrialError, DEFAULT_TIME_LIMIT, REFERENCE_MAZE,
};
