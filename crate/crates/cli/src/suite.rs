//! `c3a suite --config <file>`.
//!
//! ```toml
//! maze = "maze.txt"            # optional, the reference maze otherwise
//! subjects = ["subject_1", "people/anna.txt"]
//! modes = ["human", "machine", "collab"]
//! seeds = { from = 1, to = 20 } # or a list: [1, 2, 3]
//! time_limit = 600.0           # optional
//! goal = [39, 27]              # optional
//! out = "results.csv"          # optional, stdout otherwise
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use c3a_core::harness::{reference_world, run_suite, RunMode, SuiteSpec};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Seeds {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteConfig {
    maze: Option<PathBuf>,
    subjects: Vec<String>,
    modes: Vec<String>,
    seeds: Seeds,
    time_limit: Option<f64>,
    goal: Option<(usize, usize)>,
    out: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn run(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let cfg: SuiteConfig = toml::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let world = match &cfg.maze {
        Some(m) => crate::read_maze(&resolve(base, m))?,
        None => reference_world(),
    };
    let subjects = cfg
        .subjects
        .iter()
        .map(|s| {
            let local = resolve(base, Path::new(s));
            crate::read_subject(if local.exists() { local.to_str().unwrap_or(s) } else { s })
        })
        .collect::<Result<Vec<_>>>()?;
    let modes = cfg
        .modes
        .iter()
        .map(|m| RunMode::parse(m).ok_or_else(|| anyhow!("unknown mode {m:?}")))
        .collect::<Result<Vec<_>>>()?;
    let seeds = match cfg.seeds {
        Seeds::List(v) => v,
        Seeds::Range { from, to } => (from..=to).collect(),
    };

    let mut spec = SuiteSpec::new(world, subjects, modes, seeds);
    spec.goal_cell = cfg.goal;
    if let Some(t) = cfg.time_limit {
        spec.time_limit = t;
    }
    let results = run_suite(&spec)?;
    let failed = results.rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} trials could not run");
    }
    crate::write_output(cfg.out.map(|o| resolve(base, &o)).as_deref(), &results.to_csv())
}
