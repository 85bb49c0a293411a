//! `c3a`: run scripted trials and suites, serve a live session, take the
//! questionnaire, replay memory logs.

mod assess;
mod serve;
mod suite;

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use c3a_core::harness::{run_trial_with_memory, RunConfig, RunMode, Subject, SuiteRow, CSV_HEADER};
use c3a_core::memory::{MemoryStore, ProceduralKey};
use c3a_core::world::{load_maze, GridWorld};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "c3a", version, about = "Collaborative wheelchair control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One scripted trial; prints a CSV record.
    Run {
        #[arg(long)]
        maze: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: RunMode,
        /// Subject file, or a preset name (subject_1 .. subject_6).
        #[arg(long)]
        subject: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        memory_log: Option<PathBuf>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Goal cell as i,j; defaults to the far open corner.
        #[arg(long, value_parser = parse_cell)]
        goal: Option<(usize, usize)>,
    },
    /// A subjects x modes x seeds batch described by a TOML file.
    Suite {
        #[arg(long)]
        config: PathBuf,
    },
    /// Live collaborative session over a WebSocket bridge.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        maze: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Stop after this many simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        memory_log: Option<PathBuf>,
    },
    /// Interactive questionnaire; writes a priority config and a profile.
    Assess(assess::AssessArgs),
    /// Rebuild a memory log and print its episodes.
    Replay { log: PathBuf },
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    RunMode::parse(s).ok_or_else(|| format!("unknown mode {s:?} (human, machine, collab)"))
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or("expected i,j")?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((n(i)?, n(j)?))
}

pub(crate) fn read_maze(path: &Path) -> Result<GridWorld> {
    let text = fs::read_to_string(path).with_context(|| format!("reading maze {}", path.display()))?;
    load_maze(&text).with_context(|| format!("maze {}", path.display()))
}

/// A path if one exists, otherwise a preset name.
pub(crate) fn read_subject(spec: &str) -> Result<Subject> {
    let path = Path::new(spec);
    if path.exists() {
        return Subject::load(path).with_context(|| format!("subject {spec}"));
    }
    Subject::builtin(spec).map_err(|_| anyhow!("subject {spec}: no such file or preset"))
}

fn open_memory(path: Option<&Path>) -> Result<MemoryStore> {
    match path {
        Some(p) => MemoryStore::create(p).with_context(|| format!("memory log {}", p.display())),
        None => Ok(MemoryStore::in_memory()),
    }
}

pub(crate) fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn replay(log: &Path) -> Result<()> {
    let store = MemoryStore::replay(log).with_context(|| format!("replaying {}", log.display()))?;
    let mut out = String::new();
    for e in store.episodes() {
        out += &format!(
            "#{} {} {:.3}..{:.3} ({} state-action records)\n",
            e.event_id,
            e.kind.as_str(),
            e.t_start,
            e.t_end,
            e.trace.len()
        );
    }
    for key in ProceduralKey::ALL {
        out += &format!("{key:?}: {} records\n", store.records(key).len());
    }
    write_output(None, &out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            maze,
            mode,
            subject,
            seed,
            out,
            memory_log,
            time_limit,
            goal,
        } => {
            let mut config = RunConfig::new(mode, read_maze(&maze)?, read_subject(&subject)?, seed);
            config.goal_cell = goal;
            if let Some(t) = time_limit {
                config.time_limit = t;
            }
            let (result, _) = run_trial_with_memory(&config, open_memory(memory_log.as_deref())?)?;
            let csv = format!("{CSV_HEADER}\n{}\n", SuiteRow::from_result(result).to_csv_line());
            write_output(out.as_deref(), &csv)
        }
        Command::Suite { config } => suite::run(&config),
        Command::Serve {
            port,
            host,
            maze,
            subject,
            seed,
            duration,
            memory_log,
        } => {
            if duration.is_some_and(|d| !(d > 0.0)) {
                bail!("--duration must be positive");
            }
            let world = read_maze(&maze)?;
            let subject = read_subject(&subject)?;
            let listener = TcpListener::bind((host.as_str(), port)).with_context(|| format!("binding {host}:{port}"))?;
            println!("listening on ws://{}", listener.local_addr()?);
            std::io::stdout().flush()?;
            let opts = serve::ServeOptions {
                seed,
                hold: 0.15,
                duration,
                memory: open_memory(memory_log.as_deref())?,
            };
            serve::serve(listener, world, &subject, opts)
        }
        Command::Assess(args) => assess::run(args),
        Command::Replay { log } => replay(&log),
    }
}
