//! `c3a assess`: the questionnaire on stdin/stderr.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use c3a_core::cognitive::{administer, make_priority_config, AnswerSource, FactSheet, QuestionItem, Questionnaire};
use c3a_core::memory::MemoryStore;
use clap::Args;

#[derive(Args)]
pub struct AssessArgs {
    #[arg(long, default_value = "subject")]
    subject_id: String,
    /// Today's date as the subject should say it.
    #[arg(long)]
    date: String,
    #[arg(long)]
    city: String,
    #[arg(long)]
    season: String,
    #[arg(long)]
    floor: String,
    #[arg(long, default_value = "priority.cfg")]
    priority_out: PathBuf,
    /// Defaults to `<subject-id>.txt`.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Log the score into this memory file (appends if it exists).
    #[arg(long)]
    memory_log: Option<PathBuf>,
}

struct Terminal<R> {
    input: R,
}

impl<R: BufRead> AnswerSource for Terminal<R> {
    fn answer(&mut self, item: &QuestionItem) -> Option<String> {
        eprint!("{}. {} ", item.id, item.prompt);
        let _ = std::io::stderr().flush();
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim_end_matches(['\r', '\n']).to_string()),
        }
    }
}

pub fn run(args: AssessArgs) -> Result<()> {
    let facts = FactSheet {
        date: args.date,
        city: args.city,
        season: args.season,
        floor: args.floor,
    };
    let mut memory = match &args.memory_log {
        Some(p) => MemoryStore::open(p).with_context(|| format!("memory log {}", p.display()))?,
        None => MemoryStore::in_memory(),
    };
    let mut source = Terminal {
        input: std::io::stdin().lock(),
    };
    let assessment = administer(&Questionnaire::standard(), &mut source, &facts, &args.subject_id, &mut memory, 0.0)?;
    let profile = assessment.profile;
    let priority = make_priority_config(&profile);

    let profile_out = args
        .profile_out
        .unwrap_or_else(|| PathBuf::from(format!("{}.txt", args.subject_id)));
    std::fs::write(&args.priority_out, priority.to_kv())
        .with_context(|| format!("writing {}", args.priority_out.display()))?;
    std::fs::write(&profile_out, profile.to_kv()).with_context(|| format!("writing {}", profile_out.display()))?;
    eprintln!();
    println!(
        "{}: score {} ({}); wrote {} and {}",
        profile.subject_id,
        profile.score,
        profile.group,
        args.priority_out.display(),
        profile_out.display()
    );
    Ok(())
}
