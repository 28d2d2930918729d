//! `mbci`: every workflow without the dashboard.
//!
//! Exit codes: 0 success, 1 user error (bad flags, missing or corrupt input,
//! validation failures), 2 internal error. On success the last stdout line is
//! `result: <path>` when the command produced a file or directory.

mod analyze;
mod bench;
mod run;
mod serve;
mod source;
mod weights;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbci_core::par::Execution;
use mbci_core::session::SessionError;
use thiserror::Error;

pub use analyze::AnalyzeArgs;
pub use bench::BenchArgs;
pub use run::{ReplayArgs, RunArgs};
pub use serve::ServeArgs;
pub use source::{parse_duration, SourceArgs, SourceKindArg, SynthArgs};
pub use weights::WeightsCommand;

/// Default data directory when neither `--out` nor `MBCI_DATA_DIR` is set.
pub const DEFAULT_DATA_DIR: &str = "sessions";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Io { .. } | SessionError::ThreadGone | SessionError::Model(_) => CliError::Internal(e.to_string()),
            _ => CliError::User(e.to_string()),
        }
    }
}

pub fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}

/// What a successful command reports.
#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: String,
    pub result: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "mbci", version, about = "Mindfulness neurofeedback engine")]
pub struct Cli {
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a session headless until its planned end or Ctrl-C.
    Run(RunArgs),
    /// Re-score a recorded session and compare against its log.
    Replay(ReplayArgs),
    /// Write a synthetic recording.
    Synth(SynthArgs),
    /// Summarize sessions and run the cohort statistics.
    Analyze(AnalyzeArgs),
    /// Create, inspect or verify a weight container.
    #[command(subcommand)]
    Weights(WeightsCommand),
    /// Measure per-stage scoring latency over a source.
    Bench(BenchArgs),
    /// Serve the HTTP/WebSocket session API.
    Serve(ServeArgs),
}

impl Cli {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    pub fn execute(self) -> Result<Outcome, CliError> {
        let exec = self.execution();
        match self.command {
            Command::Run(a) => run::run(a, exec),
            Command::Replay(a) => run::replay(a, exec),
            Command::Synth(a) => source::synth(a),
            Command::Analyze(a) => analyze::analyze(a, exec),
            Command::Weights(c) => weights::weights(c),
            Command::Bench(a) => bench::bench(a, exec),
            Command::Serve(a) => serve::serve(a, exec),
        }
    }
}

/// Parses `args`, runs the command and prints its outcome.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not failures; bad flags are user errors.
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match cli.execute() {
        Ok(out) => {
            // A closed pipe (`mbci weights inspect | head`) is not a failure.
            let mut stdout = std::io::stdout().lock();
            if !out.summary.is_empty() {
                let _ = writeln!(stdout, "{}", out.summary.trim_end());
            }
            if let Some(p) = out.result {
                let _ = writeln!(stdout, "result: {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// failed write never leaves a partial file under the final name.
pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            CliError::Internal(format!("writing {}: {e}", path.display()))
        })
}
