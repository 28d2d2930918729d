//! `run` and `replay`.

use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Duration;

use clap::{Args, ValueEnum};
use mbci_core::feedback::{SceneCatalog, SessionMode, SESSION_MINUTES};
use mbci_core::ingest::{read_recording, SourceSpec};
use mbci_core::par::Execution;
use mbci_core::session::{replay_session, CompletionStatus, Pacing, RunOptions, SessionService, StartRequest};

use crate::source::SourceArgs;
use crate::{user, CliError, Outcome, DEFAULT_DATA_DIR};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rms,
    Pms,
    Rs,
}

impl From<ModeArg> for SessionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rms => SessionMode::Rms,
            ModeArg::Pms => SessionMode::Pms,
            ModeArg::Rs => SessionMode::Rs,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Weight container directory.
    #[arg(long)]
    pub weights: PathBuf,
    /// Data directory; the session gets its own subdirectory.
    #[arg(long, env = "MBCI_DATA_DIR", default_value = DEFAULT_DATA_DIR)]
    pub out: PathBuf,
    #[arg(long, default_value = "s01")]
    pub subject: String,
    #[arg(long)]
    pub session_id: Option<String>,
    /// Hold each hop until its wall-clock time instead of running flat out.
    #[arg(long)]
    pub realtime: bool,
    /// Playback speed factor for `--realtime`.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 0.5)]
    pub guidance_volume: f64,
}

fn protocol_seconds() -> f64 {
    f64::from(SESSION_MINUTES) * 60.0
}

/// Resolves on the first Ctrl-C; the sender is dropped if no handler can be installed.
fn interrupt_channel() -> mpsc::Receiver<()> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let Ok(rt) = tokio::runtime::Builder::new_current_thread().enable_all().build() else {
            return;
        };
        if rt.block_on(tokio::signal::ctrl_c()).is_ok() {
            let _ = tx.send(());
        }
    });
    rx
}

pub fn run(a: RunArgs, exec: Execution) -> Result<Outcome, CliError> {
    if a.realtime && !(a.speed.is_finite() && a.speed > 0.0) {
        return Err(user(format!("--speed must be positive, got {}", a.speed)));
    }
    let stream = a.source.stream(protocol_seconds())?;
    let planned = match (&stream.source, a.source.duration_seconds()?) {
        (_, Some(d)) => d,
        (SourceSpec::Replay { path }, None) => read_recording(path).map_err(|e| user(e.to_string()))?.duration_seconds(),
        _ => protocol_seconds(),
    }
    .min(protocol_seconds());

    let mut req = StartRequest::new(a.mode.into(), stream, &a.weights);
    req.subject_id = a.subject;
    req.seed = a.source.seed;
    req.planned_seconds = Some(planned);
    req.guidance_volume = a.guidance_volume;
    req.session_id = a.session_id;
    req.options = RunOptions {
        pacing: if a.realtime {
            Pacing::RealTime { speed: a.speed }
        } else {
            Pacing::Unpaced
        },
        execution: exec,
    };

    let service = SessionService::new(&a.out, SceneCatalog::default());
    let (id, dir) = service.start(req)?;
    let interrupts = interrupt_channel();
    let mut interrupted = false;
    let outcome = loop {
        match interrupts.recv_timeout(Duration::from_millis(50)) {
            Ok(()) => {
                interrupted = true;
                break service.stop()?;
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => std::thread::sleep(Duration::from_millis(50)),
            Err(mpsc::RecvTimeoutError::Timeout) => {}
        }
        if let Some(o) = service.try_wait()? {
            break o;
        }
    };

    let l = &outcome.latency;
    let mut summary = format!(
        "session {id} ({}) {}\n  duration {:.1} s, {} score events, {} dropped windows\n  scoring latency p50 {:.1} ms, p99 {:.1} ms, {} deadline misses",
        SessionMode::from(a.mode),
        match outcome.status {
            CompletionStatus::Complete => "complete",
            CompletionStatus::Aborted => "aborted",
        },
        outcome.duration_seconds,
        outcome.score_events,
        outcome.dropped_windows,
        l.total.p50_ms,
        l.total.p99_ms,
        l.deadline_misses,
    );
    if let Some(d) = &outcome.detail {
        summary.push_str(&format!("\n  {d}"));
    }
    if outcome.status == CompletionStatus::Aborted && !interrupted {
        return Err(user(format!("{summary}\n  data kept in {}", dir.display())));
    }
    Ok(Outcome {
        summary,
        result: Some(dir),
    })
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    /// Session directory.
    pub dir: PathBuf,
}

pub fn replay(a: ReplayArgs, exec: Execution) -> Result<Outcome, CliError> {
    let report = replay_session(&a.dir, exec)?;
    if !report.bit_identical() {
        let first: Vec<String> = report.mismatches.iter().take(5).map(ToString::to_string).collect();
        return Err(user(format!(
            "{} of {} logged windows differ on replay (first: {})",
            report.mismatches.len(),
            report.logged.len(),
            first.join(", ")
        )));
    }
    Ok(Outcome {
        summary: format!("{} windows re-scored; every score is bit-identical to the log", report.replayed.len()),
        result: Some(a.dir),
    })
}
