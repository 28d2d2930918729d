//! Live session orchestration and persistence.
//!
//! A session binds a sample source, the scoring pipeline and the feedback
//! engine on one thread. Every event it produces is appended to the session's
//! `events.log` before being broadcast, so subscribers never see anything the
//! log does not hold. Event times are seconds of recorded signal since session
//! start, which makes the log reproducible from the recording.
//!
//! On disk a session is a directory named by its id:
//!
//! - `eeg.raw`: the recording (see [`crate::ingest::RecordingHeader`]).
//! - `events.log`: one JSON object per line, tagged by `type`, with `t` in seconds.
//! - `manifest.toml`: descriptor, status and SHA-256 checksums of both files.
//!   It is written last and atomically, so a directory without a manifest, or
//!   whose checksums disagree, is an incomplete session.

mod broadcast;
mod events;
mod replay;
mod runner;
mod service;
mod store;

use std::path::PathBuf;

use thiserror::Error;

use crate::feedback::FeedbackError;
use crate::ingest::IngestError;
use crate::model::{ModelError, WeightsError};

pub use broadcast::Broadcaster;
pub use events::{EventPayload, SceneSource, SessionEvent, StatusKind};
pub use replay::{replay_session, ReplayReport};
pub use runner::{Pacing, RunOptions, SessionOutcome};
pub use service::{ServiceState, SessionService, StartRequest, StatusReport};
pub use store::{
    amend_likert, amend_misc, CompletionStatus, FileChecksums, LatencyDigest, SessionLog, SessionManifest, WeightsRef,
    EEG_FILE, EVENTS_FILE, MANIFEST_FILE, SESSION_FORMAT, SESSION_VERSION,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("a session is already active: {0}")]
    AlreadyActive(String),
    #[error("no session is active")]
    NotActive,
    #[error("session directory {0} already exists")]
    Exists(PathBuf),
    #[error("weights: {0}")]
    Weights(#[from] WeightsError),
    #[error("source: {0}")]
    Ingest(#[from] IngestError),
    #[error("scoring: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Feedback(#[from] FeedbackError),
    #[error("no MISC prompt at minute {0} has been issued")]
    UnknownPrompt(f64),
    #[error("the MISC prompt at minute {0} was already answered")]
    DuplicateResponse(f64),
    #[error("a Likert response is already recorded")]
    DuplicateLikert,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} has no manifest; the session did not finish writing")]
    Incomplete(PathBuf),
    #[error("{file} does not match the checksum in the manifest; the session is incomplete or was modified")]
    ChecksumMismatch { file: PathBuf },
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path} line {line}: {reason}")]
    EventLog { path: PathBuf, line: usize, reason: String },
    #[error("weights at {path} changed since the session was recorded")]
    WeightsChanged { path: PathBuf },
    #[error("session thread stopped unexpectedly")]
    ThreadGone,
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SessionError {
    let path = path.into();
    move |source| SessionError::Io { path, source }
}
