use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::feedback::{SceneCatalog, SessionMode, SESSION_MINUTES};
use crate::ingest::{open_source, RecordingHeader, StreamConfig};
use crate::model::{ModelWeights, Network, WEIGHTS_BLOB};

use super::runner::{Command, RunSetup, Runner};
use super::store::{amend_likert, amend_misc, sha256_file, SessionWriter, WeightsRef};
use super::{Broadcaster, RunOptions, SessionError, SessionEvent, SessionOutcome};

/// Everything needed to start a session.
#[derive(Clone, Debug)]
pub struct StartRequest {
    pub mode: SessionMode,
    pub subject_id: String,
    pub stream: StreamConfig,
    /// Weight container directory.
    pub weights: PathBuf,
    /// Seed for the pseudofeedback walk.
    pub seed: u64,
    /// Defaults to the full 90-minute protocol.
    pub planned_seconds: Option<f64>,
    pub guidance_volume: f64,
    /// Generated when absent.
    pub session_id: Option<String>,
    pub options: RunOptions,
}

impl StartRequest {
    pub fn new(mode: SessionMode, stream: StreamConfig, weights: impl Into<PathBuf>) -> Self {
        StartRequest {
            mode,
            subject_id: "anonymous".into(),
            stream,
            weights: weights.into(),
            seed: 0,
            planned_seconds: None,
            guidance_volume: 0.5,
            session_id: None,
            options: RunOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceState {
    Idle,
    Running,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub state: ServiceState,
    pub session_id: Option<String>,
    pub mode: Option<SessionMode>,
    /// Session clock in seconds.
    pub t: f64,
    pub planned_seconds: Option<f64>,
    pub score_events: u64,
    pub last_score: Option<f64>,
    /// Issued MISC prompts (minutes) still unanswered.
    pub pending_prompts: Vec<f64>,
    /// Directory of the most recently finished session.
    pub last_session: Option<PathBuf>,
}

struct Active {
    session_id: String,
    dir: PathBuf,
    commands: Sender<Command>,
    thread: JoinHandle<Result<SessionOutcome, SessionError>>,
}

#[derive(Default)]
struct Slots {
    active: Option<Active>,
    last: Option<PathBuf>,
}

/// Owns at most one live session. Control calls are serialized through the
/// session thread's command queue; events fan out through [`Broadcaster`].
pub struct SessionService {
    data_dir: PathBuf,
    catalog: SceneCatalog,
    broadcaster: Arc<Broadcaster>,
    slots: Mutex<Slots>,
}

impl SessionService {
    pub fn new(data_dir: impl Into<PathBuf>, catalog: SceneCatalog) -> Self {
        SessionService {
            data_dir: data_dir.into(),
            catalog,
            broadcaster: Arc::new(Broadcaster::new()),
            slots: Mutex::new(Slots::default()),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn subscribe(&self) -> Receiver<SessionEvent> {
        self.broadcaster.subscribe()
    }

    pub fn broadcaster(&self) -> &Arc<Broadcaster> {
        &self.broadcaster
    }

    fn slots(&self) -> MutexGuard<'_, Slots> {
        self.slots.lock().expect("service lock")
    }

    /// Moves a session whose thread has already returned into `last`.
    fn reap(slots: &mut Slots) -> Option<Result<SessionOutcome, SessionError>> {
        if slots.active.as_ref().is_some_and(|a| a.thread.is_finished()) {
            let a = slots.active.take().expect("checked");
            slots.last = Some(a.dir);
            return Some(a.thread.join().unwrap_or(Err(SessionError::ThreadGone)));
        }
        None
    }

    /// Loads weights and opens the source before anything touches disk, so a
    /// failed start leaves no session directory behind.
    pub fn start(&self, req: StartRequest) -> Result<(String, PathBuf), SessionError> {
        let mut slots = self.slots();
        Self::reap(&mut slots);
        if let Some(a) = &slots.active {
            return Err(SessionError::AlreadyActive(a.session_id.clone()));
        }
        let weights = ModelWeights::load(&req.weights)?;
        let weights_ref = WeightsRef {
            path: std::fs::canonicalize(&req.weights).unwrap_or_else(|_| req.weights.clone()),
            sha256: sha256_file(&req.weights.join(WEIGHTS_BLOB))?,
        };
        let source = open_source(&req.stream)?;
        let session_id = req.session_id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
        let dir = self.data_dir.join(&session_id);
        let header = RecordingHeader::new(req.stream.sampling_rate, "Fp1");
        let writer = SessionWriter::create(&dir, header)?;

        let planned = req
            .planned_seconds
            .unwrap_or(f64::from(SESSION_MINUTES) * 60.0)
            .min(f64::from(SESSION_MINUTES) * 60.0);
        let setup = RunSetup {
            session_id: session_id.clone(),
            subject_id: req.subject_id,
            mode: req.mode,
            stream: req.stream,
            weights: weights_ref,
            network: Arc::new(Network::new(&weights)),
            catalog: self.catalog.clone(),
            seed: req.seed,
            guidance_volume: req.guidance_volume,
            planned_seconds: planned,
            started_at: chrono::Utc::now().to_rfc3339(),
            options: req.options,
        };
        let (tx, rx) = unbounded();
        let broadcaster = self.broadcaster.clone();
        let (ready_tx, ready_rx) = bounded(1);
        let thread = std::thread::Builder::new()
            .name(format!("session-{session_id}"))
            .spawn(move || {
                let runner = Runner::new(setup, writer, &broadcaster);
                let _ = ready_tx.send(runner.as_ref().err().map(|e| e.to_string()));
                runner?.run(source, &rx)
            })
            .map_err(|e| SessionError::Io {
                path: dir.clone(),
                source: e,
            })?;
        if let Ok(Some(_)) = ready_rx.recv() {
            // Setup failed after the directory was created; surface the error.
            return Err(thread.join().map_or(SessionError::ThreadGone, |r| r.err().unwrap_or(SessionError::ThreadGone)));
        }
        slots.active = Some(Active {
            session_id: session_id.clone(),
            dir: dir.clone(),
            commands: tx,
            thread,
        });
        Ok((session_id, dir))
    }

    /// Stops the live session and returns once it is sealed on disk.
    pub fn stop(&self) -> Result<SessionOutcome, SessionError> {
        let active = {
            let mut slots = self.slots();
            let a = slots.active.take().ok_or(SessionError::NotActive)?;
            slots.last = Some(a.dir.clone());
            a
        };
        let _ = active.commands.send(Command::Stop);
        active.thread.join().unwrap_or(Err(SessionError::ThreadGone))
    }

    /// Blocks until the live session ends on its own.
    pub fn wait(&self) -> Result<SessionOutcome, SessionError> {
        let active = {
            let mut slots = self.slots();
            let a = slots.active.take().ok_or(SessionError::NotActive)?;
            slots.last = Some(a.dir.clone());
            a
        };
        active.thread.join().unwrap_or(Err(SessionError::ThreadGone))
    }

    /// Returns the outcome if the live session has ended on its own, `None`
    /// while it is still running.
    pub fn try_wait(&self) -> Result<Option<SessionOutcome>, SessionError> {
        let mut slots = self.slots();
        if slots.active.is_none() {
            return Err(SessionError::NotActive);
        }
        Self::reap(&mut slots).transpose()
    }

    fn request<T>(&self, make: impl FnOnce(Sender<T>) -> Command) -> Option<Result<T, SessionError>> {
        let mut slots = self.slots();
        Self::reap(&mut slots);
        let a = slots.active.as_ref()?;
        let (tx, rx) = bounded(1);
        if a.commands.send(make(tx)).is_err() {
            return Some(Err(SessionError::ThreadGone));
        }
        drop(slots);
        match rx.recv() {
            Ok(v) => Some(Ok(v)),
            Err(_) => {
                // The session ended before serving the request; treat it as
                // finished so callers fall back to amending it on disk.
                let mut slots = self.slots();
                if let Some(a) = slots.active.take() {
                    slots.last = Some(a.dir);
                    let _ = a.thread.join();
                }
                None
            }
        }
    }

    /// Answers a MISC prompt of the live session, or of the session that
    /// just ended.
    pub fn submit_misc(&self, prompt_time: f64, value: i64, label: Option<&str>) -> Result<SessionEvent, SessionError> {
        let owned = label.map(str::to_string);
        match self.request(|reply| Command::Misc {
            prompt_time,
            value,
            label: owned,
            reply,
        }) {
            Some(r) => r?,
            None => {
                let dir = self.slots().last.clone().ok_or(SessionError::NotActive)?;
                let event = amend_misc(&dir, prompt_time, value, label)?;
                self.broadcaster.send(&event);
                Ok(event)
            }
        }
    }

    pub fn submit_likert(&self, value: i64) -> Result<SessionEvent, SessionError> {
        match self.request(|reply| Command::Likert { value, reply }) {
            Some(r) => r?,
            None => {
                let dir = self.slots().last.clone().ok_or(SessionError::NotActive)?;
                let event = amend_likert(&dir, value)?;
                self.broadcaster.send(&event);
                Ok(event)
            }
        }
    }

    pub fn set_guidance_volume(&self, volume: f64) -> Result<SessionEvent, SessionError> {
        self.request(|reply| Command::Guidance { volume, reply })
            .ok_or(SessionError::NotActive)??
    }

    pub fn status(&self) -> StatusReport {
        let last = self.slots().last.clone();
        match self.request(|reply| Command::Status { reply }) {
            Some(Ok(mut s)) => {
                s.last_session = last;
                s
            }
            _ => StatusReport {
                state: ServiceState::Idle,
                session_id: None,
                mode: None,
                t: 0.0,
                planned_seconds: None,
                score_events: 0,
                last_score: None,
                pending_prompts: Vec::new(),
                last_session: self.slots().last.clone(),
            },
        }
    }
}

impl Drop for SessionService {
    fn drop(&mut self) {
        if let Some(a) = self.slots.get_mut().ok().and_then(|s| s.active.take()) {
            let _ = a.commands.send(Command::Stop);
            let _ = a.thread.join();
        }
    }
}
