use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};

use crate::feedback::{build_schedule, validate_likert, FeedbackEngine, MiscResponse, SceneCatalog, ScheduleEvent, ScheduleKind, SessionMode};
use crate::ingest::{SampleStream, StreamConfig, WindowAssembler, WindowBuffer};
use crate::model::{LatencyReport, LatencySummary, Network, ScoreEvent, ScoringPipeline};
use crate::par::Execution;

use super::service::StatusReport;
use super::store::{prompt_key, write_manifest, CompletionStatus, FileChecksums, SessionManifest, SessionWriter, WeightsRef};
use super::{Broadcaster, EventPayload, SceneSource, SessionError, SessionEvent, StatusKind, SESSION_FORMAT, SESSION_VERSION};

/// How fast the source is consumed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pacing {
    /// As fast as scoring allows; used for replay, tests and benchmarks.
    Unpaced,
    /// Hold each hop until its samples would have arrived from a live device.
    /// `speed` > 1 compresses time. Windows that fall a full hop behind are
    /// dropped rather than queued.
    RealTime { speed: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub pacing: Pacing,
    pub execution: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            pacing: Pacing::RealTime { speed: 1.0 },
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub session_id: String,
    pub dir: PathBuf,
    pub status: CompletionStatus,
    pub detail: Option<String>,
    pub duration_seconds: f64,
    pub score_events: u64,
    pub dropped_windows: u64,
    pub latency: LatencySummary,
}

pub(crate) enum Command {
    Stop,
    Misc {
        prompt_time: f64,
        value: i64,
        label: Option<String>,
        reply: Sender<Result<SessionEvent, SessionError>>,
    },
    Likert {
        value: i64,
        reply: Sender<Result<SessionEvent, SessionError>>,
    },
    Guidance {
        volume: f64,
        reply: Sender<Result<SessionEvent, SessionError>>,
    },
    Status {
        reply: Sender<StatusReport>,
    },
}

pub(crate) struct RunSetup {
    pub session_id: String,
    pub subject_id: String,
    pub mode: SessionMode,
    pub stream: StreamConfig,
    pub weights: WeightsRef,
    pub network: Arc<Network>,
    pub catalog: SceneCatalog,
    pub seed: u64,
    pub guidance_volume: f64,
    pub planned_seconds: f64,
    pub started_at: String,
    pub options: RunOptions,
}

enum Flow {
    Continue,
    Stop,
}

pub(crate) struct Runner<'a> {
    setup: RunSetup,
    pipeline: ScoringPipeline,
    engine: FeedbackEngine,
    schedule: Vec<ScheduleEvent>,
    next_schedule: usize,
    writer: SessionWriter,
    broadcast: &'a Broadcaster,
    clock: f64,
    prompts: BTreeSet<u32>,
    answered: BTreeSet<u32>,
    likert: Option<u8>,
    latency: LatencyReport,
    scores: u64,
    dropped: u64,
    last_score: Option<f64>,
    started: Instant,
}

impl<'a> Runner<'a> {
    pub fn new(setup: RunSetup, writer: SessionWriter, broadcast: &'a Broadcaster) -> Result<Self, SessionError> {
        let pipeline = ScoringPipeline::new(
            setup.network.clone(),
            setup.stream.sampling_rate,
            setup.stream.window_len(),
            setup.stream.hop_seconds,
            setup.options.execution,
        )?;
        let engine = FeedbackEngine::new(setup.mode, setup.catalog.clone(), setup.seed, setup.guidance_volume);
        let mut schedule = build_schedule(setup.mode, &setup.catalog);
        schedule.sort_by_key(|e| e.minute);
        Ok(Runner {
            setup,
            pipeline,
            engine,
            schedule,
            next_schedule: 0,
            writer,
            broadcast,
            clock: 0.0,
            prompts: BTreeSet::new(),
            answered: BTreeSet::new(),
            likert: None,
            latency: LatencyReport::default(),
            scores: 0,
            dropped: 0,
            last_score: None,
            started: Instant::now(),
        })
    }

    fn emit(&mut self, payload: EventPayload) -> Result<SessionEvent, SessionError> {
        let event = SessionEvent::new(self.clock, payload);
        self.writer.append_event(&event)?;
        self.broadcast.send(&event);
        Ok(event)
    }

    fn fire_schedule(&mut self) -> Result<(), SessionError> {
        while let Some(ev) = self.schedule.get(self.next_schedule) {
            let at = f64::from(ev.minute) * 60.0;
            if at > self.clock + 1e-9 || at > self.setup.planned_seconds + 1e-9 {
                break;
            }
            let ev = ev.clone();
            self.next_schedule += 1;
            match ev.kind {
                ScheduleKind::SceneReset { scene_id } => {
                    if let Some(scene) = self.engine.reset_scene(&scene_id, self.clock) {
                        self.emit(EventPayload::SceneState {
                            source: SceneSource::Reset,
                            driver: None,
                            scene,
                        })?;
                    }
                }
                ScheduleKind::MiscPrompt => {
                    self.prompts.insert(ev.minute);
                    self.emit(EventPayload::MiscPrompt {
                        prompt_time: f64::from(ev.minute),
                    })?;
                }
                ScheduleKind::SessionStart | ScheduleKind::SessionEnd => {}
            }
        }
        Ok(())
    }

    fn feed_engine(&mut self, eeg_score: Option<f64>) -> Result<(), SessionError> {
        if let Some((driver, scene)) = self.engine.on_window(eeg_score, self.clock) {
            let source = match self.setup.mode {
                SessionMode::Pms => SceneSource::Pseudo,
                _ => SceneSource::Eeg,
            };
            self.emit(EventPayload::SceneState {
                source,
                driver: Some(driver),
                scene,
            })?;
        }
        Ok(())
    }

    fn handle_window(&mut self, window: &WindowBuffer) -> Result<(), SessionError> {
        if let Pacing::RealTime { speed } = self.setup.options.pacing {
            let behind = self.started.elapsed().as_secs_f64() * speed - self.clock;
            if behind > self.setup.stream.hop_seconds {
                self.dropped += 1;
                self.emit(EventPayload::Overrun {
                    window_index: window.index,
                    latency_ms: behind * 1e3,
                    dropped: true,
                })?;
                return self.feed_engine(None);
            }
        }
        let event = self.pipeline.process(window)?;
        self.latency.record(&event);
        match event {
            ScoreEvent::Score {
                window_index,
                score,
                timings,
                overrun,
            } => {
                self.scores += 1;
                self.last_score = Some(score.score);
                self.emit(EventPayload::ScoreUpdate {
                    window_index,
                    window_start: score.window_start,
                    score: score.score,
                    probability: score.probability,
                })?;
                if overrun {
                    self.emit(EventPayload::Overrun {
                        window_index,
                        latency_ms: timings.total().as_secs_f64() * 1e3,
                        dropped: false,
                    })?;
                }
                self.feed_engine(Some(score.score))
            }
            ScoreEvent::Gap {
                window_index,
                window_start,
            } => {
                self.emit(EventPayload::Gap {
                    window_index,
                    window_start,
                })?;
                self.feed_engine(None)
            }
        }
    }

    fn submit_misc(&mut self, prompt_time: f64, value: i64, label: Option<&str>) -> Result<SessionEvent, SessionError> {
        let key = prompt_key(prompt_time)
            .filter(|k| self.prompts.contains(k))
            .ok_or(SessionError::UnknownPrompt(prompt_time))?;
        if self.answered.contains(&key) {
            return Err(SessionError::DuplicateResponse(prompt_time));
        }
        let r = match label {
            Some(l) => MiscResponse::new(f64::from(key), value, l)?,
            None => MiscResponse::from_value(f64::from(key), value)?,
        };
        self.answered.insert(key);
        self.emit(EventPayload::MiscAck {
            prompt_time: r.prompt_time,
            value: r.value,
            label: r.label,
        })
    }

    fn submit_likert(&mut self, value: i64) -> Result<SessionEvent, SessionError> {
        if self.likert.is_some() {
            return Err(SessionError::DuplicateLikert);
        }
        let v = validate_likert(value)?.value;
        self.likert = Some(v);
        self.emit(EventPayload::SessionStatus {
            status: StatusKind::LikertRecorded,
            detail: None,
            likert: Some(v),
        })
    }

    fn status(&self) -> StatusReport {
        StatusReport {
            state: super::ServiceState::Running,
            session_id: Some(self.setup.session_id.clone()),
            mode: Some(self.setup.mode),
            t: self.clock,
            planned_seconds: Some(self.setup.planned_seconds),
            score_events: self.scores,
            last_score: self.last_score,
            pending_prompts: self.prompts.difference(&self.answered).map(|&m| f64::from(m)).collect(),
            last_session: None,
        }
    }

    fn handle(&mut self, cmd: Command) -> Result<Flow, SessionError> {
        match cmd {
            Command::Stop => return Ok(Flow::Stop),
            Command::Misc {
                prompt_time,
                value,
                label,
                reply,
            } => {
                let _ = reply.send(self.submit_misc(prompt_time, value, label.as_deref()));
            }
            Command::Likert { value, reply } => {
                let _ = reply.send(self.submit_likert(value));
            }
            Command::Guidance { volume, reply } => {
                let r = match self.engine.set_guidance_volume(volume) {
                    Some(scene) => self.emit(EventPayload::SceneState {
                        source: SceneSource::Guidance,
                        driver: None,
                        scene,
                    }),
                    None => Err(SessionError::Feedback(crate::feedback::FeedbackError::Catalog(
                        "resting sessions have no scene".into(),
                    ))),
                };
                let _ = reply.send(r);
            }
            Command::Status { reply } => {
                let _ = reply.send(self.status());
            }
        }
        Ok(Flow::Continue)
    }

    /// Waits until wall time catches up with the sample clock, serving
    /// commands meanwhile.
    fn pace(&mut self, commands: &Receiver<Command>) -> Result<Flow, SessionError> {
        let speed = match self.setup.options.pacing {
            Pacing::RealTime { speed } => speed,
            Pacing::Unpaced => return self.drain(commands),
        };
        let target = self.started + Duration::from_secs_f64(self.clock / speed);
        loop {
            let now = Instant::now();
            if now >= target {
                return self.drain(commands);
            }
            match commands.recv_timeout(target - now) {
                Ok(cmd) => {
                    if let Flow::Stop = self.handle(cmd)? {
                        return Ok(Flow::Stop);
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Ok(Flow::Continue),
                Err(RecvTimeoutError::Disconnected) => {
                    std::thread::sleep(target.saturating_duration_since(Instant::now()));
                    return Ok(Flow::Continue);
                }
            }
        }
    }

    fn drain(&mut self, commands: &Receiver<Command>) -> Result<Flow, SessionError> {
        while let Ok(cmd) = commands.try_recv() {
            if let Flow::Stop = self.handle(cmd)? {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    }

    /// Runs until the planned end, a stop command or the end of the source,
    /// then seals the session directory.
    pub fn run(mut self, mut source: SampleStream, commands: &Receiver<Command>) -> Result<SessionOutcome, SessionError> {
        let rate = self.setup.stream.sampling_rate;
        let hop = self.setup.stream.hop_len();
        let mut assembler = WindowAssembler::new(&self.setup.stream)?;
        let mut chunk: Vec<f32> = Vec::with_capacity(hop);
        let mut windows = Vec::new();
        let mut samples = 0u64;
        self.started = Instant::now();

        self.emit(EventPayload::SessionStatus {
            status: StatusKind::Started,
            detail: None,
            likert: None,
        })?;
        self.fire_schedule()?;

        let planned = self.setup.planned_seconds;
        let (status, detail) = loop {
            if self.clock >= planned - 1e-9 {
                break (CompletionStatus::Complete, None);
            }
            chunk.clear();
            windows.clear();
            let mut failure = None;
            // Never read past the planned end.
            let remaining = ((planned * rate).round() as u64).saturating_sub(samples) as usize;
            for _ in 0..hop.min(remaining) {
                match source.next() {
                    Some(Ok(s)) => {
                        chunk.push(s.value as f32);
                        if let Some(w) = assembler.push(s)? {
                            windows.push(w);
                        }
                    }
                    Some(Err(e)) => {
                        failure = Some(e.to_string());
                        break;
                    }
                    None => break,
                }
            }
            if !chunk.is_empty() {
                self.writer.append_samples(&chunk)?;
                samples += chunk.len() as u64;
                self.clock = samples as f64 / rate;
                if let Flow::Stop = self.pace(commands)? {
                    break (CompletionStatus::Aborted, Some("stopped by operator".to_string()));
                }
                self.fire_schedule()?;
                for w in &windows {
                    self.handle_window(w)?;
                }
                self.writer.flush()?;
            }
            if let Some(e) = failure {
                break (CompletionStatus::Aborted, Some(format!("source failed: {e}")));
            }
            if chunk.len() < hop && self.clock < planned - 1e-9 {
                break (CompletionStatus::Aborted, Some("source ended before the planned end".to_string()));
            }
        };

        let kind = match status {
            CompletionStatus::Complete => StatusKind::Completed,
            CompletionStatus::Aborted => StatusKind::Aborted,
        };
        self.emit(EventPayload::SessionStatus {
            status: kind,
            detail: detail.clone(),
            likert: None,
        })?;
        let latency = self.latency.summary();
        let done = self.writer.finish_payload()?;
        let mut manifest = SessionManifest {
            format: SESSION_FORMAT.to_string(),
            version: SESSION_VERSION,
            session_id: self.setup.session_id.clone(),
            subject_id: self.setup.subject_id.clone(),
            mode: self.setup.mode,
            started_at: self.setup.started_at.clone(),
            status,
            detail: detail.clone(),
            planned_seconds: planned,
            duration_seconds: self.clock,
            sample_count: done.sample_count,
            event_count: done.event_count,
            score_events: self.scores,
            feedback_seed: self.setup.seed,
            likert: self.likert,
            amendments: 0,
            stream: self.setup.stream.clone(),
            weights: self.setup.weights.clone(),
            files: FileChecksums {
                eeg_raw_sha256: String::new(),
                events_log_sha256: String::new(),
            },
            latency: Some((&latency).into()),
        };
        write_manifest(&done.dir, &mut manifest)?;
        Ok(SessionOutcome {
            session_id: self.setup.session_id,
            dir: done.dir,
            status,
            detail,
            duration_seconds: self.clock,
            score_events: self.scores,
            dropped_windows: self.dropped,
            latency,
        })
    }
}
