use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::feedback::{validate_likert, MiscResponse, SessionMode};
use crate::ingest::{RecordingHeader, RecordingWriter, StreamConfig};
use crate::model::LatencySummary;

use super::{io_err, EventPayload, SessionError, SessionEvent, StatusKind};

pub const SESSION_FORMAT: &str = "mbci-session";
pub const SESSION_VERSION: u32 = 1;
pub const EEG_FILE: &str = "eeg.raw";
pub const EVENTS_FILE: &str = "events.log";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStatus {
    /// Ran to the planned end.
    Complete,
    /// Stopped early or the source failed; data up to that point is kept.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightsRef {
    pub path: PathBuf,
    /// SHA-256 of the container's weight blob.
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChecksums {
    pub eeg_raw_sha256: String,
    pub events_log_sha256: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyDigest {
    pub windows: usize,
    pub deadline_misses: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl From<&LatencySummary> for LatencyDigest {
    fn from(s: &LatencySummary) -> Self {
        LatencyDigest {
            windows: s.windows,
            deadline_misses: s.deadline_misses,
            p50_ms: s.total.p50_ms,
            p95_ms: s.total.p95_ms,
            max_ms: s.total.max_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub format: String,
    pub version: u32,
    pub session_id: String,
    pub subject_id: String,
    pub mode: SessionMode,
    /// Wall-clock anchor (RFC 3339) for `t = 0`.
    pub started_at: String,
    pub status: CompletionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub planned_seconds: f64,
    pub duration_seconds: f64,
    pub sample_count: u64,
    pub event_count: u64,
    pub score_events: u64,
    pub feedback_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likert: Option<u8>,
    /// Responses appended after the session stopped.
    #[serde(default)]
    pub amendments: u32,
    pub stream: StreamConfig,
    pub weights: WeightsRef,
    pub files: FileChecksums,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyDigest>,
}

pub(crate) fn sha256_file(path: &Path) -> Result<String, SessionError> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn checksums(dir: &Path) -> Result<FileChecksums, SessionError> {
    Ok(FileChecksums {
        eeg_raw_sha256: sha256_file(&dir.join(EEG_FILE))?,
        events_log_sha256: sha256_file(&dir.join(EVENTS_FILE))?,
    })
}

fn sync_dir(dir: &Path) {
    // Directory fsync is best effort; not every platform allows opening one.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

/// Writes the manifest next to the payload through a temporary file and a
/// rename, refreshing the checksums from the files on disk.
pub(crate) fn write_manifest(dir: &Path, manifest: &mut SessionManifest) -> Result<(), SessionError> {
    manifest.files = checksums(dir)?;
    let text = toml::to_string(manifest).map_err(|e| SessionError::Manifest {
        path: dir.join(MANIFEST_FILE),
        reason: e.to_string(),
    })?;
    let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    sync_dir(dir);
    Ok(())
}

/// Incremental writer for a live session's payload files.
pub(crate) struct SessionWriter {
    dir: PathBuf,
    recording: RecordingWriter,
    events: BufWriter<File>,
    event_count: u64,
    last_t: f64,
}

impl SessionWriter {
    /// Creates the session directory; fails if it already exists.
    pub fn create(dir: &Path, header: RecordingHeader) -> Result<Self, SessionError> {
        if dir.exists() {
            return Err(SessionError::Exists(dir.to_path_buf()));
        }
        if let Some(parent) = dir.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::create_dir(dir).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                SessionError::Exists(dir.to_path_buf())
            } else {
                SessionError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                }
            }
        })?;
        let recording = RecordingWriter::create(&dir.join(EEG_FILE), header)?;
        let events_path = dir.join(EVENTS_FILE);
        let events = File::create(&events_path).map_err(io_err(&events_path))?;
        Ok(SessionWriter {
            dir: dir.to_path_buf(),
            recording,
            events: BufWriter::new(events),
            event_count: 0,
            last_t: 0.0,
        })
    }

    pub fn append_samples(&mut self, samples: &[f32]) -> Result<(), SessionError> {
        Ok(self.recording.append(samples)?)
    }

    pub fn append_event(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        debug_assert!(event.t >= self.last_t, "event log must be time-ordered");
        self.last_t = event.t;
        let path = self.dir.join(EVENTS_FILE);
        writeln!(self.events, "{}", event.to_json_line()).map_err(io_err(&path))?;
        self.event_count += 1;
        Ok(())
    }

    /// Pushes buffered events to the OS so a crash loses at most the
    /// current hop.
    pub fn flush(&mut self) -> Result<(), SessionError> {
        let path = self.dir.join(EVENTS_FILE);
        self.events.flush().map_err(io_err(path))
    }

    /// Flushes and fsyncs both payload files. The manifest is not written.
    pub fn finish_payload(mut self) -> Result<PayloadDone, SessionError> {
        self.flush()?;
        let path = self.dir.join(EVENTS_FILE);
        self.events.get_ref().sync_all().map_err(io_err(&path))?;
        let samples = self.recording.finish()?;
        Ok(PayloadDone {
            dir: self.dir,
            sample_count: samples,
            event_count: self.event_count,
        })
    }
}

pub(crate) struct PayloadDone {
    pub dir: PathBuf,
    pub sample_count: u64,
    pub event_count: u64,
}

/// A finished session read back from disk with its integrity checked.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog {
    pub dir: PathBuf,
    pub manifest: SessionManifest,
    pub events: Vec<SessionEvent>,
}

impl SessionLog {
    /// Loads and verifies a session directory. A missing manifest or a
    /// checksum mismatch means the session never finished writing.
    pub fn load(dir: &Path) -> Result<Self, SessionError> {
        let manifest = read_manifest(dir)?;
        for (file, expected) in [
            (EEG_FILE, &manifest.files.eeg_raw_sha256),
            (EVENTS_FILE, &manifest.files.events_log_sha256),
        ] {
            let path = dir.join(file);
            if !path.exists() || sha256_file(&path)? != *expected {
                return Err(SessionError::ChecksumMismatch { file: path });
            }
        }
        let events = read_events(&dir.join(EVENTS_FILE))?;
        Ok(SessionLog {
            dir: dir.to_path_buf(),
            manifest,
            events,
        })
    }

    pub fn eeg_path(&self) -> PathBuf {
        self.dir.join(EEG_FILE)
    }

    /// `(window_index, score)` for every scored window, in order.
    pub fn scores(&self) -> Vec<(u64, f64)> {
        self.events
            .iter()
            .filter_map(|e| match e.payload {
                EventPayload::ScoreUpdate { window_index, score, .. } => Some((window_index, score)),
                _ => None,
            })
            .collect()
    }

    pub fn misc_responses(&self) -> Vec<MiscResponse> {
        self.events
            .iter()
            .filter_map(|e| match &e.payload {
                EventPayload::MiscAck { prompt_time, value, label } => Some(MiscResponse {
                    prompt_time: *prompt_time,
                    value: *value,
                    label: label.clone(),
                }),
                _ => None,
            })
            .collect()
    }

    pub fn count(&self, type_name: &str) -> usize {
        self.events.iter().filter(|e| e.payload.type_name() == type_name).count()
    }
}

pub(crate) fn read_manifest(dir: &Path) -> Result<SessionManifest, SessionError> {
    let path = dir.join(MANIFEST_FILE);
    if !dir.is_dir() {
        return Err(SessionError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such session directory"),
        });
    }
    if !path.exists() {
        return Err(SessionError::Incomplete(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: SessionManifest = toml::from_str(&text).map_err(|e| SessionError::Manifest {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if manifest.format != SESSION_FORMAT || manifest.version != SESSION_VERSION {
        return Err(SessionError::Manifest {
            path,
            reason: format!("unsupported format {} v{}", manifest.format, manifest.version),
        });
    }
    Ok(manifest)
}

fn read_events(path: &Path) -> Result<Vec<SessionEvent>, SessionError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out: Vec<SessionEvent> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = serde_json::from_str(&line).map_err(|e| SessionError::EventLog {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        if out.last().is_some_and(|prev| event.t < prev.t) {
            return Err(SessionError::EventLog {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "timestamps go backwards".into(),
            });
        }
        out.push(event);
    }
    Ok(out)
}

fn append_and_reseal(log: &SessionLog, event: SessionEvent, likert: Option<u8>) -> Result<SessionEvent, SessionError> {
    let path = log.dir.join(EVENTS_FILE);
    let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
    writeln!(f, "{}", event.to_json_line()).map_err(io_err(&path))?;
    f.sync_all().map_err(io_err(&path))?;
    let mut manifest = log.manifest.clone();
    manifest.event_count += 1;
    manifest.amendments += 1;
    if likert.is_some() {
        manifest.likert = likert;
    }
    write_manifest(&log.dir, &mut manifest)?;
    Ok(event)
}

pub(crate) fn prompt_key(prompt_time: f64) -> Option<u32> {
    let r = prompt_time.round();
    ((prompt_time - r).abs() < 1e-9 && (0.0..=u32::MAX as f64).contains(&r)).then_some(r as u32)
}

/// Records a MISC answer for a finished session. The prompt must have been
/// issued and not yet answered. The manifest is rewritten with fresh
/// checksums.
pub fn amend_misc(dir: &Path, prompt_time: f64, value: i64, label: Option<&str>) -> Result<SessionEvent, SessionError> {
    let log = SessionLog::load(dir)?;
    let key = prompt_key(prompt_time).ok_or(SessionError::UnknownPrompt(prompt_time))?;
    let issued = log.events.iter().any(|e| matches!(e.payload, EventPayload::MiscPrompt { prompt_time } if prompt_key(prompt_time) == Some(key)));
    if !issued {
        return Err(SessionError::UnknownPrompt(prompt_time));
    }
    if log.misc_responses().iter().any(|m| prompt_key(m.prompt_time) == Some(key)) {
        return Err(SessionError::DuplicateResponse(prompt_time));
    }
    let response = match label {
        Some(l) => MiscResponse::new(f64::from(key), value, l)?,
        None => MiscResponse::from_value(f64::from(key), value)?,
    };
    let event = SessionEvent::new(
        log.manifest.duration_seconds,
        EventPayload::MiscAck {
            prompt_time: response.prompt_time,
            value: response.value,
            label: response.label,
        },
    );
    append_and_reseal(&log, event, None)
}

/// Records the end-of-session Likert rating for a finished session.
pub fn amend_likert(dir: &Path, value: i64) -> Result<SessionEvent, SessionError> {
    let log = SessionLog::load(dir)?;
    if log.manifest.likert.is_some() {
        return Err(SessionError::DuplicateLikert);
    }
    let v = validate_likert(value)?.value;
    let event = SessionEvent::new(
        log.manifest.duration_seconds,
        EventPayload::SessionStatus {
            status: StatusKind::LikertRecorded,
            detail: None,
            likert: Some(v),
        },
    );
    append_and_reseal(&log, event, Some(v))
}
