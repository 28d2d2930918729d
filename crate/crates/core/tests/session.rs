use std::fs;
use std::path::PathBuf;

use mbci_core::feedback::{misc_label, SceneCatalog, SessionMode};
use mbci_core::ingest::{read_recording, SourceSpec, StreamConfig, SynthControl};
use mbci_core::model::fixture::contrast_weights;
use mbci_core::par::Execution;
use mbci_core::session::{
    replay_session, CompletionStatus, EventPayload, Pacing, RunOptions, SceneSource, SessionError, SessionEvent,
    SessionLog, SessionService, StartRequest, StatusKind, EVENTS_FILE, MANIFEST_FILE,
};
use tempfile::TempDir;

struct Fixture {
    _tmp: TempDir,
    weights: PathBuf,
    data: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let weights = tmp.path().join("weights");
    contrast_weights().save(&weights).unwrap();
    let data = tmp.path().join("sessions");
    Fixture { weights, data, _tmp: tmp }
}

fn synth(seconds: f64, latent: f64, seed: u64) -> StreamConfig {
    StreamConfig::new(SourceSpec::Synthetic {
        control: SynthControl::with_latent(latent),
        duration_seconds: seconds,
        seed,
    })
}

fn request(f: &Fixture, mode: SessionMode, seconds: f64, id: &str) -> StartRequest {
    StartRequest {
        planned_seconds: Some(seconds),
        session_id: Some(id.to_string()),
        seed: 9,
        options: RunOptions {
            pacing: Pacing::Unpaced,
            execution: Execution::default(),
        },
        ..StartRequest::new(mode, synth(seconds, 0.6, 3), &f.weights)
    }
}

fn run(f: &Fixture, mode: SessionMode, seconds: f64, id: &str) -> (SessionLog, Vec<SessionEvent>) {
    let service = SessionService::new(&f.data, SceneCatalog::default());
    let rx = service.subscribe();
    service.start(request(f, mode, seconds, id)).unwrap();
    let outcome = service.wait().unwrap();
    assert_eq!(outcome.status, CompletionStatus::Complete);
    let log = SessionLog::load(&outcome.dir).unwrap();
    (log, rx.try_iter().collect())
}

fn of_type<'a>(events: &'a [SessionEvent], name: &str) -> Vec<&'a SessionEvent> {
    events.iter().filter(|e| e.payload.type_name() == name).collect()
}

#[test]
fn rms_run_scores_every_hop_after_warm_up() {
    let f = fixture();
    let (log, broadcast) = run(&f, SessionMode::Rms, 120.0, "rms");
    let scores = of_type(&log.events, "score_update");
    // Windows ending at 10, 11, ..., 120 s.
    assert_eq!(scores.len(), 111);
    for (k, e) in scores.iter().enumerate() {
        assert_eq!(e.t, 10.0 + k as f64);
        match e.payload {
            EventPayload::ScoreUpdate { window_index, window_start, score, .. } => {
                assert_eq!((window_index, window_start), (k as u64, k as f64));
                assert!((0.0..=100.0).contains(&score));
            }
            _ => unreachable!(),
        }
    }
    assert!(log.events.windows(2).all(|w| w[0].t <= w[1].t));

    let scenes = of_type(&log.events, "scene_state");
    let eeg: Vec<_> = scenes
        .iter()
        .filter(|e| matches!(e.payload, EventPayload::SceneState { source: SceneSource::Eeg, .. }))
        .collect();
    assert_eq!(eeg.len(), 111);
    assert_eq!(scenes.len(), 112, "one scheduled reset at minute 0");
    assert_eq!(of_type(&log.events, "misc_prompt").len(), 1);

    let m = &log.manifest;
    assert_eq!((m.status, m.sample_count, m.score_events), (CompletionStatus::Complete, 120 * 250, 111));
    assert_eq!(m.event_count as usize, log.events.len());
    assert_eq!(read_recording(&log.eeg_path()).unwrap().samples.len(), 120 * 250);
    assert!(matches!(
        log.events.last().unwrap().payload,
        EventPayload::SessionStatus { status: StatusKind::Completed, .. }
    ));

    // Broadcast and persistence carry the same ordered stream.
    assert_eq!(broadcast, log.events);
}

#[test]
fn resting_session_has_no_scene_and_prompts_every_two_minutes() {
    let f = fixture();
    let (log, _) = run(&f, SessionMode::Rs, 250.0, "rs");
    assert_eq!(log.count("scene_state"), 0);
    assert_eq!(log.count("score_update"), 241);
    let prompts: Vec<f64> = log
        .events
        .iter()
        .filter_map(|e| match e.payload {
            EventPayload::MiscPrompt { prompt_time } => Some(prompt_time),
            _ => None,
        })
        .collect();
    assert_eq!(prompts, vec![0.0, 2.0, 4.0]);
}

#[test]
fn pseudofeedback_drives_pms_scenes() {
    let f = fixture();
    let (log, _) = run(&f, SessionMode::Pms, 40.0, "pms");
    let drivers: Vec<f64> = log
        .events
        .iter()
        .filter_map(|e| match e.payload {
            EventPayload::SceneState { source: SceneSource::Pseudo, driver, .. } => driver,
            _ => None,
        })
        .collect();
    let scores: Vec<f64> = log.scores().into_iter().map(|s| s.1).collect();
    assert_eq!(drivers.len(), scores.len());
    assert_ne!(drivers, scores);
    assert_eq!(drivers[0], mbci_core::feedback::PseudoFeedback::new(9).next().unwrap());
}

#[test]
fn replay_reproduces_logged_scores_bit_for_bit() {
    let f = fixture();
    let (log, _) = run(&f, SessionMode::Rms, 60.0, "replay");
    for exec in [Execution::Sequential, Execution::Parallel] {
        let r = replay_session(&log.dir, exec).unwrap();
        assert_eq!(r.logged.len(), 51);
        assert!(r.bit_identical(), "{:?}", r.mismatches);
    }

    // Different weights at the recorded path are refused.
    let mut w = contrast_weights();
    w.tensor_mut("output.bias").unwrap()[0] += 1.0;
    w.save(&f.weights).unwrap();
    assert!(matches!(replay_session(&log.dir, Execution::Sequential), Err(SessionError::WeightsChanged { .. })));
}

fn paced(f: &Fixture, id: &str) -> StartRequest {
    StartRequest {
        options: RunOptions {
            pacing: Pacing::RealTime { speed: 1.0 },
            execution: Execution::default(),
        },
        ..request(f, SessionMode::Rms, 600.0, id)
    }
}

#[test]
fn one_session_at_a_time_and_stop_aborts() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    service.start(paced(&f, "first")).unwrap();
    assert!(matches!(service.start(paced(&f, "second")), Err(SessionError::AlreadyActive(id)) if id == "first"));
    assert!(!f.data.join("second").exists());

    let status = service.status();
    assert_eq!(status.session_id.as_deref(), Some("first"));
    assert_eq!(status.pending_prompts, vec![0.0]);

    let outcome = service.stop().unwrap();
    assert_eq!(outcome.status, CompletionStatus::Aborted);
    let log = SessionLog::load(&outcome.dir).unwrap();
    assert_eq!(log.manifest.status, CompletionStatus::Aborted);
    assert!(log.manifest.duration_seconds < 600.0);
    assert!(matches!(service.stop(), Err(SessionError::NotActive)));

    // The id is taken.
    assert!(matches!(service.start(paced(&f, "first")), Err(SessionError::Exists(_))));
}

#[test]
fn misc_answers_are_validated_and_recorded_once() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    let rx = service.subscribe();
    service.start(paced(&f, "misc")).unwrap();

    assert!(matches!(service.submit_misc(0.0, 12, None), Err(SessionError::Feedback(_))));
    assert!(matches!(service.submit_misc(10.0, 2, None), Err(SessionError::UnknownPrompt(_))));
    assert!(matches!(service.submit_misc(0.0, 6, Some("Dizziness, Vague")), Err(SessionError::Feedback(_))));
    let ack = service.submit_misc(0.0, 6, Some("nausea,  SLIGHT")).unwrap();
    assert!(matches!(&ack.payload, EventPayload::MiscAck { value: 6, label, .. } if label == "Nausea, Slight"));
    assert!(matches!(service.submit_misc(0.0, 3, None), Err(SessionError::DuplicateResponse(_))));
    service.submit_likert(3).unwrap();
    assert!(matches!(service.submit_likert(4), Err(SessionError::DuplicateLikert)));
    service.set_guidance_volume(0.9).unwrap();

    let outcome = service.stop().unwrap();
    let log = SessionLog::load(&outcome.dir).unwrap();
    let misc = log.misc_responses();
    assert_eq!(misc.len(), 1);
    assert_eq!(misc[0].label, misc_label(6).unwrap());
    assert_eq!(log.manifest.likert, Some(3));
    let echoed: Vec<SessionEvent> = rx.try_iter().collect();
    assert!(echoed.contains(&ack));
    assert_eq!(echoed, log.events);
}

#[test]
fn answers_after_stop_amend_the_sealed_session() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    service.start(request(&f, SessionMode::Rs, 130.0, "amend")).unwrap();
    let outcome = service.wait().unwrap();
    let before = SessionLog::load(&outcome.dir).unwrap();

    let ack = service.submit_misc(2.0, 4, None).unwrap();
    assert_eq!(ack.t, 130.0);
    assert!(matches!(service.submit_misc(2.0, 4, None), Err(SessionError::DuplicateResponse(_))));
    assert!(matches!(service.submit_misc(4.0, 4, None), Err(SessionError::UnknownPrompt(_))));
    service.submit_likert(2).unwrap();

    let after = SessionLog::load(&outcome.dir).unwrap();
    assert_eq!(after.events.len(), before.events.len() + 2);
    assert_eq!((after.manifest.amendments, after.manifest.likert), (2, Some(2)));
    assert_eq!(after.misc_responses().len(), 1);
}

#[test]
fn interrupted_sessions_never_load_as_complete() {
    let f = fixture();
    let (log, _) = run(&f, SessionMode::Rms, 20.0, "crash");
    let dir = log.dir.clone();

    // Killed between payload and manifest: the temporary manifest may be
    // left behind but the real one never appears.
    let manifest = fs::read(dir.join(MANIFEST_FILE)).unwrap();
    fs::remove_file(dir.join(MANIFEST_FILE)).unwrap();
    fs::write(dir.join(".manifest.toml.tmp"), &manifest[..manifest.len() / 2]).unwrap();
    assert!(matches!(SessionLog::load(&dir), Err(SessionError::Incomplete(_))));
    fs::write(dir.join(MANIFEST_FILE), &manifest).unwrap();
    SessionLog::load(&dir).unwrap();

    // Killed while appending an amendment: payload no longer matches.
    let events = dir.join(EVENTS_FILE);
    let mut text = fs::read_to_string(&events).unwrap();
    text.push_str("{\"t\":20.0,\"type\":\"misc_ack\",\"prompt_t");
    fs::write(&events, text).unwrap();
    assert!(matches!(SessionLog::load(&dir), Err(SessionError::ChecksumMismatch { .. })));
}

#[test]
fn failed_start_leaves_no_directory() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    let mut req = request(&f, SessionMode::Rms, 30.0, "nope");
    req.weights = f.data.join("missing");
    assert!(matches!(service.start(req), Err(SessionError::Weights(_))));
    let mut req = request(&f, SessionMode::Rms, 30.0, "nope");
    req.stream = StreamConfig::new(SourceSpec::Replay { path: f.data.join("none.raw") });
    assert!(matches!(service.start(req), Err(SessionError::Ingest(_))));
    assert!(!f.data.join("nope").exists());
}

#[test]
fn source_ending_early_marks_session_aborted() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    let mut req = request(&f, SessionMode::Rms, 30.0, "short");
    req.planned_seconds = None;
    service.start(req).unwrap();
    let outcome = service.wait().unwrap();
    assert_eq!(outcome.status, CompletionStatus::Aborted);
    let log = SessionLog::load(&outcome.dir).unwrap();
    assert_eq!(log.manifest.planned_seconds, 5400.0);
    assert_eq!(log.manifest.duration_seconds, 30.0);
    assert_eq!(log.manifest.sample_count, 30 * 250);
}

#[test]
fn paced_run_tracks_wall_clock() {
    let f = fixture();
    let service = SessionService::new(&f.data, SceneCatalog::default());
    let mut req = paced(&f, "fast");
    req.planned_seconds = Some(40.0);
    req.options.pacing = Pacing::RealTime { speed: 20.0 };
    let t0 = std::time::Instant::now();
    service.start(req).unwrap();
    let outcome = service.wait().unwrap();
    let wall = t0.elapsed().as_secs_f64();
    assert!(wall >= 40.0 / 20.0 - 0.05, "finished in {wall} s");
    assert_eq!(outcome.status, CompletionStatus::Complete);
    assert_eq!(outcome.score_events + outcome.dropped_windows, 31);
}

#[test]
fn event_lines_round_trip_exactly() {
    let f = fixture();
    let (log, _) = run(&f, SessionMode::Rms, 15.0, "json");
    let text = fs::read_to_string(log.dir.join(EVENTS_FILE)).unwrap();
    for (line, event) in text.lines().zip(&log.events) {
        assert_eq!(event.to_json_line(), line);
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["type"].is_string() && v["t"].is_number());
    }
}
