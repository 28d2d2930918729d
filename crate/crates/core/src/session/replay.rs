use std::path::Path;
use std::sync::Arc;

use crate::ingest::{open_source, SourceSpec, StreamConfig, WindowStream};
use crate::model::{ModelWeights, Network, ScoreEvent, ScoringPipeline, WEIGHTS_BLOB};
use crate::par::Execution;

use super::store::sha256_file;
use super::{EventPayload, SessionError, SessionLog};

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    /// `(window_index, score)` from the event log.
    pub logged: Vec<(u64, f64)>,
    /// `(window_index, score)` recomputed from the recording, for every
    /// window inside the session's duration that was not a gap.
    pub replayed: Vec<(u64, f64)>,
    /// Logged windows whose recomputed score differs in any bit, or that
    /// were not recomputed at all.
    pub mismatches: Vec<u64>,
}

impl ReplayReport {
    pub fn bit_identical(&self) -> bool {
        self.mismatches.is_empty() && !self.logged.is_empty()
    }
}

/// Re-scores a finished session from its recording with the weights it was
/// recorded with and compares against the logged scores.
pub fn replay_session(dir: &Path, exec: Execution) -> Result<ReplayReport, SessionError> {
    let log = SessionLog::load(dir)?;
    let m = &log.manifest;
    if sha256_file(&m.weights.path.join(WEIGHTS_BLOB))? != m.weights.sha256 {
        return Err(SessionError::WeightsChanged {
            path: m.weights.path.clone(),
        });
    }
    let network = Arc::new(Network::new(&ModelWeights::load(&m.weights.path)?));
    let config = StreamConfig {
        source: SourceSpec::Replay { path: log.eeg_path() },
        ..m.stream.clone()
    };
    let pipeline = ScoringPipeline::new(network, config.sampling_rate, config.window_len(), config.hop_seconds, exec)?;

    // Gaps are not visible in the recording, so windows logged as gaps are
    // skipped rather than scored.
    let gaps: std::collections::BTreeSet<u64> = log
        .events
        .iter()
        .filter_map(|e| match e.payload {
            EventPayload::Gap { window_index, .. } => Some(window_index),
            _ => None,
        })
        .collect();

    let mut windows = WindowStream::new(open_source(&config)?, &config)?;
    let mut replayed = Vec::new();
    while let Some(w) = windows.next_window()? {
        if gaps.contains(&w.index) {
            continue;
        }
        if let ScoreEvent::Score { window_index, score, .. } = pipeline.process(&w)? {
            replayed.push((window_index, score.score));
        }
    }

    let logged = log.scores();
    let mismatches = logged
        .iter()
        .filter(|(i, s)| {
            replayed
                .binary_search_by_key(i, |r| r.0)
                .map_or(true, |k| replayed[k].1.to_bits() != s.to_bits())
        })
        .map(|(i, _)| *i)
        .collect();
    Ok(ReplayReport {
        logged,
        replayed,
        mismatches,
    })
}
