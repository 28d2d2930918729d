//! Window-by-window scoring with per-stage latency accounting.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ingest::WindowBuffer;
use crate::par::Execution;

use super::cnn::Network;
use super::features::FeatureExtractor;
use super::{MindfulnessScore, ModelError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub filter_bank: Duration,
    pub envelope: Duration,
    pub cnn: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.filter_bank + self.envelope + self.cnn
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScoreEvent {
    Score {
        window_index: u64,
        score: MindfulnessScore,
        timings: StageTimings,
        /// Processing took longer than the hop period.
        overrun: bool,
    },
    /// The window spans a sample gap; no score is produced for it.
    Gap { window_index: u64, window_start: f64 },
}

impl ScoreEvent {
    pub fn window_index(&self) -> u64 {
        match self {
            ScoreEvent::Score { window_index, .. } | ScoreEvent::Gap { window_index, .. } => *window_index,
        }
    }

    pub fn score(&self) -> Option<&MindfulnessScore> {
        match self {
            ScoreEvent::Score { score, .. } => Some(score),
            ScoreEvent::Gap { .. } => None,
        }
    }
}

/// Feature extraction plus network, with the hop period as deadline.
pub struct ScoringPipeline {
    extractor: FeatureExtractor,
    network: Arc<Network>,
    exec: Execution,
    deadline: Duration,
}

impl ScoringPipeline {
    pub fn new(
        network: Arc<Network>,
        sampling_rate: f64,
        window_len: usize,
        hop_seconds: f64,
        exec: Execution,
    ) -> Result<Self, ModelError> {
        Ok(ScoringPipeline {
            extractor: FeatureExtractor::new(sampling_rate, window_len)?,
            network,
            exec,
            deadline: Duration::from_secs_f64(hop_seconds),
        })
    }

    pub fn deadline(&self) -> Duration {
        self.deadline
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.network
    }

    pub fn process(&self, window: &WindowBuffer) -> Result<ScoreEvent, ModelError> {
        if window.discontinuous {
            return Ok(ScoreEvent::Gap {
                window_index: window.index,
                window_start: window.start_time,
            });
        }
        let (features, filter_bank, envelope) = self.extractor.extract_timed(window, self.exec)?;
        let t = Instant::now();
        let score = self.network.forward(&features, self.exec)?;
        let timings = StageTimings {
            filter_bank,
            envelope,
            cnn: t.elapsed(),
        };
        Ok(ScoreEvent::Score {
            window_index: window.index,
            score,
            overrun: timings.total() > self.deadline,
            timings,
        })
    }
}

/// One event per window, in window order.
pub fn score_stream<'a, I>(
    pipeline: &'a ScoringPipeline,
    windows: I,
) -> impl Iterator<Item = Result<ScoreEvent, ModelError>> + 'a
where
    I: IntoIterator<Item = WindowBuffer>,
    I::IntoIter: 'a,
{
    windows.into_iter().map(move |w| pipeline.process(&w))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles of `samples`.
    pub fn of(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Percentiles::default();
        }
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let rank = |q: f64| ms[((q * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
        Percentiles {
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
            p99_ms: rank(0.99),
            max_ms: ms[ms.len() - 1],
        }
    }
}

/// Accumulates stage timings over a run.
#[derive(Clone, Debug, Default)]
pub struct LatencyReport {
    filter_bank: Vec<Duration>,
    envelope: Vec<Duration>,
    cnn: Vec<Duration>,
    total: Vec<Duration>,
    deadline_misses: usize,
    gaps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LatencySummary {
    pub windows: usize,
    pub gaps: usize,
    pub deadline_misses: usize,
    pub filter_bank: Percentiles,
    pub envelope: Percentiles,
    pub cnn: Percentiles,
    pub total: Percentiles,
}

impl LatencyReport {
    pub fn record(&mut self, event: &ScoreEvent) {
        match event {
            ScoreEvent::Score { timings, overrun, .. } => {
                self.filter_bank.push(timings.filter_bank);
                self.envelope.push(timings.envelope);
                self.cnn.push(timings.cnn);
                self.total.push(timings.total());
                self.deadline_misses += usize::from(*overrun);
            }
            ScoreEvent::Gap { .. } => self.gaps += 1,
        }
    }

    pub fn windows(&self) -> usize {
        self.total.len()
    }

    pub fn deadline_misses(&self) -> usize {
        self.deadline_misses
    }

    pub fn summary(&self) -> LatencySummary {
        LatencySummary {
            windows: self.total.len(),
            gaps: self.gaps,
            deadline_misses: self.deadline_misses,
            filter_bank: Percentiles::of(&self.filter_bank),
            envelope: Percentiles::of(&self.envelope),
            cnn: Percentiles::of(&self.cnn),
            total: Percentiles::of(&self.total),
        }
    }
}
