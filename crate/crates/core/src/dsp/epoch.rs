use serde::{Deserialize, Serialize};

/// Amplitude thresholds on the per-epoch maximum absolute sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArtifactThresholds {
    /// Reject when the peak exceeds this (motion or contact artifact).
    pub over_uv: f64,
    /// Reject when the peak stays below this (flat or disconnected).
    pub under_uv: f64,
}

impl Default for ArtifactThresholds {
    fn default() -> Self {
        ArtifactThresholds {
            over_uv: 300.0,
            under_uv: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    OverAmplitude,
    UnderAmplitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub samples: Vec<f64>,
    pub verdict: Verdict,
}

/// Consecutive non-overlapping epochs; a trailing partial epoch is dropped.
pub fn split_epochs(signal: &[f64], sampling_rate: f64, epoch_seconds: f64) -> Vec<Epoch> {
    let len = (sampling_rate * epoch_seconds).round() as usize;
    if len == 0 {
        return Vec::new();
    }
    signal
        .chunks_exact(len)
        .enumerate()
        .map(|(index, chunk)| Epoch {
            index,
            samples: chunk.to_vec(),
            verdict: Verdict::Pending,
        })
        .collect()
}

/// Peak-amplitude rule: over `over_uv` or under `under_uv` rejects. Both
/// boundaries themselves are accepted.
pub fn reject_artifacts(epoch: &Epoch, thresholds: &ArtifactThresholds) -> Verdict {
    let peak = epoch.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if epoch.samples.iter().any(|v| v.is_nan()) || peak > thresholds.over_uv {
        Verdict::Rejected(RejectReason::OverAmplitude)
    } else if peak < thresholds.under_uv {
        Verdict::Rejected(RejectReason::UnderAmplitude)
    } else {
        Verdict::Accepted
    }
}
