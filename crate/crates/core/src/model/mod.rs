//! Time-frequency features and the multiscale CNN mindfulness scorer.
//!
//! A 10 s window becomes a 35 x 100 matrix: one row per filter-bank band, each
//! row the band's Hilbert envelope mean-pooled to 10 Hz, the whole matrix
//! z-scored. The network maps it to `P(mindful)`; the score is `100 * P`.

mod arch;
mod cnn;
mod features;
pub mod fixture;
mod stream;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;

pub use arch::{Architecture, LayerShape, TensorShape};
pub use cnn::{softmax, Network, Prediction, Tensor3};
pub use features::{FeatureExtractor, FeatureMatrix, FEATURE_COLS, FEATURE_ROWS};
pub use stream::{score_stream, LatencyReport, LatencySummary, Percentiles, ScoreEvent, ScoringPipeline, StageTimings};
pub use weights::{ModelWeights, NamedTensor, WeightsError, WEIGHTS_BLOB, WEIGHTS_FORMAT, WEIGHTS_MANIFEST, WEIGHTS_VERSION};

/// Index of the mindful class in the output layer.
pub const MINDFUL_CLASS: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MindfulnessScore {
    /// `100 * probability`, in `[0, 100]`.
    pub score: f64,
    pub probability: f64,
    pub window_start: f64,
}

impl MindfulnessScore {
    pub fn from_probability(probability: f64, window_start: f64) -> Self {
        let p = probability.clamp(0.0, 1.0);
        MindfulnessScore {
            score: 100.0 * p,
            probability: p,
            window_start,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("feature shape {found:?} does not match network input {expected:?}")]
    FeatureShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("window of {found} samples, extractor expects {expected}")]
    WindowLength { expected: usize, found: usize },
}
