//! EEG sample sources and sliding-window assembly.
//!
//! All sources yield [`SampleRecord`]s in timestamp order. Values are always
//! representable as `f32`, so a stream persisted to an `eeg.raw` recording and
//! replayed later produces bit-identical samples.

mod recording;
mod source;
mod synth;
mod window;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use recording::{read_recording, write_recording, Recording, RecordingHeader, RecordingReader, RecordingWriter, RECORDING_MAGIC, RECORDING_VERSION};
pub use source::{open_source, SampleStream};
pub use synth::{synth_generate, BandGains, LatentTrajectory, SynthControl, SynthModel};
pub use window::{WindowAssembler, WindowBuffer, WindowStream};

/// Lowest accepted sampling rate. The filter bank reaches 70.1 Hz, so Nyquist
/// needs margin above that.
pub const MIN_SAMPLING_RATE: f64 = 150.0;
pub const DEFAULT_SAMPLING_RATE: f64 = 250.0;
pub const DEFAULT_WINDOW_SECONDS: f64 = 10.0;
pub const DEFAULT_HOP_SECONDS: f64 = 1.0;

/// One single-channel EEG sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRecord {
    /// Seconds since session start.
    pub timestamp: f64,
    /// Microvolts.
    pub value: f64,
    pub channel: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Replay,
    Synthetic,
    Device,
}

/// Where samples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// An `eeg.raw` recording on disk.
    Replay { path: PathBuf },
    /// The seeded generator in [`synth_generate`].
    Synthetic {
        control: SynthControl,
        duration_seconds: f64,
        seed: u64,
    },
    /// A TCP endpoint streaming little-endian f32 microvolt samples.
    Device { address: String },
}

impl SourceSpec {
    pub fn kind(&self) -> SourceKind {
        match self {
            SourceSpec::Replay { .. } => SourceKind::Replay,
            SourceSpec::Synthetic { .. } => SourceKind::Synthetic,
            SourceSpec::Device { .. } => SourceKind::Device,
        }
    }

    pub fn locator(&self) -> String {
        match self {
            SourceSpec::Replay { path } => path.display().to_string(),
            SourceSpec::Synthetic { seed, .. } => format!("synth:{seed}"),
            SourceSpec::Device { address } => address.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub sampling_rate: f64,
    pub source: SourceSpec,
    pub window_seconds: f64,
    pub hop_seconds: f64,
}

impl StreamConfig {
    pub fn new(source: SourceSpec) -> Self {
        StreamConfig {
            sampling_rate: DEFAULT_SAMPLING_RATE,
            source,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            hop_seconds: DEFAULT_HOP_SECONDS,
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.sampling_rate = rate;
        self
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source.kind()
    }

    /// Samples per analysis window.
    pub fn window_len(&self) -> usize {
        (self.sampling_rate * self.window_seconds).round() as usize
    }

    /// Samples per hop.
    pub fn hop_len(&self) -> usize {
        (self.sampling_rate * self.hop_seconds).round() as usize
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.sampling_rate.is_finite() && self.sampling_rate >= MIN_SAMPLING_RATE) {
            return Err(IngestError::UnsupportedRate(self.sampling_rate));
        }
        if !(self.hop_seconds > 0.0 && self.window_seconds > self.hop_seconds) {
            return Err(IngestError::InvalidConfig(format!(
                "need window_seconds > hop_seconds > 0, got window {} hop {}",
                self.window_seconds, self.hop_seconds
            )));
        }
        for (name, secs) in [("window", self.window_seconds), ("hop", self.hop_seconds)] {
            let n = self.sampling_rate * secs;
            if (n - n.round()).abs() > 1e-6 {
                return Err(IngestError::InvalidConfig(format!(
                    "{name} of {secs} s is not a whole number of samples at {} Hz",
                    self.sampling_rate
                )));
            }
        }
        if let SourceSpec::Synthetic { duration_seconds, .. } = &self.source {
            if !(*duration_seconds > 0.0) {
                return Err(IngestError::InvalidConfig("synthetic duration must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("recording not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed recording header: {0}")]
    MalformedHeader(String),
    #[error("unsupported sampling rate {0} Hz (minimum {MIN_SAMPLING_RATE} Hz)")]
    UnsupportedRate(f64),
    #[error("invalid stream configuration: {0}")]
    InvalidConfig(String),
    #[error("device at {address} unavailable: {source}")]
    DeviceUnavailable {
        address: String,
        #[source]
        source: std::io::Error,
    },
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(u64),
    #[error("timestamps not strictly increasing at {0} s")]
    NonMonotonicTimestamp(f64),
}
