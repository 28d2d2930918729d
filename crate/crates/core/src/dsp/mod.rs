//! Signal-processing primitives.
//!
//! Everything here is a pure function of its inputs. The offline path filters
//! zero-phase (forward-backward); the real-time path filters causally.

mod bands;
mod epoch;
mod filter;
mod hilbert;
mod resample;
mod welch;
mod zscore;

use thiserror::Error;

pub use bands::{band_power, compute_band_powers, BandPowers, ALPHA_BAND, BETA_BAND, THETA_BAND, TOTAL_BAND};
pub use epoch::{reject_artifacts, split_epochs, ArtifactThresholds, Epoch, RejectReason, Verdict};
pub use filter::{apply_filter, design_bandpass, Biquad, CausalFilter, FilterBank, FilterSpec, Phase, BANK_SIZE, DEFAULT_ORDER};
pub use hilbert::{hilbert_envelope, AnalyticSignal, MIN_ENVELOPE_LEN};
pub use resample::resample;
pub use welch::{welch_psd, PsdEstimate, Taper, WelchParams};
pub use zscore::{zscore_in_place, zscore_matrix, Matrix, ZScored};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("invalid filter spec: {0}")]
    InvalidFilter(String),
    #[error("unstable filter design for [{low_hz}, {high_hz}] Hz at {sampling_rate} Hz (max pole radius {max_radius})")]
    UnstableDesign {
        low_hz: f64,
        high_hz: f64,
        sampling_rate: f64,
        max_radius: f64,
    },
    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("filter bank band {band}: {source}")]
    Band {
        band: usize,
        #[source]
        source: Box<DspError>,
    },
    #[error("Welch segment of {segment} samples is longer than the {signal}-sample signal")]
    SegmentTooLong { segment: usize, signal: usize },
    #[error("invalid Welch parameters: {0}")]
    InvalidWelch(String),
    #[error("band [{low}, {high}) Hz lies outside the spectrum (0 to {max} Hz)")]
    BandOutOfRange { low: f64, high: f64, max: f64 },
    #[error("band [{low}, {high}) Hz contains no frequency bins")]
    EmptyBand { low: f64, high: f64 },
    #[error("total band power is zero; relative powers are undefined")]
    ZeroTotalPower,
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidRate(f64),
}
