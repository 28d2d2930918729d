//! Mindfulness neurofeedback engine.
//!
//! The crate covers the whole headless system:
//!
//! - [`ingest`]: sample sources (recording replay, synthetic generator, device stub)
//!   and the 10 s / 1 s sliding-window assembler.
//! - [`dsp`]: band-pass IIR design, the 35-band filter bank, Hilbert envelopes,
//!   Welch spectra, band powers, epoching, artifact rejection, z-scoring.
//! - [`model`]: time-frequency feature extraction and the multiscale CNN that maps
//!   a window to a 0-100 mindfulness score, plus the weight container format.
//! - [`feedback`]: score-to-scene mapping, pseudofeedback, session schedules and
//!   questionnaire instruments.
//! - [`stats`]: offline session summaries and the statistical toolkit.
//! - [`session`]: live session orchestration, event log, persistence.
//!
//! Data-parallel inner loops go through [`par::Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially.

pub mod dsp;
pub mod feedback;
pub mod ingest;
pub mod model;
pub mod par;
pub mod session;
pub mod stats;
