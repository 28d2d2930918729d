//! 35 x 100 time-frequency feature matrix.
//!
//! Each window is filtered from zero state, so the matrix depends only on the
//! window's own samples and replaying a recording reproduces it exactly.

use std::time::{Duration, Instant};

use crate::dsp::{zscore_in_place, AnalyticSignal, FilterBank, Matrix, Phase, BANK_SIZE};
use crate::ingest::WindowBuffer;
use crate::par::Execution;

use super::ModelError;

pub const FEATURE_ROWS: usize = BANK_SIZE;
pub const FEATURE_COLS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    /// Bands ascending in frequency by envelope samples, z-scored.
    pub values: Matrix,
    pub window_start: f64,
    /// The window was flat; `values` is all zeros.
    pub degenerate: bool,
}

/// Reusable filter designs and FFT plans for one window length.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    bank: FilterBank,
    analytic: AnalyticSignal,
    window_len: usize,
    columns: usize,
}

impl FeatureExtractor {
    /// Extractor for windows of `window_len` samples at `sampling_rate`,
    /// pooled to [`FEATURE_COLS`] columns.
    pub fn new(sampling_rate: f64, window_len: usize) -> Result<Self, ModelError> {
        Self::with_columns(sampling_rate, window_len, FEATURE_COLS)
    }

    pub fn with_columns(sampling_rate: f64, window_len: usize, columns: usize) -> Result<Self, ModelError> {
        if columns == 0 || window_len < columns {
            return Err(ModelError::WindowLength {
                expected: columns,
                found: window_len,
            });
        }
        Ok(FeatureExtractor {
            bank: FilterBank::standard(sampling_rate)?,
            analytic: AnalyticSignal::new(window_len)?,
            window_len,
            columns,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    fn check(&self, samples: &[f64]) -> Result<(), ModelError> {
        if samples.len() != self.window_len {
            return Err(ModelError::WindowLength {
                expected: self.window_len,
                found: samples.len(),
            });
        }
        Ok(())
    }

    /// Causally filtered band signals, one row per band.
    pub fn band_signals(&self, samples: &[f64], exec: Execution) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check(samples)?;
        Ok(self.bank.apply(samples, Phase::Causal, exec)?)
    }

    /// Envelopes of the band signals, mean-pooled into blocks
    /// `[floor(j n / cols), floor((j+1) n / cols))`.
    pub fn pooled_envelopes(&self, bands: &[Vec<f64>], exec: Execution) -> Result<Matrix, ModelError> {
        let rows = exec
            .map_slice(bands, |b| self.analytic.envelope(b).map(|e| pool_mean(&e, self.columns)))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Matrix::from_rows(&rows))
    }

    /// Pooled envelopes before z-scoring.
    pub fn raw(&self, samples: &[f64], exec: Execution) -> Result<Matrix, ModelError> {
        let bands = self.band_signals(samples, exec)?;
        self.pooled_envelopes(&bands, exec)
    }

    pub fn extract(&self, window: &WindowBuffer, exec: Execution) -> Result<FeatureMatrix, ModelError> {
        Ok(self.extract_timed(window, exec)?.0)
    }

    /// Extraction with the filter-bank and envelope stage durations.
    pub fn extract_timed(
        &self,
        window: &WindowBuffer,
        exec: Execution,
    ) -> Result<(FeatureMatrix, Duration, Duration), ModelError> {
        let t0 = Instant::now();
        let bands = self.band_signals(&window.samples, exec)?;
        let t1 = Instant::now();
        let mut values = self.pooled_envelopes(&bands, exec)?;
        let degenerate = zscore_in_place(values.as_mut_slice());
        let t2 = Instant::now();
        Ok((
            FeatureMatrix {
                values,
                window_start: window.start_time,
                degenerate,
            },
            t1 - t0,
            t2 - t1,
        ))
    }
}

fn pool_mean(signal: &[f64], columns: usize) -> Vec<f64> {
    let n = signal.len();
    (0..columns)
        .map(|j| {
            let block = &signal[j * n / columns..(j + 1) * n / columns];
            block.iter().sum::<f64>() / block.len() as f64
        })
        .collect()
}
