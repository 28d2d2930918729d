//! Analytic signal and amplitude envelope via the frequency domain.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DspError;

pub const MIN_ENVELOPE_LEN: usize = 16;

/// Precomputed FFT plans for one signal length. Cheap to share across threads.
#[derive(Clone)]
pub struct AnalyticSignal {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AnalyticSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticSignal").field("len", &self.len).finish()
    }
}

impl AnalyticSignal {
    pub fn new(len: usize) -> Result<Self, DspError> {
        if len < MIN_ENVELOPE_LEN {
            return Err(DspError::SignalTooShort {
                needed: MIN_ENVELOPE_LEN,
                got: len,
            });
        }
        let mut planner = FftPlanner::new();
        Ok(AnalyticSignal {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `signal + i * hilbert(signal)`.
    pub fn analytic(&self, signal: &[f64]) -> Result<Vec<Complex64>, DspError> {
        if signal.len() != self.len {
            return Err(DspError::SignalTooShort {
                needed: self.len,
                got: signal.len(),
            });
        }
        let n = self.len;
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        // keep DC (and Nyquist for even n), double positive, zero negative
        let half = n.div_ceil(2);
        for c in &mut buf[1..half] {
            *c *= 2.0;
        }
        for c in &mut buf[n / 2 + 1..] {
            *c = Complex64::new(0.0, 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        Ok(buf)
    }

    pub fn envelope(&self, signal: &[f64]) -> Result<Vec<f64>, DspError> {
        Ok(self.analytic(signal)?.into_iter().map(|c| c.norm()).collect())
    }
}

/// Magnitude of the analytic signal.
pub fn hilbert_envelope(signal: &[f64]) -> Result<Vec<f64>, DspError> {
    AnalyticSignal::new(signal.len())?.envelope(signal)
}
