//! Welch power spectral density.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::DspError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Taper {
    /// Periodic Hann window.
    Hann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchParams {
    pub segment_seconds: f64,
    /// Fraction of a segment shared with its neighbour, in `[0, 1)`.
    pub overlap_fraction: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            segment_seconds: 4.0,
            overlap_fraction: 0.5,
        }
    }
}

impl WelchParams {
    /// 1 s segments for 1 Hz bins, as used for cluster-level spectrum comparison.
    pub fn one_hz() -> Self {
        WelchParams {
            segment_seconds: 1.0,
            overlap_fraction: 0.5,
        }
    }
}

/// One-sided PSD in µV²/Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    /// Bin spacing in Hz.
    pub resolution: f64,
    pub segment_len: usize,
    pub overlap_len: usize,
    pub segments: usize,
    pub taper: Taper,
}

impl PsdEstimate {
    pub fn max_frequency(&self) -> f64 {
        self.frequencies.last().copied().unwrap_or(0.0)
    }

    /// Sum of power times bin width: the variance estimate.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Averaged periodogram of Hann-tapered, overlapping segments. No detrending,
/// so a DC offset shows up at the 0 Hz bin.
pub fn welch_psd(signal: &[f64], sampling_rate: f64, params: WelchParams) -> Result<PsdEstimate, DspError> {
    if !(sampling_rate > 0.0 && params.segment_seconds > 0.0) {
        return Err(DspError::InvalidWelch(format!(
            "rate {sampling_rate} Hz, segment {} s",
            params.segment_seconds
        )));
    }
    if !(0.0..1.0).contains(&params.overlap_fraction) {
        return Err(DspError::InvalidWelch(format!("overlap {} not in [0, 1)", params.overlap_fraction)));
    }
    let nseg = (params.segment_seconds * sampling_rate).round() as usize;
    if nseg < 2 {
        return Err(DspError::InvalidWelch(format!("segment of {nseg} samples")));
    }
    if nseg > signal.len() {
        return Err(DspError::SegmentTooLong {
            segment: nseg,
            signal: signal.len(),
        });
    }
    let overlap = ((params.overlap_fraction * nseg as f64).round() as usize).min(nseg - 1);
    let step = nseg - overlap;
    let segments = (signal.len() - nseg) / step + 1;

    let window = hann(nseg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nseg);
    let bins = nseg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); nseg];
    for s in 0..segments {
        let seg = &signal[s * step..s * step + nseg];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }
    let scale = 1.0 / (sampling_rate * window_power * segments as f64);
    let power: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (nseg % 2 == 0 && k == nseg / 2) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let resolution = sampling_rate / nseg as f64;
    Ok(PsdEstimate {
        frequencies: (0..bins).map(|k| k as f64 * resolution).collect(),
        power,
        resolution,
        segment_len: nseg,
        overlap_len: overlap,
        segments,
        taper: Taper::Hann,
    })
}
