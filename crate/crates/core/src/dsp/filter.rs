//! Butterworth band-pass design as cascaded second-order sections.
//!
//! `order` is the order of the analog low-pass prototype; the band-pass has
//! `2 * order` poles, realised as `order` biquads. Edges are pre-warped and the
//! design mapped through the bilinear transform; the gain is normalised to
//! unity at the warped geometric band centre.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DspError;
use crate::par::Execution;

pub const DEFAULT_ORDER: usize = 4;
/// Number of bands in the feature filter bank.
pub const BANK_SIZE: usize = 35;
const BANK_FIRST_LOW_HZ: f64 = 0.1;
const BANK_WIDTH_HZ: f64 = 2.0;

/// One second-order section, `a0` normalised to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }

    fn poles(&self) -> [Complex64; 2] {
        // z^2 + a1 z + a2 = 0
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

/// A designed band-pass filter.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub sampling_rate: f64,
    sections: Vec<Biquad>,
}

impl FilterSpec {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Minimum input length accepted by [`apply_filter`].
    pub fn min_signal_len(&self) -> usize {
        3 * self.order
    }
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (Complex64::new(fs2, 0.0) + s) / (Complex64::new(fs2, 0.0) - s)
}

/// Groups digital poles into conjugate pairs (or pairs of real poles) and
/// builds one denominator per pair.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 2]> {
    let tol = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    complex.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= tol).map(|p| p.re).collect();
    real.sort_by(f64::total_cmp);
    let mut dens: Vec<[f64; 2]> = complex.iter().map(|p| [-2.0 * p.re, p.norm_sqr()]).collect();
    for pair in real.chunks(2) {
        match *pair {
            [r1, r2] => dens.push([-(r1 + r2), r1 * r2]),
            [r] => dens.push([-r, 0.0]),
            _ => unreachable!(),
        }
    }
    dens
}

/// Designs a Butterworth band-pass (or low-pass when `low_hz == 0`).
pub fn design_bandpass(low_hz: f64, high_hz: f64, order: usize, sampling_rate: f64) -> Result<FilterSpec, DspError> {
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(DspError::InvalidFilter(format!("sampling rate {sampling_rate} Hz")));
    }
    if order == 0 || order % 2 != 0 {
        return Err(DspError::InvalidFilter(format!("order must be even and positive, got {order}")));
    }
    let nyquist = sampling_rate / 2.0;
    if !(low_hz >= 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(DspError::InvalidFilter(format!(
            "need 0 <= low < high < Nyquist ({nyquist} Hz), got [{low_hz}, {high_hz}]"
        )));
    }
    let fs2 = 2.0 * sampling_rate;
    let warp = |f: f64| fs2 * (PI * f / sampling_rate).tan();
    let w_high = warp(high_hz);
    let proto = prototype_poles(order);

    let (digital_poles, numerator, centre_w) = if low_hz == 0.0 {
        let poles: Vec<Complex64> = proto.iter().map(|p| bilinear(p * w_high, fs2)).collect();
        // zeros at z = -1
        (poles, [1.0, 2.0, 1.0], 0.0)
    } else {
        let w_low = warp(low_hz);
        let bw = w_high - w_low;
        let w0_sq = w_low * w_high;
        let mut poles = Vec::with_capacity(2 * order);
        for p in &proto {
            // s^2 - p*bw*s + w0^2 = 0
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            poles.push(bilinear((pb + disc) / 2.0, fs2));
            poles.push(bilinear((pb - disc) / 2.0, fs2));
        }
        // one zero at z = 1 and one at z = -1 per section
        let centre = 2.0 * (w0_sq.sqrt() / fs2).atan();
        (poles, [1.0, 0.0, -1.0], centre)
    };

    let dens = pair_poles(&digital_poles);
    let mut sections: Vec<Biquad> = dens
        .into_iter()
        .map(|a| {
            let b = if a[1] == 0.0 && low_hz == 0.0 {
                // first-order section left over from an odd real-pole count
                [1.0, 1.0, 0.0]
            } else {
                numerator
            };
            Biquad { b, a }
        })
        .collect();
    for s in &mut sections {
        let g = s.response(centre_w).norm();
        if g > 0.0 && g.is_finite() {
            for b in &mut s.b {
                *b /= g;
            }
        }
    }
    let spec = FilterSpec {
        low_hz,
        high_hz,
        order,
        sampling_rate,
        sections,
    };
    let max_radius = spec.max_pole_radius();
    if !(max_radius < 1.0 - 1e-12) || spec.sections.iter().any(|s| s.b.iter().chain(&s.a).any(|c| !c.is_finite())) {
        return Err(DspError::UnstableDesign {
            low_hz,
            high_hz,
            sampling_rate,
            max_radius,
        });
    }
    Ok(spec)
}

/// How [`apply_filter`] runs the filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Forward-backward with odd-reflection padding; no phase distortion.
    ZeroPhase,
    /// Single forward pass from a zero state.
    Causal,
}

/// Streaming transposed direct-form II cascade.
#[derive(Clone, Debug)]
pub struct CausalFilter {
    sections: Vec<Biquad>,
    state: Vec<[f64; 2]>,
}

impl CausalFilter {
    pub fn new(spec: &FilterSpec) -> Self {
        CausalFilter {
            sections: spec.sections.clone(),
            state: vec![[0.0; 2]; spec.sections.len()],
        }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = [0.0; 2]);
    }

    #[inline]
    pub fn process_sample(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, st) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = s.b[0] * v + st[0];
            st[0] = s.b[1] * v - s.a[0] * y + st[1];
            st[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }

    pub fn process_in_place(&mut self, data: &mut [f64]) {
        // section-major order keeps each section's state in registers
        for (s, st) in self.sections.iter().zip(self.state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let (mut z1, mut z2) = (st[0], st[1]);
            for x in data.iter_mut() {
                let v = *x;
                let y = b0 * v + z1;
                z1 = b1 * v - a1 * y + z2;
                z2 = b2 * v - a2 * y;
                *x = y;
            }
            *st = [z1, z2];
        }
    }
}

/// Filters `signal` with `spec`.
pub fn apply_filter(spec: &FilterSpec, signal: &[f64], phase: Phase) -> Result<Vec<f64>, DspError> {
    let needed = spec.min_signal_len();
    if signal.len() < needed {
        return Err(DspError::SignalTooShort {
            needed,
            got: signal.len(),
        });
    }
    let mut filter = CausalFilter::new(spec);
    match phase {
        Phase::Causal => {
            let mut out = signal.to_vec();
            filter.process_in_place(&mut out);
            Ok(out)
        }
        Phase::ZeroPhase => {
            let n = signal.len();
            let pad = (3 * (2 * spec.sections.len() + 1)).min(n - 1);
            let (first, last) = (signal[0], signal[n - 1]);
            let mut ext = Vec::with_capacity(n + 2 * pad);
            ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
            ext.extend_from_slice(signal);
            ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));
            filter.process_in_place(&mut ext);
            ext.reverse();
            filter.reset();
            filter.process_in_place(&mut ext);
            ext.reverse();
            Ok(ext[pad..pad + n].to_vec())
        }
    }
}

/// The 35 abutting 2 Hz bands from 0.1 Hz to 70.1 Hz.
#[derive(Clone, Debug)]
pub struct FilterBank {
    bands: Vec<FilterSpec>,
}

impl FilterBank {
    /// Band `i` spans `[0.1 + 2i, 2.1 + 2i]` Hz.
    pub fn band_edges(i: usize) -> (f64, f64) {
        let low = BANK_FIRST_LOW_HZ + BANK_WIDTH_HZ * i as f64;
        (low, low + BANK_WIDTH_HZ)
    }

    pub fn standard(sampling_rate: f64) -> Result<Self, DspError> {
        Self::with_order(sampling_rate, DEFAULT_ORDER)
    }

    pub fn with_order(sampling_rate: f64, order: usize) -> Result<Self, DspError> {
        let bands = (0..BANK_SIZE)
            .map(|i| {
                let (lo, hi) = Self::band_edges(i);
                design_bandpass(lo, hi, order, sampling_rate).map_err(|e| DspError::Band {
                    band: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FilterBank { bands })
    }

    pub fn bands(&self) -> &[FilterSpec] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// One filtered row per band, ascending in frequency.
    pub fn apply(&self, signal: &[f64], phase: Phase, exec: Execution) -> Result<Vec<Vec<f64>>, DspError> {
        exec.map_slice(&self.bands, |b| apply_filter(b, signal, phase))
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| DspError::Band {
                    band: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}
