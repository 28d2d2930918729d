//! Seeded synthetic EEG.
//!
//! The signal is a sum of independent Gaussian components, each synthesised in
//! the frequency domain with a prescribed one-sided PSD:
//!
//! - a `1/f^e` background above [`SynthModel::BACKGROUND_FLOOR_HZ`],
//! - flat band-limited noise in the theta, alpha and beta bands, scaled over
//!   time by the latent mindfulness trajectory.
//!
//! Higher latent mindfulness lowers the theta amplitude and raises beta, so
//! relative theta falls and relative beta rises as the latent increases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::SampleRecord;

/// Piecewise-linear latent mindfulness over time, clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentTrajectory {
    /// `(seconds, value)` breakpoints sorted by time.
    points: Vec<(f64, f64)>,
}

impl LatentTrajectory {
    pub fn constant(value: f64) -> Self {
        LatentTrajectory {
            points: vec![(0.0, value.clamp(0.0, 1.0))],
        }
    }

    /// Breakpoints must be non-empty; they are sorted by time and values are
    /// clamped to `[0, 1]`.
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Option<Self> {
        if points.is_empty() || points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return None;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for p in &mut points {
            p.1 = p.1.clamp(0.0, 1.0);
        }
        Some(LatentTrajectory { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                if t1 == t0 {
                    return v1;
                }
                return (v0 + (v1 - v0) * (t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// Per-band amplitude multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandGains {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BandGains {
    fn default() -> Self {
        BandGains {
            theta: 1.0,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthControl {
    pub latent: LatentTrajectory,
    pub band_gains: BandGains,
    /// Exponent `e` of the `1/f^e` background; 0 gives white noise.
    pub noise_exponent: f64,
}

impl Default for SynthControl {
    fn default() -> Self {
        SynthControl::with_latent(0.5)
    }
}

impl SynthControl {
    pub fn with_latent(latent: f64) -> Self {
        SynthControl {
            latent: LatentTrajectory::constant(latent),
            band_gains: BandGains::default(),
            noise_exponent: 1.0,
        }
    }

    fn sanitized_gains(&self) -> BandGains {
        let g = |v: f64| if v.is_finite() { v.max(0.0) } else { 0.0 };
        BandGains {
            theta: g(self.band_gains.theta),
            alpha: g(self.band_gains.alpha),
            beta: g(self.band_gains.beta),
        }
    }
}

/// Generator constants and the closed-form spectrum they imply.
pub struct SynthModel;

impl SynthModel {
    pub const BACKGROUND_RMS_UV: f64 = 12.0;
    pub const BACKGROUND_FLOOR_HZ: f64 = 0.5;
    pub const THETA_RMS_UV: f64 = 10.0;
    pub const ALPHA_RMS_UV: f64 = 8.0;
    pub const BETA_RMS_UV: f64 = 6.0;
    pub const THETA_BAND: (f64, f64) = (4.0, 8.0);
    pub const ALPHA_BAND: (f64, f64) = (8.0, 13.0);
    pub const BETA_BAND: (f64, f64) = (13.0, 30.0);

    pub fn theta_multiplier(latent: f64) -> f64 {
        1.0 - 0.6 * latent
    }

    pub fn beta_multiplier(latent: f64) -> f64 {
        0.4 + 0.6 * latent
    }

    /// Expected power (µV²) in `[low, high)` Hz for a constant latent value,
    /// from integrating the component PSDs.
    pub fn expected_band_power(control: &SynthControl, latent: f64, rate: f64, low: f64, high: f64) -> f64 {
        let nyquist = rate / 2.0;
        let e = control.noise_exponent;
        let integral = |a: f64, b: f64| -> f64 {
            let a = a.max(Self::BACKGROUND_FLOOR_HZ);
            let b = b.min(nyquist);
            if b <= a {
                return 0.0;
            }
            if (e - 1.0).abs() < 1e-12 {
                (b / a).ln()
            } else {
                (b.powf(1.0 - e) - a.powf(1.0 - e)) / (1.0 - e)
            }
        };
        let mut power = Self::BACKGROUND_RMS_UV.powi(2) * integral(low, high) / integral(0.0, nyquist);
        let gains = control.sanitized_gains();
        let latent = latent.clamp(0.0, 1.0);
        let comps = [
            (Self::THETA_BAND, Self::THETA_RMS_UV * gains.theta * Self::theta_multiplier(latent)),
            (Self::ALPHA_BAND, Self::ALPHA_RMS_UV * gains.alpha),
            (Self::BETA_BAND, Self::BETA_RMS_UV * gains.beta * Self::beta_multiplier(latent)),
        ];
        for ((lo, hi), rms) in comps {
            let overlap = (high.min(hi) - low.max(lo)).max(0.0);
            power += rms * rms * overlap / (hi - lo);
        }
        power
    }
}

/// Zero-mean Gaussian noise with one-sided PSD proportional to `shape(f)`,
/// scaled so its expected variance is `variance`.
fn shaped_noise(n: usize, rate: f64, rng: &mut ChaCha8Rng, variance: f64, shape: impl Fn(f64) -> f64) -> Vec<f64> {
    if n == 0 || variance == 0.0 {
        return vec![0.0; n];
    }
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let mut expected = 0.0;
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * rate / n as f64;
        let s = shape(f);
        let (g1, g2): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        if s <= 0.0 {
            continue;
        }
        if n % 2 == 0 && k == half {
            spec[k] = Complex64::new(s.sqrt() * g1, 0.0);
            expected += s;
        } else {
            let c = Complex64::new(g1, g2) * (s / 2.0).sqrt();
            spec[k] = c;
            spec[n - k] = c.conj();
            expected += 2.0 * s;
        }
    }
    if expected == 0.0 {
        return vec![0.0; n];
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    // E[x^2] = expected / n^2 before scaling
    let scale = (variance / expected).sqrt();
    spec.iter().map(|c| c.re * scale).collect()
}

/// Generates `duration × rate` samples. Pure in `(control, duration, rate, seed)`;
/// values are rounded to `f32` precision.
pub fn synth_generate(control: &SynthControl, duration: f64, rate: f64, seed: u64) -> Vec<SampleRecord> {
    assert!(duration > 0.0 && rate > 0.0, "duration and rate must be positive");
    let n = (duration * rate).round() as usize;
    let gains = control.sanitized_gains();
    let e = control.noise_exponent;
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };

    let background = shaped_noise(n, rate, &mut rng(0), SynthModel::BACKGROUND_RMS_UV.powi(2), |f| {
        if f < SynthModel::BACKGROUND_FLOOR_HZ {
            0.0
        } else {
            f.powf(-e)
        }
    });
    let band = |(lo, hi): (f64, f64)| move |f: f64| if f >= lo && f < hi { 1.0 } else { 0.0 };
    let theta = shaped_noise(n, rate, &mut rng(1), 1.0, band(SynthModel::THETA_BAND));
    let alpha = shaped_noise(n, rate, &mut rng(2), 1.0, band(SynthModel::ALPHA_BAND));
    let beta = shaped_noise(n, rate, &mut rng(3), 1.0, band(SynthModel::BETA_BAND));

    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let m = control.latent.at(t);
            let v = background[i]
                + theta[i] * SynthModel::THETA_RMS_UV * gains.theta * SynthModel::theta_multiplier(m)
                + alpha[i] * SynthModel::ALPHA_RMS_UV * gains.alpha
                + beta[i] * SynthModel::BETA_RMS_UV * gains.beta * SynthModel::beta_multiplier(m);
            SampleRecord {
                timestamp: t,
                value: v as f32 as f64,
                channel: 0,
            }
        })
        .collect()
}
