//! Band-limited resampling in the frequency domain.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::DspError;

/// Resamples `x` from `from_hz` to `to_hz` by truncating or zero-padding its
/// spectrum. The signal is treated as periodic, so edges can ring slightly;
/// content above the lower Nyquist frequency is discarded. Output length is
/// `round(len * to_hz / from_hz)`.
pub fn resample(x: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>, DspError> {
    for rate in [from_hz, to_hz] {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(DspError::InvalidRate(rate));
        }
    }
    if from_hz == to_hz || x.is_empty() {
        return Ok(x.to_vec());
    }
    let n = x.len();
    let m = ((n as f64 * to_hz / from_hz).round() as usize).max(1);
    let mut planner = FftPlanner::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);

    let keep = n.min(m);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    out[0] = spec[0];
    for k in 1..=(keep - 1) / 2 {
        out[k] = spec[k];
        out[m - k] = spec[n - k];
    }
    if keep % 2 == 0 && keep > 0 {
        let h = keep / 2;
        if m > n {
            // Split the old Nyquist bin across both signs.
            out[h] = spec[h] * 0.5;
            out[m - h] = spec[h] * 0.5;
        } else {
            out[h] = spec[h] + spec[n - h];
        }
    }
    planner.plan_fft_inverse(m).process(&mut out);
    Ok(out.iter().map(|c| c.re / n as f64).collect())
}
