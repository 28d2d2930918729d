use serde::{Deserialize, Serialize};

use super::{DspError, PsdEstimate};

pub const THETA_BAND: (f64, f64) = (4.0, 8.0);
pub const ALPHA_BAND: (f64, f64) = (8.0, 13.0);
pub const BETA_BAND: (f64, f64) = (13.0, 30.0);
pub const TOTAL_BAND: (f64, f64) = (1.0, 40.0);

/// Power (µV²) integrated over bins whose centre falls in `[low, high)`.
pub fn band_power(psd: &PsdEstimate, low: f64, high: f64) -> Result<f64, DspError> {
    let max = psd.max_frequency() + psd.resolution;
    if !(low >= 0.0 && low < high && high <= max) {
        return Err(DspError::BandOutOfRange { low, high, max });
    }
    let mut sum = 0.0;
    let mut bins = 0usize;
    for (&f, &p) in psd.frequencies.iter().zip(&psd.power) {
        if f >= low && f < high {
            sum += p;
            bins += 1;
        }
    }
    if bins == 0 {
        return Err(DspError::EmptyBand { low, high });
    }
    Ok(sum * psd.resolution)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub total: f64,
    pub relative_theta: f64,
    pub relative_alpha: f64,
    pub relative_beta: f64,
    pub theta_beta_ratio: f64,
    pub theta_alpha_ratio: f64,
}

impl BandPowers {
    /// Field-wise mean. Ratios are averaged per epoch, not recomputed.
    pub fn mean(items: &[BandPowers]) -> Option<BandPowers> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&BandPowers) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(BandPowers {
            theta: avg(|b| b.theta),
            alpha: avg(|b| b.alpha),
            beta: avg(|b| b.beta),
            total: avg(|b| b.total),
            relative_theta: avg(|b| b.relative_theta),
            relative_alpha: avg(|b| b.relative_alpha),
            relative_beta: avg(|b| b.relative_beta),
            theta_beta_ratio: avg(|b| b.theta_beta_ratio),
            theta_alpha_ratio: avg(|b| b.theta_alpha_ratio),
        })
    }
}

/// Theta/alpha/beta/total powers, relatives and ratios. A ratio whose
/// denominator is zero is reported as infinity.
pub fn compute_band_powers(psd: &PsdEstimate) -> Result<BandPowers, DspError> {
    let theta = band_power(psd, THETA_BAND.0, THETA_BAND.1)?;
    let alpha = band_power(psd, ALPHA_BAND.0, ALPHA_BAND.1)?;
    let beta = band_power(psd, BETA_BAND.0, BETA_BAND.1)?;
    let total = band_power(psd, TOTAL_BAND.0, TOTAL_BAND.1)?;
    if total <= 0.0 {
        return Err(DspError::ZeroTotalPower);
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    Ok(BandPowers {
        theta,
        alpha,
        beta,
        total,
        relative_theta: theta / total,
        relative_alpha: alpha / total,
        relative_beta: beta / total,
        theta_beta_ratio: ratio(theta, beta),
        theta_alpha_ratio: ratio(theta, alpha),
    })
}
