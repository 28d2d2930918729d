use statrs::function::beta::beta_reg;

use super::{check_finite, mean, variance, EffectSize, StatsError, TestKind, TestResult};

/// Relief is reported positive: `rs - state`.
pub const RELIEF_SIGN: &str = "rs_minus_state";

/// MISC relief of a mindfulness state relative to rest.
pub fn relative_misc(misc_in_state: f64, misc_in_rs: f64) -> f64 {
    misc_in_rs - misc_in_state
}

/// Two-tailed p-value of a t statistic: `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Paired two-tailed t test of `x - y`.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let sd = variance(&d).sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::ZeroVariance("paired differences"));
    }
    let m = mean(&d);
    let t = m / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult {
        kind: TestKind::PairedT,
        statistic: t,
        df,
        p_value: two_tailed_p(t, df),
        effect_size: Some(m / sd),
        effect_kind: Some(EffectSize::PairedCohensD),
        corrected_p: None,
    })
}

/// Welch's unequal-variance t test from summary statistics (sample sd).
pub fn welch_t_from_summary(n1: usize, m1: f64, sd1: f64, n2: usize, m2: f64, sd2: f64) -> Result<TestResult, StatsError> {
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n1.min(n2) });
    }
    check_finite(&[m1, sd1, m2, sd2])?;
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let (v1, v2) = (sd1 * sd1 / n1f, sd2 * sd2 / n2f);
    if !(v1 + v2 > 0.0) {
        return Err(StatsError::ZeroVariance("both groups"));
    }
    let t = (m1 - m2) / (v1 + v2).sqrt();
    let df = (v1 + v2).powi(2) / (v1 * v1 / (n1f - 1.0) + v2 * v2 / (n2f - 1.0));
    let pooled = (((n1f - 1.0) * sd1 * sd1 + (n2f - 1.0) * sd2 * sd2) / (n1f + n2f - 2.0)).sqrt();
    Ok(TestResult {
        kind: TestKind::WelchT,
        statistic: t,
        df,
        p_value: two_tailed_p(t, df),
        effect_size: Some((m1 - m2) / pooled),
        effect_kind: Some(EffectSize::PooledCohensD),
        corrected_p: None,
    })
}

pub fn welch_t(group1: &[f64], group2: &[f64]) -> Result<TestResult, StatsError> {
    if group1.len() < 2 || group2.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: group1.len().min(group2.len()),
        });
    }
    check_finite(group1)?;
    check_finite(group2)?;
    welch_t_from_summary(
        group1.len(),
        mean(group1),
        variance(group1).sqrt(),
        group2.len(),
        mean(group2),
        variance(group2).sqrt(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Pearson correlation with the two-tailed p from `t = r sqrt((n-2)/(1-r^2))`.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(StatsError::ZeroVariance("correlation input"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let n = x.len();
    let df = n as f64 - 2.0;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        two_tailed_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation { r, p_value, n })
}
