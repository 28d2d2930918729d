use super::StatsError;

#[derive(Clone, Debug, PartialEq)]
pub struct BhResult {
    /// Per input position.
    pub rejected: Vec<bool>,
    /// BH-adjusted p-values, per input position.
    pub adjusted: Vec<f64>,
}

impl BhResult {
    pub fn rejected_count(&self) -> usize {
        self.rejected.iter().filter(|r| **r).count()
    }
}

/// Benjamini-Hochberg step-up: reject the `k` smallest p-values for the
/// largest `k` with `p_(k) <= k alpha / m`. Adjusted values are
/// `min_{j >= i} m p_(j) / j`, capped at 1.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<BhResult, StatsError> {
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::InvalidP(bad));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let cutoff = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= k as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut rejected = vec![false; m];
    for &i in &order[..cutoff] {
        rejected[i] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (1..=m).rev() {
        let i = order[rank - 1];
        running = running.min(p_values[i] * m as f64 / rank as f64);
        adjusted[i] = running;
    }
    Ok(BhResult { rejected, adjusted })
}
