use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::par::Execution;

use super::StatsError;

const MIN_SUBJECTS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    /// Two-tailed per-bin threshold for cluster formation.
    pub cluster_p: f64,
    /// Cluster-level significance level.
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            cluster_p: 0.05,
            alpha: 0.05,
            permutations: 1000,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// First and last bin index, inclusive.
    pub start: usize,
    pub end: usize,
    /// +1 when `a > b` across the cluster, -1 otherwise.
    pub sign: i8,
    /// Sum of |t| over the cluster's bins.
    pub mass: f64,
    pub p_value: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn covers(&self, first: usize, last: usize) -> bool {
        self.start <= first && self.end >= last
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub t_values: Vec<f64>,
    pub threshold: f64,
    pub clusters: Vec<Cluster>,
    pub permutations: usize,
    pub alpha: f64,
}

impl ClusterResult {
    pub fn significant(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.p_value < self.alpha)
    }
}

/// Paired t per bin. Zero variance gives t = 0 for a zero mean, otherwise
/// an infinite t of the mean's sign.
fn bin_t(diffs: &[Vec<f64>], signs: Option<&[f64]>, out: &mut [f64]) {
    let n = diffs.len() as f64;
    for (b, t) in out.iter_mut().enumerate() {
        let s = |i: usize| signs.map_or(1.0, |s| s[i]);
        let mean = diffs.iter().enumerate().map(|(i, d)| s(i) * d[b]).sum::<f64>() / n;
        let var = diffs.iter().enumerate().map(|(i, d)| (s(i) * d[b] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        *t = if var > 0.0 {
            mean / (var / n).sqrt()
        } else if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        };
    }
}

/// Runs of same-signed bins with |t| above `threshold`.
fn find_clusters(t: &[f64], threshold: f64) -> Vec<(usize, usize, i8, f64)> {
    let mut out = Vec::new();
    let mut current: Option<(usize, i8, f64)> = None;
    for (i, &v) in t.iter().enumerate() {
        let sign = if v > threshold {
            1
        } else if v < -threshold {
            -1
        } else {
            0
        };
        match current {
            Some((start, s, mass)) if s == sign => current = Some((start, s, mass + v.abs())),
            _ => {
                if let Some((start, s, mass)) = current.take() {
                    out.push((start, i - 1, s, mass));
                }
                if sign != 0 {
                    current = Some((i, sign, v.abs()));
                }
            }
        }
    }
    if let Some((start, s, mass)) = current {
        out.push((start, t.len() - 1, s, mass));
    }
    out
}

/// Cluster-level sign-flip permutation test on paired spectra
/// (`spectra_a[subject][bin]`).
///
/// Subjects are put in a canonical order before sign flips are drawn, so the
/// result does not depend on how subjects are labelled. Each permutation
/// draws from its own seeded stream, so sequential and parallel runs agree.
pub fn cluster_permutation(spectra_a: &[Vec<f64>], spectra_b: &[Vec<f64>], params: &ClusterParams) -> Result<ClusterResult, StatsError> {
    if spectra_a.len() != spectra_b.len() {
        return Err(StatsError::LengthMismatch(spectra_a.len(), spectra_b.len()));
    }
    let n = spectra_a.len();
    if n < MIN_SUBJECTS {
        return Err(StatsError::TooFew { needed: MIN_SUBJECTS, got: n });
    }
    let bins = spectra_a[0].len();
    if bins == 0 || spectra_a.iter().chain(spectra_b).any(|s| s.len() != bins) {
        return Err(StatsError::GridMismatch(format!("expected {bins} bins in every spectrum")));
    }
    if params.permutations == 0 {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    for s in spectra_a.iter().chain(spectra_b) {
        super::check_finite(s)?;
    }

    let mut diffs: Vec<Vec<f64>> = spectra_a
        .iter()
        .zip(spectra_b)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    diffs.sort_by(|x, y| x.iter().zip(y).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));

    let df = (n - 1) as f64;
    let threshold = StudentsT::new(0.0, 1.0, df)
        .expect("df >= 5")
        .inverse_cdf(1.0 - params.cluster_p / 2.0);

    let mut t_values = vec![0.0; bins];
    bin_t(&diffs, None, &mut t_values);
    let observed = find_clusters(&t_values, threshold);

    let null_max: Vec<f64> = params.execution.map_range(0..params.permutations, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(p as u64);
        let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut t = vec![0.0; bins];
        bin_t(&diffs, Some(&signs), &mut t);
        find_clusters(&t, threshold).iter().map(|c| c.3).fold(0.0, f64::max)
    });

    let perms = params.permutations as f64;
    let clusters = observed
        .into_iter()
        .map(|(start, end, sign, mass)| Cluster {
            start,
            end,
            sign,
            mass,
            p_value: null_max.iter().filter(|&&m| m >= mass).count() as f64 / perms,
        })
        .collect();
    Ok(ClusterResult {
        t_values,
        threshold,
        clusters,
        permutations: params.permutations,
        alpha: params.alpha,
    })
}
