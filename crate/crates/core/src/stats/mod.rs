//! Offline statistics: t tests, correlation, BH-FDR, repeated-measures ANOVA,
//! cluster permutation over spectra, and per-session summaries.

mod anova;
mod cluster;
mod cohort;
mod fdr;
mod summary;
mod ttest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anova::{rm_anova, rm_anova_oneway, AnovaEffect, Degeneracy, RmAnova, RmTable};
pub use cluster::{cluster_permutation, Cluster, ClusterParams, ClusterResult};
pub use cohort::{analyze_cohort, summary_csv, CohortAnalysis, Metric, SubjectSessions, TestRow};
pub use fdr::{bh_fdr, BhResult};
pub use summary::{summarize_session, SessionSummary, SummaryParams, SPECTRUM_HZ};
pub use ttest::{paired_t, pearson_r, relative_misc, two_tailed_p, welch_t, welch_t_from_summary, Correlation, RELIEF_SIGN};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("paired inputs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("non-finite input value")]
    NonFinite,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("unbalanced table: {0}")]
    Unbalanced(String),
    #[error("spectra bin grids do not match: {0}")]
    GridMismatch(String),
    #[error("missing state {0}")]
    MissingState(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
    WelchT,
    RmAnova,
}

/// How `effect_size` was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    /// `mean(diff) / sd(diff)`, equal to `t / sqrt(n)`.
    PairedCohensD,
    /// Mean difference over the pooled standard deviation.
    PooledCohensD,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub effect_kind: Option<EffectSize>,
    /// BH-adjusted p-value once a family has been corrected.
    pub corrected_p: Option<f64>,
}

impl TestResult {
    pub fn corrected(mut self, p: f64) -> Self {
        self.corrected_p = Some(p);
        self
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
