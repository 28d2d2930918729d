use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::{StatsError, TestKind, TestResult};

/// Balanced subject x state x time table.
#[derive(Clone, Debug, PartialEq)]
pub struct RmTable {
    subjects: usize,
    states: usize,
    times: usize,
    data: Vec<f64>,
}

impl RmTable {
    /// `data` is indexed `[subject][state][time]`.
    pub fn new(subjects: usize, states: usize, times: usize, data: Vec<f64>) -> Result<Self, StatsError> {
        if data.len() != subjects * states * times {
            return Err(StatsError::Unbalanced(format!(
                "{} values for {subjects} x {states} x {times} cells",
                data.len()
            )));
        }
        if subjects < 2 {
            return Err(StatsError::TooFew { needed: 2, got: subjects });
        }
        if states < 1 || times < 1 {
            return Err(StatsError::Unbalanced("empty factor".into()));
        }
        super::check_finite(&data)?;
        Ok(RmTable {
            subjects,
            states,
            times,
            data,
        })
    }

    /// Builds a table from `(subject, state, time, value)` cells, rejecting
    /// missing or repeated cells.
    pub fn from_cells(subjects: usize, states: usize, times: usize, cells: &[(usize, usize, usize, f64)]) -> Result<Self, StatsError> {
        let mut data = vec![None; subjects * states * times];
        for &(i, j, k, v) in cells {
            if i >= subjects || j >= states || k >= times {
                return Err(StatsError::Unbalanced(format!("cell ({i}, {j}, {k}) out of range")));
            }
            let slot = &mut data[(i * states + j) * times + k];
            if slot.replace(v).is_some() {
                return Err(StatsError::Unbalanced(format!("cell ({i}, {j}, {k}) given twice")));
            }
        }
        let data = data
            .into_iter()
            .enumerate()
            .map(|(idx, v)| {
                v.ok_or_else(|| {
                    let (i, rest) = (idx / (states * times), idx % (states * times));
                    StatsError::Unbalanced(format!("missing cell subject {i} state {} time {}", rest / times, rest % times))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(subjects, states, times, data)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.subjects, self.states, self.times)
    }

    pub fn get(&self, subject: usize, state: usize, time: usize) -> f64 {
        self.data[(subject * self.states + state) * self.times + time]
    }
}

/// Why an F statistic was set by a guard rather than computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// Effect and error sums of squares are both zero; F is reported as 0.
    NoVariance,
    /// The error term is zero but the effect is not; F is infinite.
    ZeroError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub name: String,
    pub ss_effect: f64,
    pub ss_error: f64,
    pub df_effect: f64,
    pub df_error: f64,
    pub f: f64,
    pub p_value: f64,
    pub degenerate: Option<Degeneracy>,
    /// Greenhouse-Geisser sphericity estimate; supplementary, the reported
    /// df are uncorrected.
    pub gg_epsilon: Option<f64>,
}

impl AnovaEffect {
    fn new(name: &str, ss_effect: f64, ss_error: f64, df_effect: f64, df_error: f64, ss_total: f64, gg: Option<f64>) -> Self {
        let tol = 1e-12 * ss_total.max(f64::MIN_POSITIVE);
        let (f, degenerate) = if ss_error <= tol {
            if ss_effect <= tol {
                (0.0, Some(Degeneracy::NoVariance))
            } else {
                (f64::INFINITY, Some(Degeneracy::ZeroError))
            }
        } else {
            ((ss_effect / df_effect) / (ss_error / df_error), None)
        };
        AnovaEffect {
            name: name.to_string(),
            ss_effect,
            ss_error,
            df_effect,
            df_error,
            f,
            p_value: f_p_value(f, df_effect, df_error),
            degenerate,
            gg_epsilon: gg,
        }
    }

    pub fn to_test_result(&self) -> TestResult {
        TestResult {
            kind: TestKind::RmAnova,
            statistic: self.f,
            df: self.df_effect,
            p_value: self.p_value,
            effect_size: None,
            effect_kind: None,
            corrected_p: None,
        }
    }
}

/// Upper-tail probability of an F statistic.
fn f_p_value(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if !(f > 0.0) {
        return 1.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmAnova {
    pub state: AnovaEffect,
    pub time: AnovaEffect,
    pub interaction: AnovaEffect,
}

/// Orthonormal Helmert contrasts, `(k - 1) x k`.
fn helmert(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k - 1, k, |r, j| {
        let r1 = (r + 1) as f64;
        let norm = (r1 * (r1 + 1.0)).sqrt();
        match j.cmp(&(r + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -r1 / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// Greenhouse-Geisser epsilon from per-subject level vectors (rows) and an
/// orthonormal contrast basis.
fn gg_epsilon(levels: &DMatrix<f64>, contrasts: &DMatrix<f64>) -> Option<f64> {
    let p = contrasts.nrows();
    if p == 0 || levels.nrows() < 2 {
        return None;
    }
    let n = levels.nrows() as f64;
    let means = levels.row_mean();
    let centred = DMatrix::from_fn(levels.nrows(), levels.ncols(), |i, j| levels[(i, j)] - means[j]);
    let cov = centred.transpose() * &centred / (n - 1.0);
    let m = contrasts * cov * contrasts.transpose();
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    (tr2 > 0.0).then(|| (tr * tr / (p as f64 * tr2)).clamp(1.0 / p as f64, 1.0))
}

/// Kronecker product of two matrices.
fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |r, c| {
        a[(r / b.nrows(), c / b.ncols())] * b[(r % b.nrows(), c % b.ncols())]
    })
}

/// Two-way fully within-subjects ANOVA with subject-by-effect error terms.
pub fn rm_anova(table: &RmTable) -> Result<RmAnova, StatsError> {
    let (n, a, b) = table.shape();
    if a < 2 || b < 2 {
        return Err(StatsError::TooFew { needed: 2, got: a.min(b) });
    }
    let (nf, af, bf) = (n as f64, a as f64, b as f64);
    let y = |i, j, k| table.get(i, j, k);

    let grand = table.data.iter().sum::<f64>() / (nf * af * bf);
    let subj: Vec<f64> = (0..n).map(|i| (0..a).flat_map(|j| (0..b).map(move |k| (j, k))).map(|(j, k)| y(i, j, k)).sum::<f64>() / (af * bf)).collect();
    let sa: Vec<f64> = (0..a).map(|j| (0..n).flat_map(|i| (0..b).map(move |k| (i, k))).map(|(i, k)| y(i, j, k)).sum::<f64>() / (nf * bf)).collect();
    let tb: Vec<f64> = (0..b).map(|k| (0..n).flat_map(|i| (0..a).map(move |j| (i, j))).map(|(i, j)| y(i, j, k)).sum::<f64>() / (nf * af)).collect();
    let ab = |j: usize, k: usize| (0..n).map(|i| y(i, j, k)).sum::<f64>() / nf;
    let as_ = |i: usize, j: usize| (0..b).map(|k| y(i, j, k)).sum::<f64>() / bf;
    let bs = |i: usize, k: usize| (0..a).map(|j| y(i, j, k)).sum::<f64>() / af;

    let ss_total: f64 = table.data.iter().map(|v| (v - grand).powi(2)).sum();
    let ss_a = nf * bf * sa.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = nf * af * tb.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for j in 0..a {
        for k in 0..b {
            ss_ab += nf * (ab(j, k) - sa[j] - tb[k] + grand).powi(2);
        }
    }
    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    for i in 0..n {
        for j in 0..a {
            ss_as += bf * (as_(i, j) - sa[j] - subj[i] + grand).powi(2);
        }
        for k in 0..b {
            ss_bs += af * (bs(i, k) - tb[k] - subj[i] + grand).powi(2);
        }
        for j in 0..a {
            for k in 0..b {
                let r = y(i, j, k) - ab(j, k) - as_(i, j) - bs(i, k) + sa[j] + tb[k] + subj[i] - grand;
                ss_abs += r * r;
            }
        }
    }

    let (ca, cb) = (helmert(a), helmert(b));
    let levels_a = DMatrix::from_fn(n, a, as_);
    let levels_b = DMatrix::from_fn(n, b, bs);
    let levels_ab = DMatrix::from_fn(n, a * b, |i, c| y(i, c / b, c % b));

    Ok(RmAnova {
        state: AnovaEffect::new("state", ss_a, ss_as, af - 1.0, (af - 1.0) * (nf - 1.0), ss_total, gg_epsilon(&levels_a, &ca)),
        time: AnovaEffect::new("time", ss_b, ss_bs, bf - 1.0, (bf - 1.0) * (nf - 1.0), ss_total, gg_epsilon(&levels_b, &cb)),
        interaction: AnovaEffect::new(
            "state:time",
            ss_ab,
            ss_abs,
            (af - 1.0) * (bf - 1.0),
            (af - 1.0) * (bf - 1.0) * (nf - 1.0),
            ss_total,
            gg_epsilon(&levels_ab, &kron(&ca, &cb)),
        ),
    })
}

/// One-way repeated-measures ANOVA over `rows[subject][state]`.
pub fn rm_anova_oneway(rows: &[Vec<f64>]) -> Result<AnovaEffect, StatsError> {
    let n = rows.len();
    let a = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != a) {
        return Err(StatsError::Unbalanced("ragged subject rows".into()));
    }
    if a < 2 {
        return Err(StatsError::TooFew { needed: 2, got: a });
    }
    let table = RmTable::new(n, a, 1, rows.concat())?;
    let (nf, af) = (n as f64, a as f64);
    let grand = table.data.iter().sum::<f64>() / (nf * af);
    let ss_total: f64 = table.data.iter().map(|v| (v - grand).powi(2)).sum();
    let state_means: Vec<f64> = (0..a).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let subj_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / af).collect();
    let ss_a = nf * state_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_as = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            ss_as += (v - state_means[j] - subj_means[i] + grand).powi(2);
        }
    }
    let levels = DMatrix::from_fn(n, a, |i, j| rows[i][j]);
    Ok(AnovaEffect::new("state", ss_a, ss_as, af - 1.0, (af - 1.0) * (nf - 1.0), ss_total, gg_epsilon(&levels, &helmert(a))))
}
