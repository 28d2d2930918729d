//! Cohort-level tests over per-session summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::feedback::SessionMode;

use super::anova::{rm_anova, rm_anova_oneway, RmTable};
use super::fdr::bh_fdr;
use super::summary::SessionSummary;
use super::ttest::{paired_t, relative_misc};

/// Per-session quantity compared across states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Misc,
    Theta,
    Alpha,
    Beta,
    Total,
    RelativeTheta,
    RelativeAlpha,
    RelativeBeta,
    ThetaBetaRatio,
    ThetaAlphaRatio,
    Score,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Misc,
        Metric::Theta,
        Metric::Alpha,
        Metric::Beta,
        Metric::Total,
        Metric::RelativeTheta,
        Metric::RelativeAlpha,
        Metric::RelativeBeta,
        Metric::ThetaBetaRatio,
        Metric::ThetaAlphaRatio,
        Metric::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Misc => "misc",
            Metric::Theta => "theta",
            Metric::Alpha => "alpha",
            Metric::Beta => "beta",
            Metric::Total => "total",
            Metric::RelativeTheta => "relative_theta",
            Metric::RelativeAlpha => "relative_alpha",
            Metric::RelativeBeta => "relative_beta",
            Metric::ThetaBetaRatio => "theta_beta_ratio",
            Metric::ThetaAlphaRatio => "theta_alpha_ratio",
            Metric::Score => "score",
        }
    }

    pub fn of(self, s: &SessionSummary) -> Option<f64> {
        let bp = s.band_powers.filter(|_| s.usable);
        let v = match self {
            Metric::Misc => s.mean_misc,
            Metric::Score => s.mean_score,
            Metric::Theta => bp.map(|b| b.theta),
            Metric::Alpha => bp.map(|b| b.alpha),
            Metric::Beta => bp.map(|b| b.beta),
            Metric::Total => bp.map(|b| b.total),
            Metric::RelativeTheta => bp.map(|b| b.relative_theta),
            Metric::RelativeAlpha => bp.map(|b| b.relative_alpha),
            Metric::RelativeBeta => bp.map(|b| b.relative_beta),
            Metric::ThetaBetaRatio => bp.map(|b| b.theta_beta_ratio),
            Metric::ThetaAlphaRatio => bp.map(|b| b.theta_alpha_ratio),
        };
        v.filter(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectSessions {
    pub subject: String,
    pub sessions: BTreeMap<String, SessionSummary>,
}

impl SubjectSessions {
    pub fn new(subject: impl Into<String>) -> Self {
        SubjectSessions {
            subject: subject.into(),
            sessions: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, summary: SessionSummary) {
        self.sessions.insert(summary.state.as_str().to_string(), summary);
    }

    pub fn get(&self, mode: SessionMode) -> Option<&SessionSummary> {
        self.sessions.get(mode.as_str())
    }
}

/// One row of the tests table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    /// `paired_t`, `rm_anova_state`, or `misc_time_anova`.
    pub test: String,
    pub metric: String,
    /// `RMS-RS` style for paired tests, the effect name for ANOVAs.
    pub comparison: String,
    pub n: usize,
    pub statistic: f64,
    pub df: f64,
    pub df_error: Option<f64>,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub corrected_p: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortAnalysis {
    pub tests: Vec<TestRow>,
    /// Tests that could not be run, with the reason.
    pub skipped: Vec<(String, String, String)>,
}

const COMPARISONS: [(SessionMode, SessionMode); 3] =
    [(SessionMode::Rms, SessionMode::Rs), (SessionMode::Rms, SessionMode::Pms), (SessionMode::Pms, SessionMode::Rs)];
const STATES: [SessionMode; 3] = [SessionMode::Rms, SessionMode::Pms, SessionMode::Rs];
const MISC_MINUTES: [u32; 10] = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90];

/// Paired tests for every metric and state pair (BH-corrected within each
/// metric), one-way repeated-measures ANOVA on state per metric, the
/// state x time ANOVA on MISC answers at ten-minute marks, and MISC relief
/// relative to rest.
pub fn analyze_cohort(subjects: &[SubjectSessions], alpha: f64) -> CohortAnalysis {
    let mut out = CohortAnalysis::default();
    for metric in Metric::ALL {
        let mut family = Vec::new();
        for (x, y) in COMPARISONS {
            let label = format!("{x}-{y}");
            let pairs: Vec<(f64, f64)> = subjects
                .iter()
                .filter_map(|s| Some((metric.of(s.get(x)?)?, metric.of(s.get(y)?)?)))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            match paired_t(&xs, &ys) {
                Ok(r) => family.push(TestRow {
                    test: "paired_t".into(),
                    metric: metric.name().into(),
                    comparison: label,
                    n: xs.len(),
                    statistic: r.statistic,
                    df: r.df,
                    df_error: None,
                    p_value: r.p_value,
                    effect_size: r.effect_size,
                    corrected_p: None,
                    note: "cohens_d=mean(diff)/sd(diff)".into(),
                }),
                Err(e) => out.skipped.push(("paired_t".into(), format!("{}:{label}", metric.name()), e.to_string())),
            }
        }
        let ps: Vec<f64> = family.iter().map(|r| r.p_value).collect();
        if let Ok(bh) = bh_fdr(&ps, alpha) {
            for (row, p) in family.iter_mut().zip(bh.adjusted) {
                row.corrected_p = Some(p);
                row.note.push_str(";bh_fdr");
            }
        }
        out.tests.extend(family);

        let rows: Vec<Vec<f64>> = subjects
            .iter()
            .filter_map(|s| STATES.iter().map(|&m| metric.of(s.get(m)?)).collect::<Option<Vec<f64>>>())
            .collect();
        match rm_anova_oneway(&rows) {
            Ok(e) => out.tests.push(TestRow {
                test: "rm_anova_state".into(),
                metric: metric.name().into(),
                comparison: "state".into(),
                n: rows.len(),
                statistic: e.f,
                df: e.df_effect,
                df_error: Some(e.df_error),
                p_value: e.p_value,
                effect_size: None,
                corrected_p: None,
                note: anova_note(e.gg_epsilon, e.degenerate.is_some()),
            }),
            Err(e) => out.skipped.push(("rm_anova_state".into(), metric.name().into(), e.to_string())),
        }
    }

    misc_time_anova(subjects, &mut out);

    for (state, label) in [(SessionMode::Rms, "RMS"), (SessionMode::Pms, "PMS")] {
        let relief: Vec<f64> = subjects
            .iter()
            .filter_map(|s| Some(relative_misc(s.get(state)?.mean_misc?, s.get(SessionMode::Rs)?.mean_misc?)))
            .collect();
        if relief.is_empty() {
            continue;
        }
        let n = relief.len() as f64;
        let mean = relief.iter().sum::<f64>() / n;
        out.tests.push(TestRow {
            test: "relative_misc".into(),
            metric: "misc".into(),
            comparison: format!("RS-{label}"),
            n: relief.len(),
            statistic: mean,
            df: n - 1.0,
            df_error: None,
            p_value: f64::NAN,
            effect_size: None,
            corrected_p: None,
            note: format!("mean relief, sign {}", super::RELIEF_SIGN),
        });
    }
    out
}

fn anova_note(gg: Option<f64>, degenerate: bool) -> String {
    let mut s = match gg {
        Some(e) => format!("uncorrected df; gg_epsilon={e:.4}"),
        None => "uncorrected df".to_string(),
    };
    if degenerate {
        s.push_str("; degenerate error term");
    }
    s
}

fn misc_time_anova(subjects: &[SubjectSessions], out: &mut CohortAnalysis) {
    let answer_at = |s: &SessionSummary, minute: u32| {
        s.misc
            .iter()
            .find(|m| (m.prompt_time - f64::from(minute)).abs() < 1e-9)
            .map(|m| f64::from(m.value))
    };
    let complete: Vec<Vec<f64>> = subjects
        .iter()
        .filter_map(|s| {
            let mut v = Vec::new();
            for m in STATES {
                let summary = s.get(m)?;
                for minute in MISC_MINUTES {
                    v.push(answer_at(summary, minute)?);
                }
            }
            Some(v)
        })
        .collect();
    let n = complete.len();
    let table = RmTable::new(n, STATES.len(), MISC_MINUTES.len(), complete.concat());
    match table.and_then(|t| rm_anova(&t)) {
        Ok(a) => {
            for e in [a.state, a.time, a.interaction] {
                out.tests.push(TestRow {
                    test: "misc_time_anova".into(),
                    metric: "misc".into(),
                    comparison: e.name.clone(),
                    n,
                    statistic: e.f,
                    df: e.df_effect,
                    df_error: Some(e.df_error),
                    p_value: e.p_value,
                    effect_size: None,
                    corrected_p: None,
                    note: anova_note(e.gg_epsilon, e.degenerate.is_some()),
                });
            }
        }
        Err(e) => out.skipped.push(("misc_time_anova".into(), "misc".into(), e.to_string())),
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn render(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv of utf-8 fields")
}

impl CohortAnalysis {
    pub fn tests_csv(&self) -> String {
        let header = ["test", "metric", "comparison", "n", "statistic", "df", "df_error", "p", "effect", "corrected_p", "note"]
            .map(String::from);
        render(
            &header,
            self.tests.iter().map(|r| {
                vec![
                    r.test.clone(),
                    r.metric.clone(),
                    r.comparison.clone(),
                    r.n.to_string(),
                    num(r.statistic),
                    num(r.df),
                    opt(r.df_error),
                    num(r.p_value),
                    opt(r.effect_size),
                    opt(r.corrected_p),
                    r.note.clone(),
                ]
            }),
        )
    }
}

/// One row per subject and session with the summary metrics.
pub fn summary_csv(subjects: &[SubjectSessions]) -> String {
    let mut header: Vec<String> = ["subject", "state", "usable", "epochs_total", "epochs_accepted"].map(String::from).into();
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    let rows = subjects.iter().flat_map(|subj| {
        subj.sessions.values().map(|summary| {
            let mut row = vec![
                subj.subject.clone(),
                summary.state.to_string(),
                summary.usable.to_string(),
                summary.epochs_total.to_string(),
                summary.epochs_accepted.to_string(),
            ];
            row.extend(Metric::ALL.iter().map(|m| opt(m.of(summary))));
            row
        })
    });
    render(&header, rows)
}
