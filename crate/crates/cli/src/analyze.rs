//! `analyze`: per-session summaries and the cohort statistics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mbci_core::dsp::resample;
use mbci_core::ingest::read_recording;
use mbci_core::par::Execution;
use mbci_core::session::SessionLog;
use mbci_core::stats::{analyze_cohort, summarize_session, summary_csv, SessionSummary, SubjectSessions, SummaryParams};
use serde::Deserialize;

use crate::{user, write_atomic, CliError, Outcome};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TESTS_FILE: &str = "tests.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    #[value(name = "paired_t")]
    PairedT,
    #[value(name = "rm_anova_state")]
    RmAnovaState,
    #[value(name = "misc_time_anova")]
    MiscTimeAnova,
    #[value(name = "relative_misc")]
    RelativeMisc,
}

impl TestKind {
    fn name(self) -> &'static str {
        match self {
            TestKind::PairedT => "paired_t",
            TestKind::RmAnovaState => "rm_anova_state",
            TestKind::MiscTimeAnova => "misc_time_anova",
            TestKind::RelativeMisc => "relative_misc",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct AnalyzeArgs {
    /// Session directories. Sessions are grouped by the subject id in their manifests.
    pub sessions: Vec<PathBuf>,
    /// Cohort manifest (TOML) listing `[[subject]]` entries with `id` and `sessions`.
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Output directory for the tables.
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
    /// Tests to run; all of them by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub tests: Vec<TestKind>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Resample every recording to this rate (Hz) so mixed-rate sessions can be compared.
    #[arg(long)]
    pub resample: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortFile {
    subject: Vec<CohortSubject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortSubject {
    id: String,
    sessions: Vec<PathBuf>,
}

/// `(subject override, session dir)` pairs from the command line and cohort file.
fn inputs(a: &AnalyzeArgs) -> Result<Vec<(Option<String>, PathBuf)>, CliError> {
    let mut out: Vec<(Option<String>, PathBuf)> = a.sessions.iter().map(|p| (None, p.clone())).collect();
    if let Some(path) = &a.cohort {
        let text = std::fs::read_to_string(path).map_err(|e| user(format!("cohort manifest {}: {e}", path.display())))?;
        let file: CohortFile =
            toml::from_str(&text).map_err(|e| user(format!("cohort manifest {} does not parse: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in file.subject {
            out.extend(s.sessions.into_iter().map(|p| (Some(s.id.clone()), base.join(p))));
        }
    }
    if out.is_empty() {
        return Err(user("no sessions given; pass session directories or --cohort"));
    }
    Ok(out)
}

struct Loaded {
    subject: String,
    dir: PathBuf,
    log: SessionLog,
    rate: f64,
    samples: Vec<f64>,
}

fn load(subject: Option<String>, dir: PathBuf) -> Result<Loaded, CliError> {
    let log = SessionLog::load(&dir).map_err(|e| user(e.to_string()))?;
    let rec = read_recording(&log.eeg_path()).map_err(|e| user(format!("{}: {e}", log.eeg_path().display())))?;
    Ok(Loaded {
        subject: subject.unwrap_or_else(|| log.manifest.subject_id.clone()),
        dir,
        log,
        rate: f64::from(rec.header.sampling_rate),
        samples: rec.samples.iter().map(|&v| f64::from(v)).collect(),
    })
}

fn summarize(l: &Loaded, target_rate: Option<f64>, exec: Execution) -> Result<SessionSummary, CliError> {
    let (samples, rate) = match target_rate {
        Some(r) if r != l.rate => (resample(&l.samples, l.rate, r).map_err(|e| user(e.to_string()))?, r),
        _ => (l.samples.clone(), l.rate),
    };
    let scores: Vec<f64> = l.log.scores().into_iter().map(|(_, s)| s).collect();
    let params = SummaryParams {
        execution: exec,
        ..SummaryParams::default()
    };
    summarize_session(l.log.manifest.mode, &samples, rate, &l.log.misc_responses(), &scores, &params)
        .map_err(|e| user(format!("{}: {e}", l.dir.display())))
}

pub fn analyze(a: AnalyzeArgs, exec: Execution) -> Result<Outcome, CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(user(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if let Some(r) = a.resample {
        if !(r.is_finite() && r > 0.0) {
            return Err(user(format!("--resample must be a positive rate, got {r}")));
        }
    }
    let loaded = inputs(&a)?
        .into_iter()
        .map(|(subject, dir)| load(subject, dir))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rates: Vec<f64> = loaded.iter().map(|l| l.rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    if rates.len() > 1 && a.resample.is_none() {
        let listed: Vec<String> = rates.iter().map(|r| format!("{r} Hz")).collect();
        return Err(user(format!(
            "sessions have different sampling rates ({}); pass --resample <HZ> to compare them",
            listed.join(", ")
        )));
    }

    let mut subjects: BTreeMap<String, (SubjectSessions, BTreeMap<String, PathBuf>)> = BTreeMap::new();
    for l in &loaded {
        let summary = summarize(l, a.resample, exec)?;
        let (entry, seen) = subjects
            .entry(l.subject.clone())
            .or_insert_with(|| (SubjectSessions::new(l.subject.clone()), BTreeMap::new()));
        let mode = l.log.manifest.mode.to_string();
        if let Some(prev) = seen.insert(mode.clone(), l.dir.clone()) {
            return Err(user(format!(
                "subject {} has two {mode} sessions: {} and {}",
                l.subject,
                prev.display(),
                l.dir.display()
            )));
        }
        entry.insert(summary);
    }
    let subjects: Vec<SubjectSessions> = subjects.into_values().map(|(s, _)| s).collect();

    let mut notes = Vec::new();
    let tests_csv = if subjects.len() < 2 {
        notes.push(format!(
            "statistics need sessions from at least two subjects ({} given); {TESTS_FILE} not written",
            subjects.len()
        ));
        None
    } else {
        let mut analysis = analyze_cohort(&subjects, a.alpha);
        if !a.tests.is_empty() {
            let wanted: Vec<&str> = a.tests.iter().map(|t| t.name()).collect();
            analysis.tests.retain(|r| wanted.contains(&r.test.as_str()));
            analysis.skipped.retain(|s| wanted.contains(&s.0.as_str()));
        }
        for (test, what, why) in &analysis.skipped {
            notes.push(format!("skipped {test} {what}: {why}"));
        }
        Some((analysis.tests.len(), analysis.tests_csv()))
    };

    std::fs::create_dir_all(&a.out).map_err(|e| CliError::Internal(format!("creating {}: {e}", a.out.display())))?;
    write_atomic(&a.out.join(SUMMARY_FILE), summary_csv(&subjects).as_bytes())?;
    let mut summary = format!("{} sessions from {} subjects summarized", loaded.len(), subjects.len());
    if let Some((rows, csv)) = tests_csv {
        write_atomic(&a.out.join(TESTS_FILE), csv.as_bytes())?;
        summary.push_str(&format!("; {rows} test rows"));
    }
    for n in notes {
        summary.push_str(&format!("\nnote: {n}"));
    }
    Ok(Outcome {
        summary,
        result: Some(a.out),
    })
}
