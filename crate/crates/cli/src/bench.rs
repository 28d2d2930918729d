//! `bench`: per-stage scoring latency over a source, without pacing.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use mbci_core::ingest::{open_source, WindowStream};
use mbci_core::model::{Architecture, LatencyReport, ModelWeights, Network, Percentiles, ScoringPipeline};
use mbci_core::par::Execution;

use crate::source::SourceArgs;
use crate::{user, write_atomic, CliError, Outcome};

const DEFAULT_BENCH_SECONDS: f64 = 300.0;

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Weight container; randomly initialized weights (seed 0) if omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn row(name: &str, p: &Percentiles) -> String {
    format!("{name:<12} {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n", p.p50_ms, p.p95_ms, p.p99_ms, p.max_ms)
}

pub fn bench(a: BenchArgs, exec: Execution) -> Result<Outcome, CliError> {
    let cfg = a.source.stream(DEFAULT_BENCH_SECONDS)?;
    let weights = match &a.weights {
        Some(dir) => ModelWeights::load(dir).map_err(|e| user(format!("{}: {e}", dir.display())))?,
        None => ModelWeights::init_random(Architecture::default(), 0).map_err(|e| CliError::Internal(e.to_string()))?,
    };
    let hop_seconds = cfg.hop_len() as f64 / cfg.sampling_rate;
    let pipeline = ScoringPipeline::new(
        Arc::new(Network::new(&weights)),
        cfg.sampling_rate,
        cfg.window_len(),
        hop_seconds,
        exec,
    )
    .map_err(|e| user(e.to_string()))?;
    let source = open_source(&cfg).map_err(|e| user(e.to_string()))?;
    let windows = WindowStream::new(source, &cfg).map_err(|e| user(e.to_string()))?;

    let mut report = LatencyReport::default();
    for w in windows {
        let w = w.map_err(|e| user(e.to_string()))?;
        let event = pipeline.process(&w).map_err(|e| CliError::Internal(e.to_string()))?;
        report.record(&event);
    }
    if report.windows() == 0 {
        return Err(user("the source ended before the first full window"));
    }
    let s = report.summary();
    let mut text = format!(
        "{} windows, {} gaps, {} deadline misses (hop deadline {:.0} ms, {:?} execution)\n\n{:<12} {:>8} {:>8} {:>8} {:>8}\n",
        s.windows,
        s.gaps,
        s.deadline_misses,
        hop_seconds * 1e3,
        exec,
        "stage",
        "p50_ms",
        "p95_ms",
        "p99_ms",
        "max_ms"
    );
    text.push_str(&row("filter_bank", &s.filter_bank));
    text.push_str(&row("envelope", &s.envelope));
    text.push_str(&row("cnn", &s.cnn));
    text.push_str(&row("total", &s.total));
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&s).map_err(|e| CliError::Internal(e.to_string()))?;
        write_atomic(path, json.as_bytes())?;
    }
    Ok(Outcome {
        summary: text,
        result: a.json,
    })
}
