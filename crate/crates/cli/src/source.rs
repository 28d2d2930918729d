//! Source flags shared by `run`, `bench` and `synth`.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, ValueEnum};
use mbci_core::ingest::{
    synth_generate, write_recording, RecordingHeader, SourceSpec, StreamConfig, SynthControl, DEFAULT_SAMPLING_RATE,
};

use crate::{user, CliError, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceKindArg {
    Synth,
    Replay,
    Device,
}

#[derive(Clone, Debug, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum, default_value = "synth")]
    pub source: SourceKindArg,
    /// Recording to replay (`--source replay`).
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// `host:port` of the device stream (`--source device`).
    #[arg(long)]
    pub address: Option<String>,
    /// Sampling rate in Hz; replayed recordings use their own.
    #[arg(long, default_value_t = DEFAULT_SAMPLING_RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Length such as `120s`, `5m` or `1h 30m`.
    #[arg(long, value_parser = parse_duration)]
    pub duration: Option<Duration>,
    /// Mindfulness level of the synthetic generator, 0 to 1.
    #[arg(long, default_value_t = 0.5)]
    pub latent: f64,
}

pub fn parse_duration(s: &str) -> Result<Duration, String> {
    humantime::parse_duration(s.trim()).map_err(|e| e.to_string())
}

/// Positive duration in seconds, or a user error naming the flag.
pub(crate) fn positive_seconds(d: Duration) -> Result<f64, CliError> {
    let s = d.as_secs_f64();
    if s <= 0.0 {
        return Err(user("--duration must be greater than zero"));
    }
    Ok(s)
}

impl SourceArgs {
    /// Stream configuration; synthetic sources run for `default_seconds`
    /// unless `--duration` says otherwise.
    pub fn stream(&self, default_seconds: f64) -> Result<StreamConfig, CliError> {
        let duration = self.duration.map(positive_seconds).transpose()?;
        if !(0.0..=1.0).contains(&self.latent) {
            return Err(user(format!("--latent must lie in [0, 1], got {}", self.latent)));
        }
        let spec = match self.source {
            SourceKindArg::Synth => SourceSpec::Synthetic {
                control: SynthControl::with_latent(self.latent),
                duration_seconds: duration.unwrap_or(default_seconds),
                seed: self.seed,
            },
            SourceKindArg::Replay => SourceSpec::Replay {
                path: self.path.clone().ok_or_else(|| user("--source replay needs --path"))?,
            },
            SourceKindArg::Device => SourceSpec::Device {
                address: self.address.clone().ok_or_else(|| user("--source device needs --address"))?,
            },
        };
        let cfg = StreamConfig::new(spec).with_rate(self.rate);
        cfg.validate().map_err(|e| user(e.to_string()))?;
        Ok(cfg)
    }

    pub fn duration_seconds(&self) -> Result<Option<f64>, CliError> {
        self.duration.map(positive_seconds).transpose()
    }
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    /// Output recording file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_duration)]
    pub duration: Duration,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub latent: f64,
}

pub fn synth(a: SynthArgs) -> Result<Outcome, CliError> {
    let seconds = positive_seconds(a.duration)?;
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(user(format!("--rate must be positive, got {}", a.rate)));
    }
    if !(0.0..=1.0).contains(&a.latent) {
        return Err(user(format!("--latent must lie in [0, 1], got {}", a.latent)));
    }
    let samples: Vec<f32> = synth_generate(&SynthControl::with_latent(a.latent), seconds, a.rate, a.seed)
        .iter()
        .map(|s| s.value as f32)
        .collect();
    let tmp = a.out.with_extension("partial");
    write_recording(&tmp, &RecordingHeader::new(a.rate, "Fp1"), &samples)
        .map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            CliError::Internal(format!("writing {}: {e}", tmp.display()))
        })?;
    std::fs::rename(&tmp, &a.out).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::Internal(format!("writing {}: {e}", a.out.display()))
    })?;
    Ok(Outcome {
        summary: format!("{} samples at {} Hz ({seconds} s, latent {})", samples.len(), a.rate, a.latent),
        result: Some(a.out),
    })
}
