use serde::{Deserialize, Serialize};

use crate::dsp::{
    apply_filter, compute_band_powers, design_bandpass, reject_artifacts, split_epochs, welch_psd, ArtifactThresholds,
    BandPowers, DspError, Phase, RejectReason, Verdict, WelchParams, DEFAULT_ORDER,
};
use crate::feedback::{MiscResponse, SessionMode};
use crate::par::Execution;

/// Frequencies (Hz) of the per-session spectrum used for cluster tests.
pub const SPECTRUM_HZ: std::ops::RangeInclusive<usize> = 1..=40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryParams {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    pub epoch_seconds: f64,
    pub thresholds: ArtifactThresholds,
    pub welch: WelchParams,
    pub execution: Execution,
}

impl Default for SummaryParams {
    fn default() -> Self {
        SummaryParams {
            band_low_hz: 1.0,
            band_high_hz: 45.0,
            filter_order: DEFAULT_ORDER,
            epoch_seconds: 60.0,
            thresholds: ArtifactThresholds::default(),
            welch: WelchParams::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub state: SessionMode,
    /// Mean of the MISC answers, if any were given.
    pub mean_misc: Option<f64>,
    /// The answers themselves, for time-resolved analysis.
    #[serde(default)]
    pub misc: Vec<MiscResponse>,
    /// Mean over accepted epochs.
    pub band_powers: Option<BandPowers>,
    /// Per accepted epoch, in time order.
    #[serde(default)]
    pub epoch_band_powers: Vec<BandPowers>,
    /// Mean 1 Hz-resolution PSD over accepted epochs at [`SPECTRUM_HZ`].
    pub spectrum: Option<Vec<f64>>,
    pub mean_score: Option<f64>,
    pub epochs_total: usize,
    pub epochs_accepted: usize,
    pub epochs_over_amplitude: usize,
    pub epochs_under_amplitude: usize,
    /// False when no epoch survived rejection.
    pub usable: bool,
}

/// Offline pipeline for one session: zero-phase 1-45 Hz band-pass, 60 s
/// epochs, peak-amplitude rejection, Welch PSD and band powers per accepted
/// epoch, then means. Epoch spectra are computed in parallel.
pub fn summarize_session(
    state: SessionMode,
    samples: &[f64],
    sampling_rate: f64,
    misc: &[MiscResponse],
    scores: &[f64],
    params: &SummaryParams,
) -> Result<SessionSummary, DspError> {
    let filter = design_bandpass(params.band_low_hz, params.band_high_hz, params.filter_order, sampling_rate)?;
    let filtered = if samples.is_empty() {
        Vec::new()
    } else {
        apply_filter(&filter, samples, Phase::ZeroPhase)?
    };
    let mut epochs = split_epochs(&filtered, sampling_rate, params.epoch_seconds);
    for e in &mut epochs {
        e.verdict = reject_artifacts(e, &params.thresholds);
    }
    let accepted: Vec<&[f64]> = epochs.iter().filter(|e| e.verdict.is_accepted()).map(|e| e.samples.as_slice()).collect();
    let count = |r: RejectReason| epochs.iter().filter(|e| e.verdict == Verdict::Rejected(r)).count();

    let per_epoch = params
        .execution
        .map_slice(&accepted, |x| -> Result<(BandPowers, Vec<f64>), DspError> {
            let bands = compute_band_powers(&welch_psd(x, sampling_rate, params.welch)?)?;
            let fine = welch_psd(x, sampling_rate, WelchParams::one_hz())?;
            let spectrum = SPECTRUM_HZ.map(|hz| fine.power[(hz as f64 / fine.resolution).round() as usize]).collect();
            Ok((bands, spectrum))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let powers: Vec<BandPowers> = per_epoch.iter().map(|p| p.0).collect();
    let spectrum = (!per_epoch.is_empty()).then(|| {
        let bins = SPECTRUM_HZ.count();
        (0..bins)
            .map(|b| per_epoch.iter().map(|p| p.1[b]).sum::<f64>() / per_epoch.len() as f64)
            .collect()
    });
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let misc_values: Vec<f64> = misc.iter().map(|m| f64::from(m.value)).collect();

    Ok(SessionSummary {
        state,
        mean_misc: mean(&misc_values),
        misc: misc.to_vec(),
        band_powers: BandPowers::mean(&powers),
        epoch_band_powers: powers,
        spectrum,
        mean_score: mean(scores),
        epochs_total: epochs.len(),
        epochs_accepted: accepted.len(),
        epochs_over_amplitude: count(RejectReason::OverAmplitude),
        epochs_under_amplitude: count(RejectReason::UnderAmplitude),
        usable: !accepted.is_empty(),
    })
}
