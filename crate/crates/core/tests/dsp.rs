mod support;

use std::f64::consts::PI;

use mbci_core::dsp::*;
use mbci_core::par::Execution;
use proptest::prelude::*;
use support::*;

const RATE: f64 = 250.0;

#[test]
fn wide_offline_bandpass_response() {
    let f = design_bandpass(1.0, 45.0, 4, RATE).unwrap();
    assert!(f.is_stable());
    assert!(f.gain_db(20.0).abs() <= 1.0);
    assert!(f.gain_db(90.0) <= -20.0);
    // time-domain check of the same two points
    let x = sine(20 * 250, RATE, 90.0, 1.0);
    let y = apply_filter(&f, &x, Phase::Causal).unwrap();
    assert!(fit_amplitude(&y[2500..], RATE, 90.0) <= 0.1);
}

#[test]
fn first_bank_band_passes_its_centre() {
    let f = design_bandpass(0.1, 2.1, 4, RATE).unwrap();
    assert!(f.is_stable());
    let peak = (0..2000)
        .map(|i| f.gain_db(0.01 + i as f64 * 0.005))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(peak - f.gain_db(1.1) <= 3.0);
}

#[test]
fn octave_attenuation_across_bands() {
    let mut bands: Vec<(f64, f64)> = vec![(1.0, 45.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (1.0, 40.0)];
    bands.extend((0..BANK_SIZE).map(FilterBank::band_edges));
    for (lo, hi) in bands {
        let f = design_bandpass(lo, hi, 4, RATE).unwrap();
        assert!(f.gain_db(lo / 2.0) <= -20.0, "[{lo},{hi}] below");
        if 2.0 * hi < RATE / 2.0 {
            assert!(f.gain_db(2.0 * hi) <= -20.0, "[{lo},{hi}] above");
        }
        let centre = (lo * hi).sqrt();
        assert!(f.gain_db(centre).abs() <= 1.0, "[{lo},{hi}] centre");
    }
}

#[test]
fn beta_filter_keeps_20hz_and_theta_filter_kills_50hz() {
    let x = sine(30 * 250, RATE, 20.0, 1.0);
    for phase in [Phase::Causal, Phase::ZeroPhase] {
        let y = apply_filter(&design_bandpass(13.0, 30.0, 4, RATE).unwrap(), &x, phase).unwrap();
        let a = fit_amplitude(&y[2500..5000], RATE, 20.0);
        assert!((a - 1.0).abs() <= 0.05, "{phase:?} {a}");
    }
    let x = sine(30 * 250, RATE, 50.0, 1.0);
    let y = apply_filter(&design_bandpass(4.0, 8.0, 4, RATE).unwrap(), &x, Phase::ZeroPhase).unwrap();
    assert!(fit_amplitude(&y[2500..5000], RATE, 50.0) < 0.1);
}

#[test]
fn zero_in_zero_out() {
    let f = design_bandpass(4.0, 8.0, 4, RATE).unwrap();
    for phase in [Phase::Causal, Phase::ZeroPhase] {
        assert!(apply_filter(&f, &[0.0; 500], phase).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn bank_edges_and_rows() {
    let bank = FilterBank::standard(RATE).unwrap();
    assert_eq!(bank.len(), 35);
    for (i, b) in bank.bands().iter().enumerate() {
        assert!((b.low_hz - (0.1 + 2.0 * i as f64)).abs() < 1e-12);
        assert!((b.high_hz - (2.1 + 2.0 * i as f64)).abs() < 1e-12);
        assert!(b.is_stable(), "band {i}");
    }
    assert_eq!(bank.bands()[0].low_hz, 0.1);
    assert!((bank.bands()[34].high_hz - 70.1).abs() < 1e-12);

    let tone = sine(2500, RATE, 5.0, 1.0);
    let rows = bank.apply(&tone, Phase::Causal, Execution::default()).unwrap();
    assert_eq!(rows.len(), 35);
    let energies: Vec<f64> = rows.iter().map(|r| energy(r)).collect();
    let total: f64 = energies.iter().sum();
    assert!(energies[2] / total >= 0.8, "share {}", energies[2] / total);

    let noise = white_noise(2500, 10.0, 1);
    let rows = bank.apply(&noise, Phase::Causal, Execution::Sequential).unwrap();
    assert!(rows.iter().all(|r| energy(r) > 0.0));
    let par = bank.apply(&noise, Phase::Causal, Execution::Parallel).unwrap();
    assert_eq!(rows, par);
}

#[test]
fn bank_reports_band_index_on_error() {
    let bank = FilterBank::standard(RATE).unwrap();
    match bank.apply(&[1.0; 5], Phase::Causal, Execution::Sequential) {
        Err(DspError::Band { band: 0, .. }) => {}
        other => panic!("{other:?}"),
    }
    // 70.1 Hz is past Nyquist at 140 Hz
    assert!(matches!(FilterBank::standard(140.0), Err(DspError::Band { band: 34, .. })));
}

#[test]
fn tone_envelope_is_flat_centrally() {
    // whole numbers of cycles per window: the periodic extension is the tone
    let n = 2500;
    for (freq, amp) in [(10.0, 3.0), (23.3, 1.0), (5.1, 40.0)] {
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / RATE + 0.4).cos()).collect();
        let env = hilbert_envelope(&x).unwrap();
        let worst = env[n / 10..n - n / 10]
            .iter()
            .map(|e| (e - amp).abs() / amp)
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "{freq} Hz: {worst}");
    }
}

#[test]
fn off_bin_tone_envelope_leaks_only_near_edges() {
    let n = 2500;
    for (freq, phase) in [(5.05, 0.0), (5.05, 1.0), (17.37, 2.0)] {
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * freq * i as f64 / RATE + phase).cos()).collect();
        let env = hilbert_envelope(&x).unwrap();
        let central = env[n / 10..n - n / 10].iter().map(|e| (e - 1.0).abs()).fold(0.0, f64::max);
        let middle = env[2 * n / 5..3 * n / 5].iter().map(|e| (e - 1.0).abs()).fold(0.0, f64::max);
        assert!(central <= 0.02, "{freq} Hz: {central}");
        assert!(middle <= 5e-3, "{freq} Hz: {middle}");
    }
}

#[test]
fn am_envelope_recovered() {
    let n = 2500;
    let t = |i: usize| i as f64 / RATE;
    let m = |i: usize| 1.0 + 0.5 * (2.0 * PI * 0.5 * t(i)).cos();
    let x: Vec<f64> = (0..n).map(|i| m(i) * (2.0 * PI * 10.0 * t(i)).cos()).collect();
    let env = hilbert_envelope(&x).unwrap();
    for i in n / 10..n - n / 10 {
        assert!((env[i] - m(i)).abs() <= 0.02 * m(i), "sample {i}");
    }
}

#[test]
fn parseval_on_white_noise() {
    let x = white_noise(60 * 250, 1.0, 7);
    let psd = welch_psd(&x, RATE, WelchParams::default()).unwrap();
    assert!((psd.total_power() - 1.0).abs() <= 0.05, "{}", psd.total_power());
}

#[test]
fn sine_power_lands_in_alpha() {
    let x = sine(60 * 250, RATE, 10.0, 2.0);
    let psd = welch_psd(&x, RATE, WelchParams::default()).unwrap();
    let peak = (0..psd.power.len()).max_by(|&a, &b| psd.power[a].total_cmp(&psd.power[b])).unwrap();
    assert_eq!(psd.frequencies[peak], 10.0);
    let alpha = band_power(&psd, 8.0, 13.0).unwrap();
    assert!((alpha - 2.0).abs() <= 0.1, "{alpha}");
}

#[test]
fn theta_tone_dominates_relatives() {
    let x = sine(60 * 250, RATE, 6.0, 20.0);
    let bp = compute_band_powers(&welch_psd(&x, RATE, WelchParams::default()).unwrap()).unwrap();
    assert!(bp.relative_theta >= 0.9);
    assert!(bp.theta_beta_ratio > 100.0);
}

#[test]
fn rejection_flips_exactly_at_thresholds() {
    let t = ArtifactThresholds::default();
    let base: Vec<f64> = sine(15000, RATE, 10.0, 50.0);
    let with_peak = |p: f64| {
        let mut s = base.clone();
        s[1234] = p;
        Epoch {
            index: 0,
            samples: s,
            verdict: Verdict::Pending,
        }
    };
    assert_eq!(reject_artifacts(&with_peak(300.0), &t), Verdict::Accepted);
    assert_eq!(
        reject_artifacts(&with_peak(300.0f64.next_up()), &t),
        Verdict::Rejected(RejectReason::OverAmplitude)
    );
    assert_eq!(reject_artifacts(&with_peak(-300.0f64.next_up()), &t), Verdict::Rejected(RejectReason::OverAmplitude));
    let scaled = |peak: f64| Epoch {
        index: 0,
        samples: vec![peak, -peak / 2.0, 0.0],
        verdict: Verdict::Pending,
    };
    assert_eq!(reject_artifacts(&scaled(10.0), &t), Verdict::Accepted);
    assert_eq!(
        reject_artifacts(&scaled(10.0f64.next_down()), &t),
        Verdict::Rejected(RejectReason::UnderAmplitude)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn designed_filters_are_stable(lo in 0.05f64..60.0, width in 0.5f64..50.0, rate in prop::sample::select(vec![150.0, 250.0, 256.0, 500.0])) {
        let hi = lo + width;
        prop_assume!(hi < rate / 2.0 * 0.95);
        let f = design_bandpass(lo, hi, 4, rate).unwrap();
        prop_assert!(f.is_stable());
    }

    #[test]
    fn filtering_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
        let f = design_bandpass(8.0, 13.0, 4, RATE).unwrap();
        let x = white_noise(600, 10.0, seed);
        let y = white_noise(600, 10.0, seed + 1);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        for phase in [Phase::Causal, Phase::ZeroPhase] {
            let fx = apply_filter(&f, &x, phase).unwrap();
            let fy = apply_filter(&f, &y, phase).unwrap();
            let fm = apply_filter(&f, &mix, phase).unwrap();
            let scale = fm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..600 {
                prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-12 * scale * 100.0);
            }
        }
    }

    #[test]
    fn envelope_dominates_signal(seed in 0u64..10_000, n in 16usize..600) {
        let x = white_noise(n, 5.0, seed);
        let env = hilbert_envelope(&x).unwrap();
        for (e, v) in env.iter().zip(&x) {
            prop_assert!(*e >= v.abs() - 1e-9);
        }
    }

    #[test]
    fn band_powers_are_partition_additive(seed in 0u64..1000) {
        let x = white_noise(20 * 250, 3.0, seed);
        let psd = welch_psd(&x, RATE, WelchParams::default()).unwrap();
        let whole = band_power(&psd, 1.0, 40.0).unwrap();
        let parts: f64 = [(1.0, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, 40.0)]
            .iter()
            .map(|&(l, h)| band_power(&psd, l, h).unwrap())
            .sum();
        prop_assert!((parts - whole).abs() <= 1e-12 * whole);
        let bp = compute_band_powers(&psd).unwrap();
        for r in [bp.relative_theta, bp.relative_alpha, bp.relative_beta] {
            prop_assert!((0.0..=1.0).contains(&r));
        }
        prop_assert!(bp.relative_theta + bp.relative_alpha + bp.relative_beta <= 1.0 + 1e-12);
    }

    #[test]
    fn rejection_is_monotone_in_spikes(seed in 0u64..1000, amp in 1.0f64..150.0, spike in 0.0f64..1000.0, at in 0usize..3000) {
        let t = ArtifactThresholds::default();
        let samples: Vec<f64> = white_noise(3000, amp, seed);
        let before = reject_artifacts(&Epoch { index: 0, samples: samples.clone(), verdict: Verdict::Pending }, &t);
        let mut spiked = samples;
        spiked[at] = spiked[at].signum() * (spiked[at].abs() + spike);
        let after = reject_artifacts(&Epoch { index: 0, samples: spiked, verdict: Verdict::Pending }, &t);
        match before {
            Verdict::Accepted => prop_assert!(after == Verdict::Accepted || after == Verdict::Rejected(RejectReason::OverAmplitude)),
            Verdict::Rejected(RejectReason::OverAmplitude) => prop_assert_eq!(after, before),
            _ => {}
        }
    }

    #[test]
    fn zscore_idempotent_and_affine_invariant(seed in 0u64..1000, a in 0.1f64..50.0, b in -100.0f64..100.0) {
        let m = Matrix::from_vec(7, 9, white_noise(63, 2.0, seed));
        let z = zscore_matrix(&m).matrix;
        prop_assert!(z.mean().abs() < 1e-9);
        prop_assert!((z.std() - 1.0).abs() < 1e-9);
        let zz = zscore_matrix(&z).matrix;
        let affine = Matrix::from_vec(7, 9, m.as_slice().iter().map(|v| a * v + b).collect());
        let za = zscore_matrix(&affine).matrix;
        for i in 0..63 {
            prop_assert!((zz.as_slice()[i] - z.as_slice()[i]).abs() < 1e-9);
            prop_assert!((za.as_slice()[i] - z.as_slice()[i]).abs() < 1e-9);
        }
    }
}
