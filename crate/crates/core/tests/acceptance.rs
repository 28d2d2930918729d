//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//!
//! Tolerances are the contract values; nothing here is loosened to pass.

mod support;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mbci_core::dsp::{
    band_power, hilbert_envelope, reject_artifacts, welch_psd, ArtifactThresholds, Epoch, FilterBank, RejectReason,
    Verdict, WelchParams,
};
use mbci_core::feedback::{SceneCatalog, SessionMode};
use mbci_core::ingest::{synth_generate, SourceSpec, StreamConfig, SynthControl, WindowAssembler};
use mbci_core::model::{fixture, softmax, Architecture, FeatureExtractor, ModelWeights, Network};
use mbci_core::par::Execution;
use mbci_core::session::{
    replay_session, CompletionStatus, EventPayload, Pacing, RunOptions, SessionLog, SessionService, StartRequest,
    StatusKind,
};
use mbci_core::stats::{
    bh_fdr, cluster_permutation, paired_t, rm_anova, summarize_session, welch_t_from_summary, ClusterParams, RmTable,
    SummaryParams, SPECTRUM_HZ,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use support::{oracle, stats_oracle};

const RATE: f64 = 250.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runner {
    failed: usize,
    total: usize,
}

impl Runner {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        self.total += 1;
        match result {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                self.failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
}

// -- statistics ---------------------------------------------------------------

fn welch_group_comparison() -> Outcome {
    // Group sds recovered from the reported s.e.m.: sem x sqrt(n).
    let r = welch_t_from_summary(10, 1.35, 0.479 * 10f64.sqrt(), 12, 3.85, 0.625 * 12f64.sqrt()).map_err(|e| e.to_string())?;
    let d = r.effect_size.unwrap_or(f64::NAN);
    ensure(
        (r.statistic + 3.174).abs() <= 0.01 && (r.df - 19.50).abs() <= 0.01 && (d + 1.315).abs() <= 0.005,
        format!("t = {:.4} (-3.174), df = {:.3} (19.50), d = {:.4} (-1.315)", r.statistic, r.df, d),
    )
}

/// Paired differences with exactly the requested mean and sample sd.
fn differences_with(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    let s = (raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    raw.iter().map(|x| mean + sd * (x - m) / s).collect()
}

fn paired_effect_sizes() -> Outcome {
    let captions = [
        (-6.816, -1.039),
        (-4.785, -0.730),
        (-5.147, -0.785),
        (-2.504, -0.382),
        (-2.377, -0.362),
        (2.772, 0.423),
        (3.383, 0.516),
        (10.671, 1.627),
        (7.146, 1.090),
        (3.914, 0.597),
        (-2.876, -0.439),
        (-3.386, -0.516),
    ];
    let mut worst: f64 = 0.0;
    for (i, (t, d)) in captions.into_iter().enumerate() {
        let diff = differences_with(43, t / 43f64.sqrt(), 1.0, 10 + i as u64);
        let base = differences_with(43, 2.0, 0.5, 99);
        let x: Vec<f64> = base.iter().zip(&diff).map(|(b, d)| b + d).collect();
        let r = paired_t(&x, &base).map_err(|e| e.to_string())?;
        if r.df != 42.0 || (r.statistic - t).abs() > 1e-9 {
            return Err(format!("t {t}: recomputed t {} df {}", r.statistic, r.df));
        }
        worst = worst.max((r.effect_size.unwrap_or(f64::NAN) - d).abs());
    }
    ensure(worst <= 0.001, format!("{} caption pairs, max |d - d_caption| = {worst:.5}", captions.len()))
}

fn bh_against_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    for trial in 0..1000 {
        let m = rng.random_range(1..=20);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let x = rng.random::<f64>().powi(3);
                if trial % 3 == 0 { (x * 20.0).round() / 20.0 } else { x }
            })
            .collect();
        let got = bh_fdr(&p, 0.05).map_err(|e| e.to_string())?;
        bad += usize::from(got.rejected != stats_oracle::bh_reject(&p, 0.05));
    }
    ensure(bad == 0, format!("1000 vectors (length 1-20), {bad} rejection-set mismatches"))
}

fn anova_against_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, a, b) = (rng.random_range(3..=6), rng.random_range(2..=3), rng.random_range(2..=4));
        let data: Vec<f64> = (0..n * a * b).map(|c| normal.sample(&mut rng) + 0.5 * ((c / b) % a) as f64).collect();
        let got = rm_anova(&RmTable::new(n, a, b, data.clone()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = stats_oracle::rm_anova_f(&data, n, a, b);
        for (e, w) in [got.state.f, got.time.f, got.interaction.f].into_iter().zip(want) {
            worst = worst.max((e - w).abs() / w.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-6, format!("100 tables up to 6x3x4, max relative F error {worst:.2e}"))
}

// -- dsp ------------------------------------------------------------------------

fn parseval() -> Outcome {
    let x = support::white_noise(60 * 250, 1.0, 7);
    let variance = support::energy(&x) / x.len() as f64;
    let psd = welch_psd(&x, RATE, WelchParams::default()).map_err(|e| e.to_string())?;
    let rel = (psd.total_power() - variance).abs() / variance;
    ensure(rel <= 0.05, format!("integrated PSD {:.4} vs variance {variance:.4} ({:.2}%)", psd.total_power(), rel * 100.0))
}

fn hilbert_tone() -> Outcome {
    let n = 2500;
    let mut worst: f64 = 0.0;
    for (freq, amp) in [(10.0, 3.0), (23.3, 1.0), (5.1, 40.0)] {
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / RATE + 0.4).cos()).collect();
        let env = hilbert_envelope(&x).map_err(|e| e.to_string())?;
        worst = env[n / 10..n - n / 10].iter().map(|e| (e - amp).abs() / amp).fold(worst, f64::max);
    }
    ensure(worst <= 1e-3, format!("central 80%, max relative error {worst:.2e}"))
}

fn alpha_power() -> Outcome {
    let x = support::sine(60 * 250, RATE, 10.0, 2.0);
    let psd = welch_psd(&x, RATE, WelchParams::default()).map_err(|e| e.to_string())?;
    let alpha = band_power(&psd, 8.0, 13.0).map_err(|e| e.to_string())?;
    ensure((alpha - 2.0).abs() <= 0.1, format!("alpha power {alpha:.4} uV^2 (2.0 +- 5%)"))
}

fn filter_bank_edges() -> Outcome {
    let bank = FilterBank::standard(RATE).map_err(|e| e.to_string())?;
    let edges_ok = bank.bands().iter().enumerate().all(|(i, b)| {
        (b.low_hz - (0.1 + 2.0 * i as f64)).abs() < 1e-12 && (b.high_hz - (2.1 + 2.0 * i as f64)).abs() < 1e-12
    });
    let first = &bank.bands()[0];
    let last = &bank.bands()[bank.len() - 1];
    ensure(
        bank.len() == 35 && edges_ok,
        format!(
            "{} bands, {}-{} Hz ... {}-{} Hz",
            bank.len(),
            first.low_hz,
            first.high_hz,
            last.low_hz,
            last.high_hz
        ),
    )
}

fn rejection_boundaries() -> Outcome {
    let t = ArtifactThresholds::default();
    let epoch = |samples: Vec<f64>| Epoch {
        index: 0,
        samples,
        verdict: Verdict::Pending,
    };
    let base = support::sine(15000, RATE, 10.0, 50.0);
    let peak = |p: f64| {
        let mut s = base.clone();
        s[1234] = p;
        reject_artifacts(&epoch(s), &t)
    };
    let scaled = |p: f64| reject_artifacts(&epoch(vec![p, -p / 2.0, 0.0]), &t);
    let over = Verdict::Rejected(RejectReason::OverAmplitude);
    let under = Verdict::Rejected(RejectReason::UnderAmplitude);
    let ok = peak(300.0) == Verdict::Accepted
        && peak(300.0f64.next_up()) == over
        && peak(-(300.0f64.next_up())) == over
        && scaled(10.0) == Verdict::Accepted
        && scaled(10.0f64.next_down()) == under;
    ensure(ok, "300 uV accepted, next float above rejected; 10 uV accepted, next float below rejected".into())
}

// -- cnn ------------------------------------------------------------------------

fn random_weights(seed: u64) -> ModelWeights {
    let mut w = ModelWeights::init_random(Architecture::default(), seed).unwrap();
    let mut r = support::rng(seed ^ 0x5eed);
    let names: Vec<String> = w.tensors().iter().map(|t| t.name.clone()).collect();
    for name in names {
        for v in w.tensor_mut(&name).unwrap().iter_mut() {
            let n: f64 = StandardNormal.sample(&mut r);
            if name.ends_with("bn.variance") {
                *v = r.random_range(0.3..2.0);
            } else if name.ends_with("bn.gamma") {
                *v = r.random_range(0.5..1.5);
            } else if !name.ends_with("kernel") {
                *v = (0.1 * n) as f32;
            }
        }
    }
    w
}

fn random_features(seed: u64) -> mbci_core::dsp::Matrix {
    mbci_core::dsp::Matrix::from_vec(35, 100, support::white_noise(3500, 1.0, seed))
}

fn cnn_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for pair in 0..100u64 {
        let w = random_weights(1000 + pair);
        let x = random_features(2000 + pair);
        let fast = Network::new(&w).predict(&x, Execution::default()).map_err(|e| e.to_string())?;
        let slow = oracle::cnn_forward(&w, x.as_slice(), 35, 100);
        for (a, b) in fast.probabilities.iter().zip(&slow.probabilities) {
            worst = worst.max((a - b).abs() / b.abs().max(1e-300));
        }
    }
    ensure(worst <= 1e-4, format!("100 weight/feature pairs, max relative probability error {worst:.2e}"))
}

fn shape_trace() -> Outcome {
    let (_, trace) = Network::new(&random_weights(1))
        .predict_traced(&random_features(2), Execution::Sequential)
        .map_err(|e| e.to_string())?;
    let dims: Vec<Vec<usize>> = trace.iter().map(|l| l.dims.clone()).collect();
    let want: Vec<Vec<usize>> = vec![
        vec![35, 100, 1],
        vec![35, 100, 32],
        vec![17, 49, 32],
        vec![17, 49, 128],
        vec![8, 24, 128],
        vec![24576],
        vec![100],
        vec![2],
    ];
    let shown: Vec<String> = trace.iter().map(ToString::to_string).collect();
    ensure(dims == want, shown.join(" -> "))
}

fn zero_network() -> Outcome {
    let net = Network::new(&ModelWeights::all_zero(Architecture::default()).map_err(|e| e.to_string())?);
    let scores: Vec<f64> = (0..5)
        .map(|s| net.predict(&random_features(s), Execution::Sequential).map(|p| 100.0 * p.probabilities[1]))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(scores.iter().all(|&s| s == 50.0), format!("scores {scores:?}"))
}

fn softmax_sums() -> Outcome {
    let mut r = support::rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let l = [r.random_range(-500.0..500.0), r.random_range(-500.0..500.0)];
        worst = worst.max((softmax(&l).iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-6, format!("10000 logit pairs in [-500, 500], max |sum - 1| = {worst:.2e}"))
}

// -- closed loop ----------------------------------------------------------------

fn synthetic_request(weights: &Path, mode: SessionMode, seconds: f64, pacing: Pacing, id: &str) -> StartRequest {
    let stream = StreamConfig::new(SourceSpec::Synthetic {
        control: SynthControl::with_latent(0.6),
        duration_seconds: seconds,
        seed: 21,
    });
    let mut req = StartRequest::new(mode, stream, weights);
    req.planned_seconds = Some(seconds);
    req.session_id = Some(id.into());
    req.options = RunOptions {
        pacing,
        execution: Execution::default(),
    };
    req
}

/// Runs a real-time 2-minute RMS session and checks count, order and the
/// wall-clock spacing of score events as a subscriber receives them.
fn rms_cadence(weights: &Path, data: &Path) -> Outcome {
    let service = SessionService::new(data, SceneCatalog::default());
    let rx = service.subscribe();
    let req = synthetic_request(weights, SessionMode::Rms, 120.0, Pacing::RealTime { speed: 1.0 }, "cadence");
    service.start(req).map_err(|e| e.to_string())?;
    let collector = std::thread::spawn(move || {
        let mut arrivals = Vec::new();
        for ev in rx {
            let now = Instant::now();
            match ev.payload {
                EventPayload::ScoreUpdate { window_index, .. } => arrivals.push((now, window_index, ev.t)),
                EventPayload::SessionStatus {
                    status: StatusKind::Completed | StatusKind::Aborted,
                    ..
                } => break,
                _ => {}
            }
        }
        arrivals
    });
    let outcome = service.wait().map_err(|e| e.to_string())?;
    let arrivals = collector.join().map_err(|_| "collector panicked".to_string())?;
    if outcome.status != CompletionStatus::Complete {
        return Err(format!("session ended {:?}", outcome.status));
    }
    let in_order = arrivals.windows(2).all(|w| w[1].1 == w[0].1 + 1 && w[1].2 > w[0].2);
    let gaps: Vec<f64> = arrivals.windows(2).map(|w| (w[1].0 - w[0].0).as_secs_f64()).collect();
    let (lo, hi) = gaps.iter().fold((f64::MAX, f64::MIN), |(a, b), &g| (a.min(g), b.max(g)));
    let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    ensure(
        arrivals.len() >= 110 && in_order && lo >= 0.9 && hi <= 1.1,
        format!(
            "{} score events, in order: {in_order}, wall-clock interval mean {mean:.4} s, min {lo:.4} s, max {hi:.4} s",
            arrivals.len()
        ),
    )
}

fn latency_five_minutes(weights: &Path, data: &Path) -> Outcome {
    let service = SessionService::new(data, SceneCatalog::default());
    service
        .start(synthetic_request(weights, SessionMode::Rms, 300.0, Pacing::Unpaced, "latency"))
        .map_err(|e| e.to_string())?;
    let o = service.wait().map_err(|e| e.to_string())?;
    let l = &o.latency;
    ensure(
        l.windows >= 290 && l.total.p50_ms <= 100.0 && l.deadline_misses == 0,
        format!(
            "{} windows, median {:.1} ms (filter bank {:.1}, envelope {:.1}, cnn {:.1}), p99 {:.1} ms, {} deadline misses",
            l.windows, l.total.p50_ms, l.filter_bank.p50_ms, l.envelope.p50_ms, l.cnn.p50_ms, l.total.p99_ms, l.deadline_misses
        ),
    )
}

fn replay_identical(dir: &Path) -> Outcome {
    let report = replay_session(dir, Execution::default()).map_err(|e| e.to_string())?;
    let logged = SessionLog::load(dir).map_err(|e| e.to_string())?.scores().len();
    ensure(
        report.bit_identical() && report.replayed.len() == logged && logged > 0,
        format!("{} logged scores, {} replayed, {} mismatches", logged, report.replayed.len(), report.mismatches.len()),
    )
}

// -- cluster permutation --------------------------------------------------------

fn spectra(n: usize, offset: f64, bins: std::ops::RangeInclusive<usize>, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let nbins = SPECTRUM_HZ.count();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let level = 3.0 * noise.sample(&mut rng);
        let base: Vec<f64> = (0..nbins).map(|f| level + 10.0 / (1.0 + f as f64) + noise.sample(&mut rng)).collect();
        a.push(
            base.iter()
                .enumerate()
                .map(|(f, v)| v + noise.sample(&mut rng) + if bins.contains(&f) { offset } else { 0.0 })
                .collect(),
        );
        b.push(base.iter().map(|v| v + noise.sample(&mut rng)).collect());
    }
    (a, b)
}

fn cluster_detects_offset() -> Outcome {
    // 11 bins, 10-20 Hz.
    let (a, b) = spectra(20, 1.2, 9..=19, 3);
    let r = cluster_permutation(&a, &b, &ClusterParams { seed: 5, ..ClusterParams::default() }).map_err(|e| e.to_string())?;
    let best = r.clusters.iter().filter(|c| c.covers(14, 14)).min_by(|x, y| x.p_value.total_cmp(&y.p_value));
    match best {
        Some(c) => ensure(
            c.p_value < 0.05,
            format!("cluster over bins {}..={} ({}-{} Hz), p = {:.4}", c.start, c.end, c.start + 1, c.end + 1, c.p_value),
        ),
        None => Err("no cluster covers the injected offset".into()),
    }
}

fn cluster_false_positives() -> Outcome {
    let start = Instant::now();
    let sims = 200;
    let mut hits = 0;
    for s in 0..sims {
        let (a, b) = spectra(20, 0.0, 0..=0, 1000 + s);
        let params = ClusterParams { seed: s, ..ClusterParams::default() };
        hits += usize::from(cluster_permutation(&a, &b, &params).map_err(|e| e.to_string())?.significant().next().is_some());
    }
    let rate = hits as f64 / sims as f64;
    let took = start.elapsed();
    ensure(
        (0.01..=0.10).contains(&rate) && took <= Duration::from_secs(300),
        format!("{hits}/{sims} null simulations significant (rate {rate:.3}), 1000 permutations each, {:.1} s", took.as_secs_f64()),
    )
}

// -- synthetic directionality ---------------------------------------------------

fn latent_directionality() -> Outcome {
    let params = SummaryParams::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [1, 2, 3] {
        let rel = |latent: f64| {
            let x: Vec<f64> = synth_generate(&SynthControl::with_latent(latent), 300.0, RATE, seed).iter().map(|s| s.value).collect();
            let s = summarize_session(SessionMode::Rms, &x, RATE, &[], &[], &params).unwrap();
            let bp = s.band_powers.unwrap();
            (bp.relative_theta, bp.relative_beta)
        };
        let ((t0, b0), (t1, b1)) = (rel(0.0), rel(1.0));
        ok &= t1 < t0 && b1 > b0;
        lines.push(format!("seed {seed}: rel theta {t0:.3} -> {t1:.3}, rel beta {b0:.3} -> {b1:.3}"));
    }
    ensure(ok, lines.join("; "))
}

fn fixture_monotone() -> Outcome {
    let net = Network::new(&fixture::contrast_weights());
    let fx = FeatureExtractor::new(RATE, 2500).map_err(|e| e.to_string())?;
    let mean_score = |m: f64| {
        let mut a = WindowAssembler::with_lengths(2500, 250, RATE);
        let windows: Vec<_> = synth_generate(&SynthControl::with_latent(m), 40.0, RATE, 17)
            .into_iter()
            .filter_map(|s| a.push(s).unwrap())
            .collect();
        windows
            .iter()
            .map(|w| net.forward(&fx.extract(w, Execution::default()).unwrap(), Execution::default()).unwrap().score)
            .sum::<f64>()
            / windows.len() as f64
    };
    let scores: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&m| mean_score(m)).collect();
    let shown: Vec<String> = scores.iter().map(|s| format!("{s:.2}")).collect();
    ensure(scores.windows(2).all(|p| p[1] > p[0]), format!("mean score at latent 0, .25, .5, .75, 1: {}", shown.join(", ")))
}

fn main() -> ExitCode {
    let mut r = Runner { failed: 0, total: 0 };

    r.check("stats: welch_t reproduces the relief comparison", welch_group_comparison);
    r.check("stats: paired d = t/sqrt(43) matches caption d", paired_effect_sizes);
    r.check("stats: bh_fdr equals the step-up oracle", bh_against_oracle);
    r.check("stats: rm_anova F equals the least-squares oracle", anova_against_oracle);

    r.check("dsp: Parseval on white noise", parseval);
    r.check("dsp: pure-tone Hilbert envelope", hilbert_tone);
    r.check("dsp: 10 Hz sine amplitude 2 gives alpha power 2.0", alpha_power);
    r.check("dsp: filter bank has 35 bands at 0.1+2i / 2.1+2i Hz", filter_bank_edges);
    r.check("dsp: epoch rejection boundaries", rejection_boundaries);

    r.check("cnn: optimized forward equals naive oracle", cnn_oracle);
    r.check("cnn: shape trace", shape_trace);
    r.check("cnn: zero-weight network scores 50", zero_network);
    r.check("cnn: softmax sums to 1", softmax_sums);

    let tmp = tempfile::tempdir().expect("temp dir");
    let weights = tmp.path().join("weights");
    fixture::contrast_weights().save(&weights).expect("fixture weights");
    let data = tmp.path().join("sessions");
    r.check("closed loop: 2-minute real-time RMS run at 1 Hz", || rms_cadence(&weights, &data));
    r.check("closed loop: 5-minute pipeline latency", || latency_five_minutes(&weights, &data));
    r.check("closed loop: replay reproduces logged scores bit-identically", || replay_identical(&data.join("cadence")));

    r.check("cluster: injected 11-bin offset detected (n = 20)", cluster_detects_offset);
    r.check("cluster: false-positive rate over 200 null simulations", cluster_false_positives);

    r.check("synthetic: latent 1 vs 0 lowers relative theta, raises relative beta", latent_directionality);
    r.check("synthetic: fixture score rises with latent", fixture_monotone);

    println!("\n{} of {} criteria passed", r.total - r.failed, r.total);
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
