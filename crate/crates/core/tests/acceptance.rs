//! Acceptance checks, one printed PASS/FAIL line per criterion. Runs as a
//! plain binary so the lines show up in `cargo test` output.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::{random_events, scaled_config};
use pulsepair::calib::{fit_gauss_flat, tau_int_scan};
use pulsepair::pairdetect::{events_from_crossings, form_pairs, read_level1_archive, write_level1_archive, PairCandidate};
use pulsepair::phasefilter::{phase_metric, second_level_filter};
use pulsepair::pipeline::{
    analyze_candidates, detect_events, filter_candidates, run_experiment, thread_pool, tune_tau, FIGURE_FILE,
    STATS_FILE,
};
use pulsepair::sigsim::{
    geometric_delay, simulate_correlator_frames, simulate_drift_scan, CorrelatorSpec, DriftScanSpec, Simulator,
};
use pulsepair::skystats::{binomial_tail, cohens_d, false_alarm_tail_check, finite_segment_rate, RaBins};
use pulsepair::{
    DetectionParams, ExperimentConfig, FilterParams, ObservationConfig, RfiDirection, RfiKind, RfiSpec, SnrConvention,
    SourceSpec,
};
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution};

/// Outcome of one criterion: pass flag plus a one-line summary.
type Verdict = (bool, String);

/// Fraction of `trials` binomial draws satisfying `pred`, drawn in
/// parallel shards with fixed seeds.
fn monte_carlo(n: u64, p: f64, trials: u64, seed: u64, pred: impl Fn(u64) -> bool + Sync) -> f64 {
    use rayon::prelude::*;
    const SHARDS: u64 = 16;
    let hits: u64 = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let dist = Binomial::new(n, p).unwrap();
            let count = trials / SHARDS + u64::from(s < trials % SHARDS);
            (0..count).filter(|_| pred(dist.sample(&mut rng))).count() as u64
        })
        .sum();
    hits as f64 / trials as f64
}

fn within_3_sigma(mc: f64, exact: f64, trials: u64) -> bool {
    (mc - exact).abs() <= 3.0 * (exact * (1.0 - exact) / trials as f64).sqrt()
}

fn criterion_1() -> Verdict {
    let trials = 20_000_000;
    let gt = binomial_tail(328, 0.025, 19, true).unwrap();
    let mc = monte_carlo(328, 0.025, trials, 1, |x| x > 19);
    let ok = (2.5e-4..=3.1e-4).contains(&gt) && within_3_sigma(mc, gt, trials);
    (ok, format!("P(X > 19 | 328, 0.025) = {gt:.4e}, Monte Carlo ({trials} draws) {mc:.4e}"))
}

fn criterion_2() -> Verdict {
    let (n, p, trials) = (246, 6.1 / 246.0, 20_000_000);
    let ge = binomial_tail(n, p, 15, false).unwrap();
    let gt = binomial_tail(n, p, 15, true).unwrap();
    let mc_ge = monte_carlo(n, p, trials, 2, |x| x >= 15);
    let mc_gt = monte_carlo(n, p, trials, 3, |x| x > 15);
    let ok = (1.3e-3..=1.5e-3).contains(&ge)
        && (4.5e-4..=5.3e-4).contains(&gt)
        && gt < 9e-4
        && 9e-4 < ge
        && within_3_sigma(mc_ge, ge, trials)
        && within_3_sigma(mc_gt, gt, trials);
    (
        ok,
        format!(
            "P(X >= 15) = {ge:.4e} (MC {mc_ge:.4e}), P(X > 15) = {gt:.4e} (MC {mc_gt:.4e}); the quoted 9e-4 lies between the two conventions"
        ),
    )
}

fn criterion_3() -> Verdict {
    let d = cohens_d(19, 328, 0.025).unwrap();
    let sigma = (328.0f64 * 0.025 * 0.975).sqrt();
    let ok = (d - 3.82).abs() <= 0.005 && (sigma - 2.828).abs() <= 0.001;
    (ok, format!("d = {d:.5}, sigma = {sigma:.5}"))
}

fn criterion_4() -> Verdict {
    let naive = (-(10f64.powf(0.85))).exp();
    let inc = false_alarm_tail_check(8.5, 20_000_000, 256, SnrConvention::IncludeTestBin, 4).unwrap();
    let exc = false_alarm_tail_check(8.5, 20_000_000, 256, SnrConvention::ExcludeTestBin, 4).unwrap();
    let rel = inc.empirical_rate / naive - 1.0;
    let ok = rel.abs() <= 0.10 && inc.trials >= 10_000_000;
    (
        ok,
        format!(
            "{} bins: rate {:.4e} vs exp(-10^0.85) = {naive:.4e} ({:+.1}%); 256-bin estimator predicts {:.4e}; excluding the test bin {:.4e} (predicted {:.4e})",
            inc.trials,
            inc.empirical_rate,
            100.0 * rel,
            inc.finite_segment_rate,
            exc.empirical_rate,
            finite_segment_rate(8.5, 256, SnrConvention::ExcludeTestBin)
        ),
    )
}

/// Injected co-directional pairs near transit, detected in the full band.
fn codirectional_pairs() -> (Vec<(PairCandidate, f64)>, ObservationConfig) {
    let cfg = ObservationConfig::default();
    let source = SourceSpec {
        ra_hr: 5.25,
        dec_deg: -7.6,
        pulse_rate_per_frame: 5.0,
        delta_f_min_hz: 7.9,
        delta_f_max_hz: 2.0e6,
        snr_target_db: 50.0,
        active_halfwidth_hr: Some(0.01),
        ..SourceSpec::default()
    };
    let sim = Simulator::new(&cfg, std::slice::from_ref(&source), &[]).unwrap();
    let sampler = sim.sparse_sampler(8.5);
    let det = DetectionParams::default();
    let mut out = Vec::new();
    for f in 0..sim.frame_count() {
        let plan = sim.plan(f);
        if plan.tones.is_empty() {
            continue;
        }
        let ha = (plan.info.lst_hr - source.ra_hr) * std::f64::consts::PI / 12.0;
        let tau_geom = geometric_delay(cfg.baseline_meters, source.dec_deg, ha);
        let crossings = sim.crossings(f, 8.5, sampler.as_ref()).unwrap();
        let events = events_from_crossings(&cfg, &det, &plan.info, &crossings);
        for pair in plan.tones.chunks(2) {
            let find = |bin| events.iter().find(|e| e.bin_index == bin).cloned();
            if let (Some(a), Some(b)) = (find(pair[0].bin), find(pair[1].bin)) {
                out.push((PairCandidate::new(a, b), tau_geom));
            }
        }
    }
    (out, cfg)
}

/// Sidelobe carriers with a 100 ns inter-element delay, laid out so each
/// designed spacing is a consecutive pair. Returns pass fraction per `|df|`.
fn sidelobe_sweep() -> BTreeMap<u64, (usize, usize)> {
    let cfg = ObservationConfig::default();
    let spacings: Vec<f64> = (0..30).map(|i| 1e3 * 2000f64.powf(i as f64 / 29.0)).collect();
    let mut rfi = Vec::new();
    let mut base = 1406e6;
    for df in &spacings {
        if base + df > cfg.excision_low_hz - 0.2e6 && base < cfg.excision_high_hz + 0.2e6 {
            base = cfg.excision_high_hz + 0.5e6;
        }
        for f in [base, base + df] {
            rfi.push(RfiSpec {
                kind: RfiKind::NarrowbandCarrier,
                rf_freq_hz: f,
                power_rel_noise: 1e5,
                direction: RfiDirection::Sidelobe,
                sidelobe_delay_s: 100e-9,
                duty_cycle: 1.0,
                bandwidth_hz: None,
            });
        }
        base += df + 0.4e6;
    }
    let sim = Simulator::new(&cfg, &[], &rfi).unwrap();
    let sampler = sim.sparse_sampler(8.5);
    let det = DetectionParams::default();
    let carrier_bins: HashSet<usize> = sim.plan(0).tones.iter().map(|t| t.bin).collect();
    let mut by_df: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for f in 0..20 {
        let info = sim.frame_info(f);
        let crossings = sim.crossings(f, 8.5, sampler.as_ref()).unwrap();
        let events = events_from_crossings(&cfg, &det, &info, &crossings);
        for c in form_pairs(&events, 0, false) {
            if !carrier_bins.contains(&c.event_a.bin_index) || !carrier_bins.contains(&c.event_b.bin_index) {
                continue;
            }
            let m = phase_metric(&c, 0.0, false).unwrap();
            let e = by_df.entry(c.delta_f_hz.abs().round() as u64).or_default();
            e.0 += usize::from(m.abs() <= 0.04);
            e.1 += 1;
        }
    }
    by_df
}

fn criterion_5() -> Verdict {
    let (pairs, _) = codirectional_pairs();
    let max_geom = pairs.iter().map(|p| p.1.abs()).fold(0.0f64, f64::max);
    let offset = 3.18e-9 - max_geom;
    let mut worst = 1.0f64;
    let mut total = 0;
    for tau in [-offset, -0.5 * offset, 0.0, 0.5 * offset, offset] {
        let passed = pairs
            .iter()
            .filter(|(c, _)| phase_metric(c, tau, false).unwrap().abs() <= 0.04)
            .count();
        worst = worst.min(passed as f64 / pairs.len() as f64);
        total += pairs.len();
    }
    let max_df = pairs.iter().map(|p| p.0.delta_f_hz.abs()).fold(0.0f64, f64::max);

    let sweep = sidelobe_sweep();
    let predicted = 0.04 / (std::f64::consts::TAU * 100e-9);
    let passing: Vec<f64> = sweep.iter().filter(|(_, (p, n))| 2 * p >= *n).map(|(df, _)| *df as f64).collect();
    let failing: Vec<f64> = sweep.iter().filter(|(_, (p, n))| 2 * p < *n).map(|(df, _)| *df as f64).collect();
    let last_pass = passing.iter().cloned().fold(0.0f64, f64::max);
    let first_fail_above = failing.iter().cloned().filter(|&f| f > last_pass).fold(f64::INFINITY, f64::min);
    let cutoff = (last_pass * first_fail_above).sqrt();
    // Below the cutoff everything passes, above it nothing does.
    let clean = failing.iter().all(|&f| f > last_pass);
    let ok = worst >= 0.99
        && pairs.len() >= 200
        && max_df > 1.5e6
        && clean
        && cutoff >= predicted / 2.0
        && cutoff <= predicted * 2.0;
    (
        ok,
        format!(
            "{} injected pairs (max |df| {:.2} MHz), worst pass rate {:.2}% over residual delays up to 3.18 ns ({total} evaluations); sidelobe cutoff {:.1} kHz vs predicted {:.1} kHz",
            pairs.len(),
            max_df / 1e6,
            100.0 * worst,
            cutoff / 1e3,
            predicted / 1e3
        ),
    )
}

/// One scaled search.
struct ScaledRun {
    peak_bin: Option<usize>,
    source_bin_d: f64,
    max_abs_d: f64,
    source_bin_excess: f64,
    mean_per_bin: f64,
}

fn scaled_run(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> ScaledRun {
    let level1 = detect_events(cfg, pool).unwrap();
    let (_, second) = filter_candidates(cfg, &level1).unwrap();
    let a = analyze_candidates(cfg, &level1, &second.passed).unwrap();
    let bins = RaBins::from_params(&cfg.stats).unwrap();
    let src = bins.index_of(5.25).unwrap();
    let src_stats = &a.bins[src];
    let excess = src_stats.observed_count as f64 - src_stats.expected_mean;
    let max_abs = a.bins.iter().filter_map(|b| b.cohens_d).fold(0.0f64, |m, d| m.max(d.abs()));
    ScaledRun {
        peak_bin: a.peak.as_ref().map(|p| p.bin),
        source_bin_d: src_stats.cohens_d.unwrap_or(f64::NAN),
        max_abs_d: max_abs,
        source_bin_excess: excess,
        mean_per_bin: src_stats.expected_mean,
    }
}

fn criterion_6() -> Verdict {
    let pool = thread_pool(0).unwrap();
    let base = scaled_config();
    let bins = RaBins::from_params(&base.stats).unwrap();
    let src_bin = bins.index_of(5.25).unwrap();
    let mut hits = 0;
    let mut excess_sum = 0.0;
    let mut mean_sum = 0.0;
    for seed in 1..=20 {
        let mut cfg = base.clone();
        cfg.observation.seed = seed;
        let r = scaled_run(&cfg, &pool);
        excess_sum += r.source_bin_excess;
        mean_sum += r.mean_per_bin;
        hits += usize::from(r.peak_bin == Some(src_bin) && r.source_bin_d >= 3.5);
    }
    let mut quiet = 0;
    for seed in 101..=120 {
        let mut cfg = base.clone();
        cfg.observation.seed = seed;
        cfg.sources.iter_mut().for_each(|s| s.pulse_rate_per_frame = 0.0);
        quiet += usize::from(scaled_run(&cfg, &pool).max_abs_d < 3.5);
    }
    let ok = hits >= 18 && quiet >= 19;
    (
        ok,
        format!(
            "injection: peak d >= 3.5 in the 5.2-5.3 h bin for {hits}/20 seeds (mean excess {:.1} over a mean of {:.1} per bin); null: max |d| < 3.5 for {quiet}/20 seeds",
            excess_sum / 20.0,
            mean_sum / 20.0
        ),
    )
}

/// Not a gating criterion: the same search with roughly twice the excess.
fn supplementary_injection() -> String {
    let pool = thread_pool(0).unwrap();
    let base = scaled_config();
    let src_bin = RaBins::from_params(&base.stats).unwrap().index_of(5.25).unwrap();
    let mut hits = 0;
    for seed in 1..=20 {
        let mut cfg = base.clone();
        cfg.observation.seed = seed;
        cfg.sources.iter_mut().for_each(|s| s.pulse_rate_per_frame *= 2.0);
        let r = scaled_run(&cfg, &pool);
        hits += usize::from(r.peak_bin == Some(src_bin) && r.source_bin_d >= 3.5);
    }
    format!("with the injection rate doubled, peak d >= 3.5 in the source bin for {hits}/20 seeds")
}

fn criterion_7() -> Verdict {
    let frames = simulate_correlator_frames(&CorrelatorSpec {
        tau_int_true_s: -144e-9,
        ..CorrelatorSpec::default()
    })
    .unwrap();
    let scan = tau_int_scan(&frames, -200e-9, 0.0, 10e-9).unwrap();
    let scan_ok = (scan.tau_int_s + 144e-9).abs() <= 10e-9 + 1e-15;

    let mut cfg = scaled_config();
    cfg.observation.band_high_hz = cfg.observation.band_low_hz + 4e6;
    cfg.observation.duration_days = 2;
    cfg.observation.tau_int_true_s = -4e-9;
    cfg.sources[0].pulse_rate_per_frame = 0.3;
    // Same-frame pairing keeps noise events from splitting the wide injected pairs.
    cfg.detection.pairing_window_frames = 0;
    cfg.sources[0].delta_f_min_hz = 1e6;
    cfg.sources[0].delta_f_max_hz = 2e6;
    let pool = thread_pool(0).unwrap();
    let level1 = detect_events(&cfg, &pool).unwrap();
    let tuning = tune_tau(&cfg, &level1, &pool).unwrap();
    let tune_ok = (tuning.tau_best_s - cfg.observation.tau_int_true_s).abs() <= 1e-9 + 1e-15;
    (
        scan_ok && tune_ok,
        format!(
            "correlator scan {:.1} ns for a -144 ns delay (taps of 10 ns); pair tuning {:.2} ns for a -4 ns delay on a 1 ns grid over +/-10 ns (peak d {:.2})",
            scan.tau_int_s * 1e9,
            tuning.tau_best_s * 1e9,
            tuning.d_best
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (fwhm, snr) in [(9.0, 0.18), (8.2, 0.25)] {
        let scan = simulate_drift_scan(&DriftScanSpec {
            fwhm_deg: fwhm,
            continuum_snr_db: snr,
            noise_rel: 0.01,
            seed: 8,
            ..DriftScanSpec::default()
        })
        .unwrap();
        let site = DriftScanSpec::default().site;
        let fit = fit_gauss_flat(&scan, &site).unwrap();
        let fit_snr = pulsepair::calib::continuum_snr_db(&fit).unwrap();
        let e_fwhm = (fit.fwhm_deg() / fwhm - 1.0).abs();
        let e_snr = (fit_snr / snr - 1.0).abs();
        worst = worst.max(e_fwhm).max(e_snr);
        parts.push(format!("FWHM {fwhm} -> {:.3}, SNR {snr} dB -> {fit_snr:.4}", fit.fwhm_deg()));
    }
    (worst <= 0.02, format!("{}; worst relative error {:.2}%", parts.join("; "), 100.0 * worst))
}

fn criterion_9() -> Verdict {
    let mut worst = 0.0f64;
    for n in 1u32..=20 {
        for p in [0.01f64, 0.025, 0.2, 0.5, 0.77] {
            let mut by_count = vec![0.0f64; n as usize + 1];
            for mask in 0u32..(1 << n) {
                let k = mask.count_ones();
                by_count[k as usize] += p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            }
            for k in 0..=n {
                let brute: f64 = by_count[k as usize..].iter().rev().sum();
                let exact = binomial_tail(n as u64, p, k as u64, false).unwrap();
                worst = worst.max((exact - brute).abs());
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("level1.csv");
    write_level1_archive(&path, &random_events(10_000, 400, 99)).unwrap();
    let events = read_level1_archive(&path).unwrap();
    let pairs = form_pairs(&events, 2, false);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for _ in 0..50 {
        use rand::Rng;
        let narrow = FilterParams {
            tau_int_s: rng.random_range(-20e-9..20e-9),
            filter_halfwidth_rad: rng.random_range(0.01..0.3),
            log_delta_f_low: rng.random_range(-5.5..-2.0),
            log_delta_f_high: rng.random_range(-2.0..0.3),
            ..FilterParams::default()
        };
        let wide = FilterParams {
            filter_halfwidth_rad: narrow.filter_halfwidth_rad + rng.random_range(0.0..0.3),
            log_delta_f_low: narrow.log_delta_f_low - rng.random_range(0.0..1.0),
            log_delta_f_high: narrow.log_delta_f_high + rng.random_range(0.0..1.0),
            ..narrow.clone()
        };
        let n = second_level_filter(&pairs, &narrow).unwrap().passed.len();
        let w = second_level_filter(&pairs, &wide).unwrap().passed.len();
        violations += usize::from(w < n);
    }
    (
        worst <= 1e-12 && violations == 0,
        format!(
            "largest tail error against 2^n enumeration {worst:.1e}; {violations} monotonicity violations in 50 widenings of {} pairs from a 10^4-event archive",
            pairs.len()
        ),
    )
}

fn criterion_10() -> Verdict {
    let cfg = scaled_config();
    let root = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in [1, 2, 8] {
        let dir = root.path().join(format!("threads{threads}"));
        run_experiment(&cfg, &dir, threads, false).unwrap();
        outputs.push((
            std::fs::read(dir.join(STATS_FILE)).unwrap(),
            std::fs::read(dir.join(FIGURE_FILE)).unwrap(),
        ));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    (
        same,
        format!(
            "stats CSV ({} bytes) and SVG ({} bytes) identical across 1, 2 and 8 threads: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let (ok, msg) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {why}"))
        });
        failed += usize::from(!ok);
        println!(
            "criterion {id:>2}: {} ({:.1} s) {msg}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    let start = Instant::now();
    println!("supplementary: {} ({:.1} s)", supplementary_injection(), start.elapsed().as_secs_f64());
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
