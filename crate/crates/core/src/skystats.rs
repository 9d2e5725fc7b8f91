//! RA-binned binomial statistics: bin probabilities, Cohen's d, exact
//! binomial tails and null Monte Carlo.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::calib::SIDEREAL_DAY_S;
use crate::channelizer::segment_snr_db;
use crate::config::{ProbabilityMode, SnrConvention, StatsParams};
use crate::error::{Error, Result};
use crate::pairdetect::{PairCandidate, PulseEvent};
use crate::sigsim::complex_normal;

/// Contiguous RA bins `[low + i w, low + (i+1) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaBins {
    edges: Vec<f64>,
}

impl RaBins {
    pub fn new(low_hr: f64, high_hr: f64, width_hr: f64) -> Result<Self> {
        if !(width_hr > 0.0) || !(high_hr > low_hr) {
            return Err(Error::config("RA bins need positive width and window"));
        }
        let count = ((high_hr - low_hr) / width_hr).round().max(1.0) as usize;
        let edges = (0..=count).map(|i| low_hr + i as f64 * width_hr).collect();
        Ok(Self { edges })
    }

    pub fn from_params(p: &StatsParams) -> Result<Self> {
        Self::new(p.window_low_hr, p.window_high_hr, p.bin_width_hr)
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn low(&self, i: usize) -> f64 {
        self.edges[i]
    }

    pub fn high(&self, i: usize) -> f64 {
        self.edges[i + 1]
    }

    /// Bin holding `ra_hr`, treating RA as periodic relative to the window start.
    pub fn index_of(&self, ra_hr: f64) -> Option<usize> {
        let low = self.edges[0];
        let ra = low + (ra_hr - low).rem_euclid(24.0);
        let i = self.edges.partition_point(|&e| e <= ra);
        (i >= 1 && i <= self.len()).then(|| i - 1)
    }
}

/// Probability that a candidate lands in each bin.
pub fn bin_probabilities(level1: &[PulseEvent], bins: &RaBins, mode: ProbabilityMode) -> Result<Vec<f64>> {
    match mode {
        ProbabilityMode::Uniform => {
            // Bins share one width, so each gets an equal share.
            Ok(vec![1.0 / bins.len() as f64; bins.len()])
        }
        ProbabilityMode::Exposure => {
            let mut counts = vec![0u64; bins.len()];
            for e in level1 {
                if let Some(i) = bins.index_of(e.ra_pointing_hr) {
                    counts[i] += 1;
                }
            }
            let total: u64 = counts.iter().sum();
            if total == 0 {
                return Err(Error::input("exposure weighting needs level-1 events inside the window"));
            }
            Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
        }
    }
}

/// `(observed - n p) / sqrt(n p (1 - p))`.
pub fn cohens_d(observed: u64, n: u64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || n == 0 {
        return Err(Error::Degenerate(format!("Cohen's d needs 0 < p < 1 and n >= 1 (p = {p}, n = {n})")));
    }
    let n = n as f64;
    Ok((observed as f64 - n * p) / (n * p * (1.0 - p)).sqrt())
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`, the Stirling remainder.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * TAU.ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / m) + m - x`, by series when `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let v2 = v * v;
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Saddle-point evaluation of the pmf for `0 < k < n`. Unlike differences
/// of log-gamma values it keeps full relative precision for large `n`.
fn pmf_interior(n: u64, p: f64, k: u64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let q = 1.0 - p;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = TAU.ln() + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// Binomial probability mass `P(X = k)`.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    match k {
        0 => (n as f64 * (-p).ln_1p()).exp(),
        k if k == n => (n as f64 * p.ln()).exp(),
        _ => pmf_interior(n, p, k),
    }
}

/// Exact upper tail: `P(X > k)` when `strict`, else `P(X >= k)`.
///
/// Terms are evaluated in log space and summed from `X = n` downwards
/// (smallest first) with compensated summation.
pub fn binomial_tail(n: u64, p: f64, k: u64, strict: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("probability {p} outside [0, 1]")));
    }
    if k > n {
        return Err(Error::input(format!("k = {k} exceeds n = {n}")));
    }
    let start = if strict { k + 1 } else { k };
    if start == 0 {
        return Ok(1.0);
    }
    if start > n {
        return Ok(0.0);
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for j in (start..=n).rev() {
        let term = binomial_pmf(n, p, j);
        let t = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    }
    Ok((sum + comp).min(1.0))
}

/// Statistics of one RA bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RaBinStats {
    pub ra_low_hr: f64,
    pub ra_high_hr: f64,
    pub trials_n: u64,
    pub p_bin: f64,
    pub expected_mean: f64,
    pub sigma: f64,
    pub observed_count: u64,
    /// `None` when `p_bin` is 0 or 1 or there are no trials.
    pub cohens_d: Option<f64>,
    pub tail_prob_ge: f64,
    pub tail_prob_gt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub bin: usize,
    pub stats: RaBinStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub bins: Vec<RaBinStats>,
    pub peak: Option<PeakReport>,
}

fn bin_stats(bins: &RaBins, i: usize, n: u64, p: f64, observed: u64) -> Result<RaBinStats> {
    let d = cohens_d(observed, n, p).ok();
    let (ge, gt) = if n == 0 {
        (if observed == 0 { 1.0 } else { 0.0 }, 0.0)
    } else {
        let k = observed.min(n);
        (binomial_tail(n, p, k, false)?, binomial_tail(n, p, k, true)?)
    };
    Ok(RaBinStats {
        ra_low_hr: bins.low(i),
        ra_high_hr: bins.high(i),
        trials_n: n,
        p_bin: p,
        expected_mean: n as f64 * p,
        sigma: (n as f64 * p * (1.0 - p)).sqrt(),
        observed_count: observed,
        cohens_d: d,
        tail_prob_ge: ge,
        tail_prob_gt: gt,
    })
}

/// Per-bin statistics from a list of RA values (one per candidate).
pub fn analyze_ra(ra_values: &[f64], bins: &RaBins, p_bins: &[f64]) -> Result<Analysis> {
    if p_bins.len() != bins.len() {
        return Err(Error::input("one probability per bin is required"));
    }
    let sum_p: f64 = p_bins.iter().sum();
    if (sum_p - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("bin probabilities sum to {sum_p}")));
    }
    let mut counts = vec![0u64; bins.len()];
    for &ra in ra_values {
        if let Some(i) = bins.index_of(ra) {
            counts[i] += 1;
        }
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        log::warn!("no candidates inside the analysis window");
    }
    let stats = (0..bins.len())
        .map(|i| bin_stats(bins, i, n, p_bins[i], counts[i]))
        .collect::<Result<Vec<_>>>()?;
    let peak = stats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.cohens_d.map(|d| (i, d)))
        .fold(None::<(usize, f64)>, |best, (i, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((i, d)),
        })
        .filter(|_| n > 0)
        .map(|(i, _)| PeakReport {
            bin: i,
            stats: stats[i].clone(),
        });
    Ok(Analysis { bins: stats, peak })
}

pub fn analyze(candidates: &[PairCandidate], bins: &RaBins, p_bins: &[f64]) -> Result<Analysis> {
    let ra: Vec<f64> = candidates.iter().map(|c| c.ra_pointing_hr).collect();
    analyze_ra(&ra, bins, p_bins)
}

/// One analysis per sidereal day, counting days from the earliest candidate.
/// This is one possible reading of the per-day point clouds; each series
/// uses only that day's candidates as trials.
pub fn analyze_per_day(candidates: &[PairCandidate], bins: &RaBins, p_bins: &[f64]) -> Result<Vec<(u32, Analysis)>> {
    let Some(t0) = candidates.iter().map(|c| c.event_b.utc_s).min_by(f64::total_cmp) else {
        return Ok(Vec::new());
    };
    let mut by_day: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    for c in candidates {
        let day = ((c.event_b.utc_s - t0) / SIDEREAL_DAY_S).round() as u32;
        by_day.entry(day).or_default().push(c.ra_pointing_hr);
    }
    by_day
        .into_iter()
        .map(|(day, ra)| Ok((day, analyze_ra(&ra, bins, p_bins)?)))
        .collect()
}

/// Empirical and predicted single-element crossing rates on pure noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FalseAlarmCheck {
    pub trials: u64,
    pub crossings: u64,
    pub empirical_rate: f64,
    /// `exp(-10^(threshold/10))`: exponential power against a known mean.
    pub predicted_rate: f64,
    /// Exact rate when the reference is the measured segment mean.
    pub finite_segment_rate: f64,
    /// Fewer than 100 crossings expected.
    pub low_count_warning: bool,
}

/// Exact per-bin crossing probability with the segment-mean reference.
pub fn finite_segment_rate(threshold_db: f64, bins_per_segment: usize, convention: SnrConvention) -> f64 {
    let c = 10f64.powf(threshold_db / 10.0);
    let n = bins_per_segment as f64;
    let t = match convention {
        SnrConvention::IncludeTestBin => c / n,
        SnrConvention::ExcludeTestBin => c / (n - 1.0 + c),
    };
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t).powf(n - 1.0)
    }
}

/// Counts bins above `threshold_db` in frequency-domain noise, at least
/// `n_trials` bins rounded up to whole segments. Shards run in parallel
/// with per-shard ChaCha streams, so the count is thread-count independent.
pub fn false_alarm_tail_check(
    threshold_db: f64,
    n_trials: u64,
    bins_per_segment: usize,
    convention: SnrConvention,
    seed: u64,
) -> Result<FalseAlarmCheck> {
    if bins_per_segment < 2 {
        return Err(Error::input("bins_per_segment must be at least 2"));
    }
    const SEGMENTS_PER_SHARD: u64 = 4096;
    let segments = n_trials.div_ceil(bins_per_segment as u64).max(1);
    let shards = segments.div_ceil(SEGMENTS_PER_SHARD);
    let crossings = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let nseg = SEGMENTS_PER_SHARD.min(segments - shard * SEGMENTS_PER_SHARD);
            let mut powers = vec![0.0; bins_per_segment];
            let mut count = 0u64;
            for _ in 0..nseg {
                for p in powers.iter_mut() {
                    *p = complex_normal(&mut rng, 1.0).norm_sqr();
                }
                count += segment_snr_db(&powers, convention)?
                    .iter()
                    .filter(|&&s| s > threshold_db)
                    .count() as u64;
            }
            Ok(count)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let trials = segments * bins_per_segment as u64;
    let predicted_rate = (-(10f64.powf(threshold_db / 10.0))).exp();
    Ok(FalseAlarmCheck {
        trials,
        crossings,
        empirical_rate: crossings as f64 / trials as f64,
        predicted_rate,
        finite_segment_rate: finite_segment_rate(threshold_db, bins_per_segment, convention),
        low_count_warning: predicted_rate * (trials as f64) < 100.0,
    })
}

/// Null Monte Carlo: `n_trials` candidates scattered over the bins with
/// probabilities `p_bins`, repeated `runs` times; returns the largest
/// `|d|` of each run.
pub fn null_max_abs_d(n_trials: u64, p_bins: &[f64], runs: u64, seed: u64) -> Result<Vec<f64>> {
    if p_bins.is_empty() || n_trials == 0 {
        return Err(Error::input("null Monte Carlo needs bins and trials"));
    }
    let mut cdf = Vec::with_capacity(p_bins.len());
    let mut acc = 0.0;
    for p in p_bins {
        acc += p;
        cdf.push(acc);
    }
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run);
            let mut counts = vec![0u64; p_bins.len()];
            for _ in 0..n_trials {
                let u = rng.random::<f64>() * acc;
                let i = cdf.partition_point(|&c| c <= u).min(p_bins.len() - 1);
                counts[i] += 1;
            }
            let max = counts
                .iter()
                .zip(p_bins)
                .filter_map(|(&c, &p)| cohens_d(c, n_trials, p).ok())
                .fold(0.0f64, |m, d| m.max(d.abs()));
            Ok(max)
        })
        .collect()
}

pub const STATS_HEADER: &str =
    "ra_low_hr,ra_high_hr,trials_n,p_bin,expected_mean,sigma,observed_count,cohens_d,tail_prob_ge,tail_prob_gt";

/// Stats table with fixed-precision columns so the bytes are reproducible.
pub fn write_stats_csv<W: Write>(mut out: W, stats: &[RaBinStats]) -> Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    for s in stats {
        let d = s.cohens_d.map(|d| format!("{d:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{:.4},{:.4},{},{:.9},{:.6},{:.6},{},{},{:.6e},{:.6e}",
            s.ra_low_hr,
            s.ra_high_hr,
            s.trials_n,
            s.p_bin,
            s.expected_mean,
            s.sigma,
            s.observed_count,
            d,
            s.tail_prob_ge,
            s.tail_prob_gt
        )?;
    }
    Ok(())
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<RaBinStats>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    let err = |line: u64, msg: String| Error::Archive {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (idx, line) in file.lines().enumerate() {
        let line = line?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim_end() != STATS_HEADER {
                return Err(err(lineno, "not a stats table (header mismatch)".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.trim_end().split(',').collect();
        if c.len() != 10 {
            return Err(err(lineno, format!("expected 10 columns, found {}", c.len())));
        }
        let f = |i: usize| c[i].parse::<f64>().map_err(|_| err(lineno, format!("bad number `{}`", c[i])));
        let u = |i: usize| c[i].parse::<u64>().map_err(|_| err(lineno, format!("bad count `{}`", c[i])));
        out.push(RaBinStats {
            ra_low_hr: f(0)?,
            ra_high_hr: f(1)?,
            trials_n: u(2)?,
            p_bin: f(3)?,
            expected_mean: f(4)?,
            sigma: f(5)?,
            observed_count: u(6)?,
            cohens_d: if c[7].is_empty() { None } else { Some(f(7)?) },
            tail_prob_ge: f(8)?,
            tail_prob_gt: f(9)?,
        });
    }
    Ok(out)
}
