//! Exact sparse synthesis of dual-element threshold crossings.
//!
//! For noise-only bins only the crossings matter downstream, and those are
//! rare. Within a segment of `N` bins with iid exponential powers, the
//! normalized powers `u = P / sum(P)` are uniform on the simplex, and a bin
//! crosses the threshold iff `u > t` for a convention-dependent `t`. That
//! gives closed forms for the number of crossings per element:
//!
//! `P(K = k) = sum_{j >= k} (-1)^(j-k) C(j,k) C(N,j) (1 - j t)^(N-1)`
//!
//! and, since East and West are independent with exchangeable positions,
//! the overlap of the two crossing sets is hypergeometric. Each frame draws
//! which segments contain at least one dual crossing by geometric skipping,
//! then samples overlap sizes, positions, and the conditional powers.
//! Segments carrying injected tones or RFI are synthesized densely.

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Geometric};
use statrs::function::gamma::ln_gamma;

use super::dense::synthesize_range;
use super::plan::FramePlan;
use crate::channelizer::{dual_crossings, Crossing};
use crate::config::{ObservationConfig, SnrConvention};
use crate::error::{Error, Result};

const KEEP_PMF: f64 = 1e-12;

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Distribution of the number of bins out of `n` whose normalized power
/// `u` exceeds `t`, when `u` is uniform on the simplex. Errors if the
/// alternating sum loses too much precision to be trusted.
pub fn exceedance_count_pmf(n: usize, t: f64) -> Result<Vec<f64>> {
    if n < 2 || !(t > 0.0) {
        return Err(Error::input("exceedance pmf needs n >= 2 and t > 0"));
    }
    if t >= 1.0 {
        return Ok(vec![1.0]);
    }
    // Largest j with j t < 1.
    let jmax = (((1.0 / t).ceil() as usize).saturating_sub(1)).min(n);
    let ln_term = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else {
            ln_choose(n, j) + (n - 1) as f64 * (-(j as f64) * t).ln_1p()
        }
    };
    let mut pmf = Vec::with_capacity(jmax + 1);
    for k in 0..=jmax {
        let mut sum = 0.0;
        let mut abs = 0.0;
        for j in k..=jmax {
            let term = (ln_choose(j, k) + ln_term(j)).exp();
            abs += term;
            sum += if (j - k) % 2 == 0 { term } else { -term };
        }
        let rounding = abs * 1e-15 * (jmax + 1) as f64;
        if rounding > 1e-3 * sum.abs().max(KEEP_PMF) {
            return Err(Error::Degenerate(format!(
                "exceedance pmf ill-conditioned at k={k} (sum {sum:e}, magnitude {abs:e})"
            )));
        }
        pmf.push(sum.max(0.0));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Degenerate(format!("exceedance pmf sums to {total}")));
    }
    Ok(pmf)
}

/// Per-element crossing threshold on normalized power.
fn normalized_threshold(n: usize, threshold_db: f64, convention: SnrConvention) -> f64 {
    let c = 10f64.powf(threshold_db / 10.0);
    match convention {
        SnrConvention::IncludeTestBin => c / n as f64,
        SnrConvention::ExcludeTestBin => c / (n as f64 - 1.0 + c),
    }
}

fn snr_from_normalized(n: usize, u: f64, convention: SnrConvention) -> f64 {
    match convention {
        SnrConvention::IncludeTestBin => 10.0 * (n as f64 * u).log10(),
        SnrConvention::ExcludeTestBin => 10.0 * ((n as f64 - 1.0) * u / (1.0 - u)).log10(),
    }
}

/// Hit table for one segment size.
#[derive(Debug, Clone)]
struct SegmentTable {
    n: usize,
    t: f64,
    /// `(east count, west count, overlap, cumulative weight)`.
    entries: Vec<(usize, usize, usize, f64)>,
    p_hit: f64,
}

impl SegmentTable {
    fn new(n: usize, t: f64) -> Result<Self> {
        let q = exceedance_count_pmf(n, t)?;
        let mut entries = Vec::new();
        let mut acc = 0.0;
        for (a, &qa) in q.iter().enumerate().skip(1) {
            if qa < KEEP_PMF {
                continue;
            }
            for (b, &qb) in q.iter().enumerate().skip(1) {
                if qb < KEEP_PMF {
                    continue;
                }
                for m in 1..=a.min(b) {
                    if b - m > n - a {
                        continue;
                    }
                    let hyper = (ln_choose(a, m) + ln_choose(n - a, b - m) - ln_choose(n, b)).exp();
                    acc += qa * qb * hyper;
                    entries.push((a, b, m, acc));
                }
            }
        }
        if !(0.0..1.0).contains(&acc) || !acc.is_finite() {
            return Err(Error::Degenerate(format!("segment hit probability {acc}")));
        }
        Ok(Self { n, t, entries, p_hit: acc })
    }

    fn draw_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize) {
        let u = rng.random::<f64>() * self.p_hit;
        let i = self.entries.partition_point(|e| e.3 <= u).min(self.entries.len() - 1);
        let (a, b, m, _) = self.entries[i];
        (a, b, m)
    }

    /// Normalized powers of the `count` crossing bins of one element,
    /// conditional on exactly `count` bins crossing.
    fn crossing_powers<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let (n, t) = (self.n, self.t);
        let slack = 1.0 - count as f64 * t;
        let mut e = vec![0.0f64; n];
        loop {
            for x in e.iter_mut() {
                *x = Exp1.sample(rng);
            }
            let s: f64 = e.iter().sum();
            if e[count..].iter().all(|&x| slack * x / s <= t) {
                return e[..count].iter().map(|&x| t + slack * x / s).collect();
            }
        }
    }

    fn sample_segment<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        first_bin: usize,
        convention: SnrConvention,
        out: &mut Vec<Crossing>,
    ) {
        let (a, b, m) = self.draw_counts(rng);
        let east = self.crossing_powers(rng, a);
        let west = self.crossing_powers(rng, b);
        let positions = index::sample(rng, self.n, m);
        for (k, pos) in positions.into_iter().enumerate() {
            out.push(Crossing {
                bin_index: first_bin + pos,
                snr_east_db: snr_from_normalized(self.n, east[k], convention),
                snr_west_db: snr_from_normalized(self.n, west[k], convention),
                phase_east_rad: PI - 2.0 * PI * rng.random::<f64>(),
                phase_west_rad: PI - 2.0 * PI * rng.random::<f64>(),
            });
        }
    }
}

/// Draws a frame's dual-element crossings without synthesizing noise bins.
#[derive(Debug, Clone)]
pub struct SparseSampler {
    bins_per_segment: usize,
    full_segments: usize,
    threshold_db: f64,
    convention: SnrConvention,
    full: SegmentTable,
    tail: Option<SegmentTable>,
    geometric: Option<Geometric>,
}

impl SparseSampler {
    pub fn new(cfg: &ObservationConfig, threshold_db: f64) -> Result<Self> {
        let bps = cfg.bins_per_segment;
        let n = cfg.n_bins();
        let conv = cfg.snr_convention;
        let full = SegmentTable::new(bps, normalized_threshold(bps, threshold_db, conv))?;
        let rem = n % bps;
        let tail = if rem > 0 {
            Some(SegmentTable::new(rem, normalized_threshold(rem, threshold_db, conv))?)
        } else {
            None
        };
        let geometric = if full.p_hit > 0.0 {
            Some(Geometric::new(full.p_hit).map_err(|e| Error::Degenerate(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            bins_per_segment: bps,
            full_segments: n / bps,
            threshold_db,
            convention: conv,
            full,
            tail,
            geometric,
        })
    }

    /// Probability that a full noise-only segment holds at least one dual crossing.
    pub fn segment_hit_probability(&self) -> f64 {
        self.full.p_hit
    }

    pub fn threshold_db(&self) -> f64 {
        self.threshold_db
    }

    /// All dual crossings of one frame, sorted by bin.
    pub fn sample_frame<R: Rng + ?Sized>(
        &self,
        cfg: &ObservationConfig,
        plan: &FramePlan,
        rng: &mut R,
    ) -> Result<Vec<Crossing>> {
        let bps = self.bins_per_segment;
        let touched = plan.touched_segments(bps);
        let mut out = Vec::new();

        if let Some(geo) = &self.geometric {
            let mut seg = 0u64;
            loop {
                seg = seg.saturating_add(geo.sample(rng));
                if seg >= self.full_segments as u64 {
                    break;
                }
                let s = seg as usize;
                if touched.binary_search(&s).is_err() {
                    self.full.sample_segment(rng, s * bps, self.convention, &mut out);
                }
                seg += 1;
            }
        }
        if let Some(tail) = &self.tail {
            let s = self.full_segments;
            if touched.binary_search(&s).is_err() && tail.p_hit > 0.0 && rng.random::<f64>() < tail.p_hit {
                tail.sample_segment(rng, s * bps, self.convention, &mut out);
            }
        }

        let n = cfg.n_bins();
        for &s in &touched {
            let range = s * bps..((s + 1) * bps).min(n);
            let start = range.start;
            let (e, w) = synthesize_range(cfg, plan, rng, range);
            out.extend(dual_crossings(&e, &w, start, bps, self.threshold_db, self.convention)?);
        }
        out.sort_by_key(|c| c.bin_index);
        Ok(out)
    }
}
