//! Differential interferometer phase metric and the second-level filter.
//!
//! For a bin-sorted pair `(a, b)` the metric is
//!
//! `wrap[(phi_W(b) - phi_E(b)) - (phi_W(a) - phi_E(a)) + 2 pi df tau_int]`
//!
//! with `df = rf(b) - rf(a)`. A co-directional pair arriving at transit
//! through an instrument delay `tau_int` has element phase differences
//! `-2 pi f tau_int`, so the correction term cancels the slope and the
//! metric sits at zero.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;

use crate::channelizer::wrap_phase;
use crate::config::FilterParams;
use crate::error::{Error, Result};
use crate::pairdetect::{delta_f_filter, PairCandidate};
use crate::skystats::RaBinStats;

/// Metric for one candidate. `flip_sign` negates the correction term.
pub fn phase_metric(c: &PairCandidate, tau_int_s: f64, flip_sign: bool) -> Result<f64> {
    let phases = [
        c.event_a.phase_east_rad,
        c.event_a.phase_west_rad,
        c.event_b.phase_east_rad,
        c.event_b.phase_west_rad,
    ];
    if phases.iter().any(|p| !p.is_finite()) || !c.delta_f_hz.is_finite() {
        return Err(Error::input("candidate is missing a phase or frequency"));
    }
    let sign = if flip_sign { -1.0 } else { 1.0 };
    let raw = c.event_b.interferometer_phase() - c.event_a.interferometer_phase() + sign * TAU * c.delta_f_hz * tau_int_s;
    Ok(wrap_phase(raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterOutcome {
    Pass,
    ZeroDeltaF,
    DeltaFOutOfRange,
    PhaseOutOfRange,
}

impl FilterOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterOutcome::Pass => "pass",
            FilterOutcome::ZeroDeltaF => "zero_delta_f",
            FilterOutcome::DeltaFOutOfRange => "delta_f_out_of_range",
            FilterOutcome::PhaseOutOfRange => "phase_out_of_range",
        }
    }
}

/// Per-candidate record kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDiagnostic {
    pub delta_f_hz: f64,
    pub metric_rad: f64,
    pub outcome: FilterOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct SecondLevelResult {
    pub passed: Vec<PairCandidate>,
    pub diagnostics: Vec<FilterDiagnostic>,
}

impl SecondLevelResult {
    pub fn count(&self, outcome: FilterOutcome) -> usize {
        self.diagnostics.iter().filter(|d| d.outcome == outcome).count()
    }

    /// `(delta_f_hz, metric_rad, outcome)` rows with a header.
    pub fn write_diagnostics_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "delta_f_hz,metric_rad,outcome")?;
        for d in &self.diagnostics {
            writeln!(out, "{:.1},{:.6},{}", d.delta_f_hz, d.metric_rad, d.outcome.as_str())?;
        }
        Ok(())
    }
}

fn classify(c: &PairCandidate, metric: f64, p: &FilterParams) -> FilterOutcome {
    if c.delta_f_hz == 0.0 {
        FilterOutcome::ZeroDeltaF
    } else if !delta_f_filter(c, p.log_delta_f_low, p.log_delta_f_high, p.edge_tolerance_decades) {
        FilterOutcome::DeltaFOutOfRange
    } else if metric.abs() > p.filter_halfwidth_rad {
        FilterOutcome::PhaseOutOfRange
    } else {
        FilterOutcome::Pass
    }
}

/// Keeps candidates with `|metric| <= halfwidth` (closed) whose frequency
/// spacing passes the delta-f range. Passed candidates carry their metric.
pub fn second_level_filter(candidates: &[PairCandidate], params: &FilterParams) -> Result<SecondLevelResult> {
    let mut result = SecondLevelResult::default();
    for c in candidates {
        let metric = phase_metric(c, params.tau_int_s, params.flip_correction_sign)?;
        let outcome = classify(c, metric, params);
        result.diagnostics.push(FilterDiagnostic {
            delta_f_hz: c.delta_f_hz,
            metric_rad: metric,
            outcome,
        });
        if outcome == FilterOutcome::Pass {
            let mut kept = c.clone();
            kept.phase_metric_rad = Some(metric);
            result.passed.push(kept);
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauTuning {
    pub tau_best_s: f64,
    pub d_best: f64,
    /// `(tau, objective)` for every grid point, in grid order.
    pub objective: Vec<(f64, f64)>,
}

/// Grid search over `tau_int` maximizing the largest Cohen's d among RA
/// bins whose centre lies in `[fwhm_low_hr, fwhm_high_hr]`.
///
/// `stats_fn` turns second-level survivors into per-bin statistics. The
/// estimate is the midpoint of the widest contiguous run of grid points
/// sharing the maximum (so it can fall halfway between grid points); equal
/// runs go to the one nearest the centre of the search range, then to the
/// lower delay. Grid points are evaluated in parallel on the current rayon
/// pool; the reduction is order-independent.
pub fn tune_tau_int<F>(
    candidates: &[PairCandidate],
    params: &FilterParams,
    fwhm_low_hr: f64,
    fwhm_high_hr: f64,
    stats_fn: F,
) -> Result<TauTuning>
where
    F: Fn(&[PairCandidate]) -> Result<Vec<RaBinStats>> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::input("no candidates to tune against"));
    }
    let (lo, hi, step) = (params.tau_search_low_s, params.tau_search_high_s, params.tau_search_step_s);
    if !(step > 0.0) || hi < lo {
        return Err(Error::config("invalid tau search grid"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let center = 0.5 * (lo + hi);
    let objective: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let tau = lo + i as f64 * step;
            let p = FilterParams {
                tau_int_s: tau,
                ..params.clone()
            };
            let passed = second_level_filter(candidates, &p)?.passed;
            let stats = stats_fn(&passed)?;
            let best = stats
                .iter()
                .filter(|s| {
                    let mid = 0.5 * (s.ra_low_hr + s.ra_high_hr);
                    mid >= fwhm_low_hr && mid <= fwhm_high_hr
                })
                .filter_map(|s| s.cohens_d)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((tau, best))
        })
        .collect::<Result<Vec<_>>>()?;

    let d_best = objective.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    // Pairs drop out symmetrically on both sides of the true delay, so the
    // objective is flat around it: report the middle of the widest run of
    // grid points at the maximum.
    let tol = 1e-9 * d_best.abs().max(1.0);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, o) in objective.iter().enumerate() {
        if (o.1 - d_best).abs() <= tol {
            match runs.last_mut() {
                Some(r) if r.1 + 1 == i => r.1 = i,
                _ => runs.push((i, i)),
            }
        }
    }
    let mid = |r: &(usize, usize)| 0.5 * (objective[r.0].0 + objective[r.1].0);
    let tau_best_s = runs
        .iter()
        .min_by(|a, b| {
            (b.1 - b.0)
                .cmp(&(a.1 - a.0))
                .then((mid(a) - center).abs().total_cmp(&(mid(b) - center).abs()))
                .then(mid(a).total_cmp(&mid(b)))
        })
        .map(mid)
        .unwrap_or(center);
    Ok(TauTuning {
        tau_best_s,
        d_best,
        objective,
    })
}
