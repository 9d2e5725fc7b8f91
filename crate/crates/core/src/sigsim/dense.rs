//! Frequency-domain synthesis: unit-power circular Gaussian noise per bin,
//! independent between elements, plus the planned tones and RFI patches.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::plan::FramePlan;
use crate::config::ObservationConfig;

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power).sqrt() * FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Adds the planned tones and RFI patches falling in `range` to buffers
/// that hold bins `range` of each element.
pub(super) fn add_injections<R: Rng + ?Sized>(
    cfg: &ObservationConfig,
    plan: &FramePlan,
    rng: &mut R,
    range: Range<usize>,
    east: &mut [Complex64],
    west: &mut [Complex64],
) {
    for t in &plan.tones {
        if range.contains(&t.bin) {
            east[t.bin - range.start] += t.east;
            west[t.bin - range.start] += t.west;
        }
    }
    for p in &plan.broadband {
        let lo = p.first_bin.max(range.start);
        let hi = p.end_bin.min(range.end);
        for bin in lo..hi {
            let s = complex_normal(rng, p.power);
            let rot = Complex64::from_polar(1.0, TAU * cfg.bin_freq_hz(bin) * p.west_delay_s);
            east[bin - range.start] += s;
            west[bin - range.start] += s * rot;
        }
    }
}

/// Synthesizes bins `range` of both elements.
pub(super) fn synthesize_range<R: Rng + ?Sized>(
    cfg: &ObservationConfig,
    plan: &FramePlan,
    rng: &mut R,
    range: Range<usize>,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = range.len();
    let mut east = Vec::with_capacity(n);
    let mut west = Vec::with_capacity(n);
    for _ in 0..n {
        east.push(complex_normal(rng, 1.0));
        west.push(complex_normal(rng, 1.0));
    }
    add_injections(cfg, plan, rng, range, &mut east, &mut west);
    (east, west)
}

pub(super) fn synthesize<R: Rng + ?Sized>(
    cfg: &ObservationConfig,
    plan: &FramePlan,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    synthesize_range(cfg, plan, rng, 0..cfg.n_bins())
}
