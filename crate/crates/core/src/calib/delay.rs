//! Instrument-delay estimation from broadband correlator data.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Cross-spectra from the broadband correlator: one visibility
/// `V(f) = X_west(f) * conj(X_east(f))` per channel per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorFrames {
    pub channel_freqs_hz: Vec<f64>,
    pub visibilities: Vec<Vec<Complex64>>,
}

/// Minimum ratio of peak delay response to the incoherent channel sum
/// for a calibrator to count as detected.
const DETECTION_RATIO: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayScan {
    pub tau_int_s: f64,
    pub uncertainty_s: f64,
    /// `(tap delay, coherent response)` for every tap evaluated.
    pub response: Vec<(f64, f64)>,
}

/// Steps each delay tap across `[tap_low_s, tap_high_s]` and returns the tap
/// at which the frame-averaged cross-spectrum adds up coherently, i.e. where
/// the calibrator's correlator phase is flattest across the band.
///
/// The response at tap `tau` is `|sum_f V(f) exp(+i 2 pi f tau)|`, which peaks
/// at the instrument delay under the convention
/// `phase(W) - phase(E) = 2 pi f (tau_geom - tau_int)`.
pub fn tau_int_scan(frames: &CorrelatorFrames, tap_low_s: f64, tap_high_s: f64, tap_step_s: f64) -> Result<DelayScan> {
    if tap_step_s <= 0.0 || tap_high_s < tap_low_s {
        return Err(Error::input("invalid tap range"));
    }
    let nch = frames.channel_freqs_hz.len();
    if nch == 0 || frames.visibilities.is_empty() {
        return Err(Error::input("no correlator data"));
    }
    let mut mean = vec![Complex64::new(0.0, 0.0); nch];
    for frame in &frames.visibilities {
        if frame.len() != nch {
            return Err(Error::input("correlator frame has the wrong channel count"));
        }
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    let scale = 1.0 / frames.visibilities.len() as f64;
    mean.iter_mut().for_each(|m| *m *= scale);

    let n_taps = ((tap_high_s - tap_low_s) / tap_step_s).round() as usize + 1;
    let response: Vec<(f64, f64)> = (0..n_taps)
        .map(|i| {
            let tau = tap_low_s + i as f64 * tap_step_s;
            let sum: Complex64 = mean
                .iter()
                .zip(&frames.channel_freqs_hz)
                .map(|(v, &f)| v * Complex64::from_polar(1.0, TAU * f * tau))
                .sum();
            (tau, sum.norm())
        })
        .collect();

    let &(tau_best, peak) = response
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one tap");
    let incoherent = mean.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if incoherent == 0.0 || peak / incoherent < DETECTION_RATIO {
        return Err(Error::NoSignal(format!(
            "peak delay response is {:.2}x the incoherent level",
            if incoherent == 0.0 { 0.0 } else { peak / incoherent }
        )));
    }
    Ok(DelayScan {
        tau_int_s: tau_best,
        uncertainty_s: tap_step_s,
        response,
    })
}
