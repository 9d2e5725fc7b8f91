//! Time-domain path: complex baseband samples covering the RF band, then
//! the unit-gain channelizer FFT.
//!
//! With a `1/N` forward transform, white noise of per-sample variance `N`
//! has unit mean bin power, matching the frequency-domain path.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use super::dense::{add_injections, complex_normal};
use super::plan::FramePlan;
use crate::channelizer::fft_frame;
use crate::config::ObservationConfig;
use crate::error::Result;

/// Complex samples for both elements at `n_bins / frame_seconds` samples/s.
pub fn samples<R: Rng + ?Sized>(
    cfg: &ObservationConfig,
    plan: &FramePlan,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = cfg.n_bins();
    let noise_power = n as f64;
    let mut east: Vec<Complex64> = (0..n).map(|_| complex_normal(rng, noise_power)).collect();
    let mut west: Vec<Complex64> = (0..n).map(|_| complex_normal(rng, noise_power)).collect();

    if !plan.tones.is_empty() || !plan.broadband.is_empty() {
        // Injections are specified per bin. The unnormalized inverse FFT
        // puts them in the time domain so the 1/N forward FFT returns them.
        let mut se = vec![Complex64::new(0.0, 0.0); n];
        let mut sw = se.clone();
        add_injections(cfg, plan, rng, 0..n, &mut se, &mut sw);
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        ifft.process(&mut se);
        ifft.process(&mut sw);
        east.iter_mut().zip(&se).for_each(|(x, s)| *x += s);
        west.iter_mut().zip(&sw).for_each(|(x, s)| *x += s);
    }
    (east, west)
}

pub(super) fn synthesize<R: Rng + ?Sized>(
    cfg: &ObservationConfig,
    plan: &FramePlan,
    rng: &mut R,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let (east, west) = samples(cfg, plan, rng);
    let rate = cfg.n_bins() as f64 / cfg.frame_seconds;
    Ok((
        fft_frame(&east, rate, cfg.frame_seconds)?,
        fft_frame(&west, rate, cfg.frame_seconds)?,
    ))
}
