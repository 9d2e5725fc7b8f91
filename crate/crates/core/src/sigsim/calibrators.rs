//! Synthetic calibrator data: continuum drift scans and broadband
//! correlator frames.

use std::f64::consts::{LN_2, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dense::complex_normal;
use super::geometric_delay;
use crate::calib::{
    lst_hours, next_utc_at_lst, pointing_hour_angle_offset_hr, wrap_hours, CorrelatorFrames, DriftScan, Site,
    SIDEREAL_HR_PER_S,
};
use crate::error::{Error, Result};

/// A calibrator drifting through a fixed beam.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftScanSpec {
    pub site: Site,
    pub source_name: String,
    pub source_ra_hr: f64,
    /// Declination of both the source and the beam.
    pub dec_deg: f64,
    /// Beam FWHM as an RA angle in degrees.
    pub fwhm_deg: f64,
    /// Peak-over-floor continuum ratio in dB.
    pub continuum_snr_db: f64,
    pub floor: f64,
    /// Gaussian noise rms as a fraction of `floor`.
    pub noise_rel: f64,
    pub sample_interval_s: f64,
    /// RA span covered, centred on the transit of the beam centre.
    pub span_hr: f64,
    pub start_utc_s: f64,
    pub seed: u64,
}

impl Default for DriftScanSpec {
    fn default() -> Self {
        Self {
            site: Site {
                latitude_deg: crate::config::DEFAULT_LATITUDE_DEG,
                longitude_deg: crate::config::DEFAULT_LONGITUDE_DEG,
                azimuth_deg: 180.0,
            },
            source_name: "calibrator".into(),
            source_ra_hr: 5.25,
            dec_deg: -8.0,
            fwhm_deg: 9.0,
            continuum_snr_db: 0.18,
            floor: 1.0,
            noise_rel: 0.01,
            sample_interval_s: 1.0,
            span_hr: 3.0,
            start_utc_s: crate::config::DEFAULT_START_UTC_S,
            seed: 1,
        }
    }
}

/// Samples `floor * (1 + A exp(-4 ln2 (15 dRA)^2 / FWHM^2)) + noise` where
/// `A = 10^(snr/10) - 1` and `dRA` is the beam-centre offset from the source.
pub fn simulate_drift_scan(spec: &DriftScanSpec) -> Result<DriftScan> {
    if spec.sample_interval_s <= 0.0 || spec.span_hr <= 0.0 || spec.fwhm_deg <= 0.0 || spec.noise_rel < 0.0 {
        return Err(Error::input("drift scan spec needs positive interval, span and FWHM"));
    }
    let dha = pointing_hour_angle_offset_hr(spec.site.azimuth_deg, spec.dec_deg, spec.site.latitude_deg)?;
    let start_lst = (spec.source_ra_hr - 0.5 * spec.span_hr - dha).rem_euclid(24.0);
    let t0 = next_utc_at_lst(start_lst, spec.start_utc_s, spec.site.longitude_deg);
    let count = (spec.span_hr / SIDEREAL_HR_PER_S / spec.sample_interval_s).floor() as usize + 1;
    let amp = 10f64.powf(spec.continuum_snr_db / 10.0) - 1.0;
    let noise = Normal::new(0.0, spec.noise_rel * spec.floor).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = (0..count)
        .map(|i| {
            let t = t0 + i as f64 * spec.sample_interval_s;
            let ra = lst_hours(t, spec.site.longitude_deg) + dha;
            let dx = 15.0 * wrap_hours(ra - spec.source_ra_hr);
            let beam = (-4.0 * LN_2 * dx * dx / (spec.fwhm_deg * spec.fwhm_deg)).exp();
            (t, spec.floor * (1.0 + amp * beam) + noise.sample(&mut rng))
        })
        .collect();
    Ok(DriftScan {
        samples,
        source_name: spec.source_name.clone(),
        dec_deg: spec.dec_deg,
    })
}

/// A broadband calibrator seen by the two-element correlator.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSpec {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub channels: usize,
    pub frames: usize,
    /// Correlated calibrator power per channel, relative to unit noise.
    pub calibrator_snr: f64,
    pub tau_int_true_s: f64,
    pub baseline_meters: f64,
    pub dec_deg: f64,
    pub hour_angle_rad: f64,
    pub seed: u64,
}

impl Default for CorrelatorSpec {
    fn default() -> Self {
        Self {
            band_low_hz: 1405e6,
            band_high_hz: 1455e6,
            channels: 1024,
            frames: 64,
            calibrator_snr: 0.1,
            tau_int_true_s: 0.0,
            baseline_meters: 30.0,
            dec_deg: -8.0,
            hour_angle_rad: 0.0,
            seed: 1,
        }
    }
}

/// Per-channel cross-spectra `W conj(E)` of a calibrator plus independent
/// unit noise in each element, using the simulator's phase convention.
pub fn simulate_correlator_frames(spec: &CorrelatorSpec) -> Result<CorrelatorFrames> {
    if spec.channels == 0 || spec.frames == 0 || spec.band_high_hz <= spec.band_low_hz {
        return Err(Error::input("correlator spec needs channels, frames and a valid band"));
    }
    let width = (spec.band_high_hz - spec.band_low_hz) / spec.channels as f64;
    let freqs: Vec<f64> = (0..spec.channels)
        .map(|k| spec.band_low_hz + (k as f64 + 0.5) * width)
        .collect();
    let tau_geom = geometric_delay(spec.baseline_meters, spec.dec_deg, spec.hour_angle_rad);
    let rot: Vec<Complex64> = freqs
        .iter()
        .map(|&f| Complex64::from_polar(1.0, TAU * f * (tau_geom - spec.tau_int_true_s)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let visibilities = (0..spec.frames)
        .map(|_| {
            rot.iter()
                .map(|r| {
                    let s = complex_normal(&mut rng, spec.calibrator_snr);
                    let e = s + complex_normal(&mut rng, 1.0);
                    let w = s * r + complex_normal(&mut rng, 1.0);
                    w * e.conj()
                })
                .collect()
        })
        .collect();
    Ok(CorrelatorFrames {
        channel_freqs_hz: freqs,
        visibilities,
    })
}
