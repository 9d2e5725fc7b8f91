#![allow(dead_code)]

use pulsepair::{ExperimentConfig, ObservationConfig};

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Critical KS distance at significance 0.001.
pub fn ks_critical(n: usize, m: usize) -> f64 {
    1.95 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// A narrow band with one simulated day, cheap enough for tests.
pub fn small_observation(band_hz: f64, days: u32) -> ObservationConfig {
    let mut o = ObservationConfig::default();
    o.band_high_hz = o.band_low_hz + band_hz;
    o.duration_days = days;
    o
}

/// The scaled search configuration shipped in `configs/scaled.toml`.
pub fn scaled_config() -> ExperimentConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/scaled.toml");
    ExperimentConfig::load(std::path::Path::new(path)).expect("scaled config")
}

/// `n` level-1 events spread over `frames` frames with random bins, SNRs,
/// phases and pointing RAs inside the default analysis window.
pub fn random_events(n: usize, frames: u64, seed: u64) -> Vec<pulsepair::pairdetect::PulseEvent> {
    use rand::{Rng, SeedableRng};
    let cfg = ObservationConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<_> = (0..n)
        .map(|_| {
            let frame_index = rng.random_range(0..frames);
            let bin_index = rng.random_range(0..cfg.n_bins());
            pulsepair::pairdetect::PulseEvent {
                utc_s: cfg.start_utc_s + frame_index as f64 * cfg.frame_seconds,
                frame_index,
                bin_index,
                rf_freq_hz: cfg.bin_freq_hz(bin_index),
                snr_east_db: rng.random_range(8.5..20.0),
                snr_west_db: rng.random_range(8.5..20.0),
                phase_east_rad: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                phase_west_rad: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                polarization_tag: pulsepair::PolTag::X,
                ra_pointing_hr: 3.3 + 4.0 * frame_index as f64 / frames as f64,
            }
        })
        .collect();
    events.sort_by_key(|e| (e.frame_index, e.bin_index));
    events
}
