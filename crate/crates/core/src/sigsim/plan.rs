//! Deterministic per-frame injection plan: pulse-pair tones and RFI.

use std::f64::consts::{LN_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::schedule::{FrameInfo, FrameSchedule};
use super::{frame_rng, geometric_delay, Stream};
use crate::calib::wrap_hours;
use crate::config::{ObservationConfig, RfiDirection, RfiKind, RfiSpec, SourceSpec};
use crate::error::{Error, Result};

/// A narrowband component confined to one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub bin: usize,
    pub east: Complex64,
    pub west: Complex64,
}

/// Band-limited Gaussian interference over `first_bin..end_bin`. The West
/// copy is the East copy rotated by `2 pi f west_delay_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadbandPatch {
    pub first_bin: usize,
    pub end_bin: usize,
    pub power: f64,
    pub west_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePlan {
    pub info: FrameInfo,
    pub tones: Vec<Tone>,
    pub broadband: Vec<BroadbandPatch>,
}

impl FramePlan {
    /// Sorted, de-duplicated indices of segments touched by any injected component.
    pub fn touched_segments(&self, bins_per_segment: usize) -> Vec<usize> {
        let mut segs: Vec<usize> = self.tones.iter().map(|t| t.bin / bins_per_segment).collect();
        for p in &self.broadband {
            if p.end_bin > p.first_bin {
                segs.extend(p.first_bin / bins_per_segment..=(p.end_bin - 1) / bins_per_segment);
            }
        }
        segs.sort_unstable();
        segs.dedup();
        segs
    }
}

fn delta_bins_range(cfg: &ObservationConfig, s: &SourceSpec) -> (usize, usize) {
    let lo = (s.delta_f_min_hz * cfg.frame_seconds - 1e-9).ceil().max(1.0) as usize;
    let hi = (s.delta_f_max_hz * cfg.frame_seconds + 1e-9).floor() as usize;
    (lo, hi)
}

pub(super) fn validate_source(cfg: &ObservationConfig, s: &SourceSpec) -> Result<()> {
    if !s.snr_target_db.is_finite() || !s.pulse_rate_per_frame.is_finite() || s.pulse_rate_per_frame < 0.0 {
        return Err(Error::config("source SNR and pulse rate must be finite and non-negative"));
    }
    let into_window = (s.ra_hr - cfg.ra_window_low_hr).rem_euclid(24.0);
    if into_window > cfg.ra_window_hr() {
        return Err(Error::config(format!(
            "source RA {} h is outside the simulated transit window {}..{} h",
            s.ra_hr, cfg.ra_window_low_hr, cfg.ra_window_high_hr
        )));
    }
    if (s.dec_deg - cfg.dec_deg).abs() > cfg.beam_fwhm_deg {
        return Err(Error::config(format!(
            "source declination {} deg is outside the beam pointed at {} deg",
            s.dec_deg, cfg.dec_deg
        )));
    }
    let (lo, hi) = delta_bins_range(cfg, s);
    if lo > hi {
        return Err(Error::config("source delta_f range is empty after bin quantization"));
    }
    if hi >= cfg.n_bins() {
        return Err(Error::config(format!(
            "source delta_f up to {} Hz does not fit in the {} Hz RF band",
            s.delta_f_max_hz,
            cfg.band_high_hz - cfg.band_low_hz
        )));
    }
    if let Some(h) = s.active_halfwidth_hr {
        if h <= 0.0 {
            return Err(Error::config("active_halfwidth_hr must be positive"));
        }
    }
    Ok(())
}

pub(super) fn validate_rfi(cfg: &ObservationConfig, r: &RfiSpec) -> Result<()> {
    if !(0.0..=1.0).contains(&r.duty_cycle) {
        return Err(Error::config("rfi duty_cycle must lie in [0, 1]"));
    }
    if r.power_rel_noise < 0.0 || !r.power_rel_noise.is_finite() {
        return Err(Error::config("rfi power must be finite and non-negative"));
    }
    if r.rf_freq_hz < cfg.band_low_hz || r.rf_freq_hz >= cfg.band_high_hz {
        return Err(Error::config(format!("rfi at {} Hz is outside the RF band", r.rf_freq_hz)));
    }
    Ok(())
}

/// Power response of the Gaussian main lobe to a source, using RA offsets
/// as RA-angle degrees (15 deg per hour).
pub fn beam_gain(cfg: &ObservationConfig, ra_pointing_hr: f64, src: &SourceSpec) -> f64 {
    let dx = 15.0 * wrap_hours(ra_pointing_hr - src.ra_hr);
    let dy = src.dec_deg - cfg.dec_deg;
    (-4.0 * LN_2 * (dx * dx + dy * dy) / (cfg.beam_fwhm_deg * cfg.beam_fwhm_deg)).exp()
}

#[derive(Debug, Clone, Copy)]
struct InjectedPair {
    bin_a: usize,
    bin_b: usize,
    phase_a: f64,
    phase_b: f64,
}

fn pairs_started(cfg: &ObservationConfig, info: &FrameInfo, src: &SourceSpec, idx: usize) -> Vec<InjectedPair> {
    if src.pulse_rate_per_frame <= 0.0 {
        return Vec::new();
    }
    if let Some(h) = src.active_halfwidth_hr {
        if wrap_hours(info.ra_pointing_hr - src.ra_hr).abs() > h {
            return Vec::new();
        }
    }
    let rate = src.pulse_rate_per_frame * beam_gain(cfg, info.ra_pointing_hr, src);
    if rate <= 0.0 {
        return Vec::new();
    }
    let mut rng = frame_rng(cfg.seed, info.frame_index, Stream::Source as u64 + idx as u64);
    let count = Poisson::new(rate).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
    let (lo, hi) = delta_bins_range(cfg, src);
    let (ln_lo, ln_hi) = ((lo as f64).ln(), (hi as f64 + 1.0).ln());
    let n = cfg.n_bins();
    (0..count)
        .map(|_| {
            let d = (rng.random_range(ln_lo..ln_hi).exp().floor() as usize).clamp(lo, hi);
            let bin_a = rng.random_range(0..n - d);
            InjectedPair {
                bin_a,
                bin_b: bin_a + d,
                phase_a: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                phase_b: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            }
        })
        .collect()
}

fn pulse_tone(cfg: &ObservationConfig, info: &FrameInfo, src: &SourceSpec, bin: usize, phase: f64) -> Tone {
    let amp = 10f64.powf(src.snr_target_db / 20.0);
    let ha_rad = wrap_hours(info.lst_hr - src.ra_hr) * std::f64::consts::PI / 12.0;
    let tau_geom = geometric_delay(cfg.baseline_meters, src.dec_deg, ha_rad);
    let f = cfg.bin_freq_hz(bin);
    let dphi = TAU * f * (tau_geom - cfg.tau_int_true_s);
    Tone {
        bin,
        east: Complex64::from_polar(amp, phase),
        west: Complex64::from_polar(amp, phase + dphi),
    }
}

fn rfi_components(cfg: &ObservationConfig, rfi: &[RfiSpec], frame_index: u64, plan: &mut FramePlan) {
    if rfi.is_empty() {
        return;
    }
    let mut rng = frame_rng(cfg.seed, frame_index, Stream::Rfi as u64);
    let n = cfg.n_bins();
    for r in rfi {
        let present = rng.random::<f64>() < r.duty_cycle;
        let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        if !present {
            continue;
        }
        let west_delay_s = match r.direction {
            RfiDirection::CommonMode => 0.0,
            RfiDirection::Sidelobe => r.sidelobe_delay_s - cfg.tau_int_true_s,
        };
        let center = (((r.rf_freq_hz - cfg.band_low_hz) * cfg.frame_seconds).round() as usize).min(n - 1);
        match r.kind {
            RfiKind::NarrowbandCarrier => {
                let amp = r.power_rel_noise.sqrt();
                let f = cfg.bin_freq_hz(center);
                plan.tones.push(Tone {
                    bin: center,
                    east: Complex64::from_polar(amp, phase),
                    west: Complex64::from_polar(amp, phase + TAU * f * west_delay_s),
                });
            }
            RfiKind::BroadbandFlat => {
                let width = r
                    .bandwidth_hz
                    .map(|b| (b * cfg.frame_seconds).round() as usize)
                    .unwrap_or(cfg.bins_per_segment)
                    .max(1);
                let first_bin = center.saturating_sub(width / 2);
                let end_bin = (first_bin + width).min(n);
                plan.broadband.push(BroadbandPatch {
                    first_bin,
                    end_bin,
                    power: r.power_rel_noise,
                    west_delay_s,
                });
            }
        }
    }
}

pub(super) fn build(
    cfg: &ObservationConfig,
    schedule: &FrameSchedule,
    sources: &[SourceSpec],
    rfi: &[RfiSpec],
    frame_index: u64,
) -> FramePlan {
    let info = schedule.info(frame_index);
    let mut plan = FramePlan {
        info,
        tones: Vec::new(),
        broadband: Vec::new(),
    };
    for (idx, src) in sources.iter().enumerate() {
        if src.polarization_tag != cfg.polarization {
            continue;
        }
        let dt = src.delta_t_frames as u64;
        for p in pairs_started(cfg, &info, src, idx) {
            plan.tones.push(pulse_tone(cfg, &info, src, p.bin_a, p.phase_a));
            if dt == 0 {
                plan.tones.push(pulse_tone(cfg, &info, src, p.bin_b, p.phase_b));
            }
        }
        if dt > 0 && frame_index >= dt && schedule.same_transit(frame_index - dt, frame_index) {
            let start = schedule.info(frame_index - dt);
            for p in pairs_started(cfg, &start, src, idx) {
                plan.tones.push(pulse_tone(cfg, &info, src, p.bin_b, p.phase_b));
            }
        }
    }
    rfi_components(cfg, rfi, frame_index, &mut plan);
    plan
}
