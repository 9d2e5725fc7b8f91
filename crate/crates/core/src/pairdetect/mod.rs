//! First-level filtering, pulse events, bin-sorted pairing and the
//! level-1 archive.

mod archive;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::channelizer::{BinMeasurement, Crossing};
use crate::config::{DetectionParams, Element, ObservationConfig, PolTag};
use crate::error::{Error, Result};
use crate::sigsim::FrameInfo;

pub use archive::{
    format_sig6, quantize_event, read_level1_archive, write_level1_archive, Level1Writer, ARCHIVE_HEADER,
    SCHEMA_VERSION,
};

/// A bin in which both elements crossed the SNR threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub utc_s: f64,
    pub frame_index: u64,
    pub bin_index: usize,
    pub rf_freq_hz: f64,
    pub snr_east_db: f64,
    pub snr_west_db: f64,
    pub phase_east_rad: f64,
    pub phase_west_rad: f64,
    pub polarization_tag: PolTag,
    pub ra_pointing_hr: f64,
}

impl PulseEvent {
    /// `phase(W) - phase(E)`, unwrapped.
    pub fn interferometer_phase(&self) -> f64 {
        self.phase_west_rad - self.phase_east_rad
    }
}

/// Consecutive events `a` (index i-1) and `b` (index i) in bin-sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCandidate {
    pub event_a: PulseEvent,
    pub event_b: PulseEvent,
    pub delta_t_s: f64,
    /// `rf_freq(b) - rf_freq(a)`.
    pub delta_f_hz: f64,
    /// `log10(|delta_f| / 1 MHz)`; `-inf` when the two events share a bin.
    pub log10_delta_f_mhz: f64,
    pub phase_metric_rad: Option<f64>,
    pub ra_pointing_hr: f64,
}

impl PairCandidate {
    pub fn new(a: PulseEvent, b: PulseEvent) -> Self {
        let delta_f_hz = b.rf_freq_hz - a.rf_freq_hz;
        PairCandidate {
            delta_t_s: (b.utc_s - a.utc_s).abs(),
            delta_f_hz,
            log10_delta_f_mhz: (delta_f_hz.abs() / 1e6).log10(),
            phase_metric_rad: None,
            ra_pointing_hr: b.ra_pointing_hr,
            event_a: a,
            event_b: b,
        }
    }
}

/// RF band limits and zero-IF excision, both closed intervals.
pub fn passes_band(cfg: &ObservationConfig, rf_freq_hz: f64) -> bool {
    rf_freq_hz >= cfg.band_low_hz
        && rf_freq_hz <= cfg.band_high_hz
        && !(rf_freq_hz >= cfg.excision_low_hz && rf_freq_hz <= cfg.excision_high_hz)
}

/// Dual-element threshold on aligned per-bin measurements.
pub fn first_level_filter(
    cfg: &ObservationConfig,
    params: &DetectionParams,
    east: &[BinMeasurement],
    west: &[BinMeasurement],
) -> Result<Vec<PulseEvent>> {
    if east.len() != west.len() {
        return Err(Error::Misaligned {
            position: east.len().min(west.len()),
            detail: format!("east has {} measurements, west {}", east.len(), west.len()),
        });
    }
    let mut out = Vec::new();
    for (i, (e, w)) in east.iter().zip(west).enumerate() {
        if e.frame_index != w.frame_index || e.bin_index != w.bin_index {
            return Err(Error::Misaligned {
                position: i,
                detail: format!(
                    "east (frame {}, bin {}) vs west (frame {}, bin {})",
                    e.frame_index, e.bin_index, w.frame_index, w.bin_index
                ),
            });
        }
        if e.element != Element::East || w.element != Element::West {
            return Err(Error::Misaligned {
                position: i,
                detail: "element labels are swapped".into(),
            });
        }
        if e.snr_db > params.snr_threshold_db && w.snr_db > params.snr_threshold_db && passes_band(cfg, e.rf_freq_hz)
        {
            out.push(PulseEvent {
                utc_s: e.utc_s,
                frame_index: e.frame_index,
                bin_index: e.bin_index,
                rf_freq_hz: e.rf_freq_hz,
                snr_east_db: e.snr_db,
                snr_west_db: w.snr_db,
                phase_east_rad: e.phase_rad,
                phase_west_rad: w.phase_rad,
                polarization_tag: e.polarization_tag,
                ra_pointing_hr: e.ra_pointing_hr,
            });
        }
    }
    Ok(out)
}

/// Same rule as [`first_level_filter`] applied to crossings that were
/// already thresholded per element.
pub fn events_from_crossings(
    cfg: &ObservationConfig,
    params: &DetectionParams,
    info: &FrameInfo,
    crossings: &[Crossing],
) -> Vec<PulseEvent> {
    crossings
        .iter()
        .filter(|c| c.snr_east_db > params.snr_threshold_db && c.snr_west_db > params.snr_threshold_db)
        .filter_map(|c| {
            let f = cfg.bin_freq_hz(c.bin_index);
            passes_band(cfg, f).then_some(PulseEvent {
                utc_s: info.utc_s,
                frame_index: info.frame_index,
                bin_index: c.bin_index,
                rf_freq_hz: f,
                snr_east_db: c.snr_east_db,
                snr_west_db: c.snr_west_db,
                phase_east_rad: c.phase_east_rad,
                phase_west_rad: c.phase_west_rad,
                polarization_tag: cfg.polarization,
                ra_pointing_hr: info.ra_pointing_hr,
            })
        })
        .collect()
}

/// Total order used for bin sorting: bin, then frame, then the remaining
/// fields so that identical inputs in any order sort identically.
fn sort_key_cmp(a: &PulseEvent, b: &PulseEvent) -> Ordering {
    a.bin_index
        .cmp(&b.bin_index)
        .then(a.frame_index.cmp(&b.frame_index))
        .then(a.polarization_tag.cmp(&b.polarization_tag))
        .then(a.utc_s.total_cmp(&b.utc_s))
        .then(a.snr_east_db.total_cmp(&b.snr_east_db))
        .then(a.snr_west_db.total_cmp(&b.snr_west_db))
        .then(a.phase_east_rad.total_cmp(&b.phase_east_rad))
        .then(a.phase_west_rad.total_cmp(&b.phase_west_rad))
}

/// Pairs consecutive events after sorting each block of
/// `2 * pairing_window_frames + 1` frames by `(bin, frame)`.
///
/// With the default window of 0 a block is a single frame, so every pair
/// has `delta_t = 0`. Each event is the successor of at most one pair.
pub fn form_pairs(events: &[PulseEvent], pairing_window_frames: u32, require_same_polarization: bool) -> Vec<PairCandidate> {
    let block_len = 2 * pairing_window_frames as u64 + 1;
    let mut sorted: Vec<&PulseEvent> = events.iter().collect();
    sorted.sort_by(|a, b| {
        (a.frame_index / block_len)
            .cmp(&(b.frame_index / block_len))
            .then_with(|| sort_key_cmp(a, b))
    });
    let mut out = Vec::new();
    for w in sorted.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.frame_index / block_len != b.frame_index / block_len {
            continue;
        }
        if require_same_polarization && a.polarization_tag != b.polarization_tag {
            continue;
        }
        out.push(PairCandidate::new(a.clone(), b.clone()));
    }
    out
}

/// True iff `log10(|delta_f| / 1 MHz)` lies in `[log_low - tol, log_high + tol]`.
/// Zero spacing is degenerate and never passes.
pub fn delta_f_filter(candidate: &PairCandidate, log_low: f64, log_high: f64, tolerance_decades: f64) -> bool {
    if candidate.delta_f_hz == 0.0 {
        log::debug!(
            "pair at bin {} has zero frequency spacing; rejected",
            candidate.event_b.bin_index
        );
        return false;
    }
    let l = candidate.log10_delta_f_mhz;
    l >= log_low - tolerance_decades && l <= log_high + tolerance_decades
}
