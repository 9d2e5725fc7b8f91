//! Experiment configuration.
//!
//! Everything that can change an output lives in [`ExperimentConfig`], which
//! is read from (and written back to) a TOML key-value file. Physical
//! quantities are SI except right ascension (hours) and declination (degrees).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Green Bank, WV.
pub const DEFAULT_LATITUDE_DEG: f64 = 38.433;
pub const DEFAULT_LONGITUDE_DEG: f64 = -79.84;
/// 2024-01-01T00:00:00Z.
pub const DEFAULT_START_UTC_S: f64 = 1_704_067_200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    #[serde(rename = "EAST")]
    East,
    #[serde(rename = "WEST")]
    West,
}

/// Polarization channel label. Carried through the pipeline, never modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolTag {
    X,
    Y,
}

impl PolTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PolTag::X => "X",
            PolTag::Y => "Y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "X" => Some(PolTag::X),
            "Y" => Some(PolTag::Y),
            _ => None,
        }
    }
}

/// Which estimate of the segment noise level an SNR is referred to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// Mean over all bins of the segment, including the bin under test.
    #[default]
    IncludeTestBin,
    /// Mean over the other bins of the segment.
    ExcludeTestBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// Complex samples per frame, channelized with an FFT.
    TimeDomain,
    /// Every bin of every frame synthesized directly in the frequency domain.
    Dense,
    /// Only dual-element threshold crossings are synthesized; segments that
    /// carry injected tones or RFI are generated densely.
    #[default]
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub excision_low_hz: f64,
    pub excision_high_hz: f64,
    pub frame_seconds: f64,
    /// Defaults to `frame_seconds` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_hop_seconds: Option<f64>,
    pub bins_per_segment: usize,
    pub baseline_meters: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub azimuth_deg: f64,
    pub dec_deg: f64,
    pub beam_fwhm_deg: f64,
    pub tau_int_true_s: f64,
    pub seed: u64,
    pub duration_days: u32,
    pub start_utc_s: f64,
    /// Pointing-RA window simulated on each transit.
    pub ra_window_low_hr: f64,
    pub ra_window_high_hr: f64,
    pub polarization: PolTag,
    pub snr_convention: SnrConvention,
    pub generation: GenerationMode,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            band_low_hz: 1405e6,
            band_high_hz: 1455e6,
            excision_low_hz: 1424e6,
            excision_high_hz: 1426e6,
            frame_seconds: 0.27,
            frame_hop_seconds: None,
            bins_per_segment: 256,
            baseline_meters: 30.0,
            latitude_deg: DEFAULT_LATITUDE_DEG,
            longitude_deg: DEFAULT_LONGITUDE_DEG,
            azimuth_deg: 180.0,
            dec_deg: -8.0,
            beam_fwhm_deg: 9.0,
            tau_int_true_s: 0.0,
            seed: 1,
            duration_days: 1,
            start_utc_s: DEFAULT_START_UTC_S,
            ra_window_low_hr: 3.3,
            ra_window_high_hr: 7.3,
            polarization: PolTag::X,
            snr_convention: SnrConvention::IncludeTestBin,
            generation: GenerationMode::Sparse,
        }
    }
}

impl ObservationConfig {
    pub fn hop_seconds(&self) -> f64 {
        self.frame_hop_seconds.unwrap_or(self.frame_seconds)
    }

    pub fn bin_width_hz(&self) -> f64 {
        1.0 / self.frame_seconds
    }

    pub fn segment_bandwidth_hz(&self) -> f64 {
        self.bins_per_segment as f64 / self.frame_seconds
    }

    /// Number of bins across the RF band. Validated to be an integer.
    pub fn n_bins(&self) -> usize {
        ((self.band_high_hz - self.band_low_hz) * self.frame_seconds).round() as usize
    }

    pub fn n_segments(&self) -> usize {
        self.n_bins().div_ceil(self.bins_per_segment)
    }

    pub fn bin_freq_hz(&self, bin: usize) -> f64 {
        self.band_low_hz + bin as f64 / self.frame_seconds
    }

    pub fn ra_window_hr(&self) -> f64 {
        (self.ra_window_high_hr - self.ra_window_low_hr).rem_euclid(24.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.band_low_hz,
            self.band_high_hz,
            self.excision_low_hz,
            self.excision_high_hz,
            self.frame_seconds,
            self.hop_seconds(),
            self.baseline_meters,
            self.latitude_deg,
            self.longitude_deg,
            self.azimuth_deg,
            self.dec_deg,
            self.beam_fwhm_deg,
            self.tau_int_true_s,
            self.start_utc_s,
            self.ra_window_low_hr,
            self.ra_window_high_hr,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("all observation parameters must be finite"));
        }
        if self.band_high_hz <= self.band_low_hz {
            return Err(Error::config("band_high_hz must exceed band_low_hz"));
        }
        if self.excision_high_hz < self.excision_low_hz {
            return Err(Error::config("excision_high_hz must not be below excision_low_hz"));
        }
        if self.frame_seconds <= 0.0 || self.hop_seconds() <= 0.0 {
            return Err(Error::config("frame_seconds and frame_hop_seconds must be positive"));
        }
        let bins = (self.band_high_hz - self.band_low_hz) * self.frame_seconds;
        if (bins - bins.round()).abs() > 1e-6 {
            return Err(Error::config(format!(
                "band width x frame_seconds = {bins} is not an integer bin count"
            )));
        }
        if self.bins_per_segment < 2 {
            return Err(Error::config("bins_per_segment must be at least 2"));
        }
        let tail = self.n_bins() % self.bins_per_segment;
        if tail == 1 {
            return Err(Error::config(
                "band leaves a one-bin trailing segment; adjust the band edges",
            ));
        }
        if self.dec_deg.abs() >= 90.0 {
            return Err(Error::config("|dec_deg| must be below 90"));
        }
        if (self.azimuth_deg - 180.0).abs() >= 5.0 {
            return Err(Error::config("azimuth_deg must be within 5 degrees of 180"));
        }
        if self.beam_fwhm_deg <= 0.0 {
            return Err(Error::config("beam_fwhm_deg must be positive"));
        }
        if self.duration_days == 0 {
            return Err(Error::config("duration_days must be at least 1"));
        }
        let w = self.ra_window_hr();
        if w <= 0.0 {
            return Err(Error::config("RA window must have positive width"));
        }
        if self.generation == GenerationMode::TimeDomain && !self.n_bins().is_power_of_two() {
            return Err(Error::config(
                "time-domain generation needs a power-of-two bin count per frame",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub ra_hr: f64,
    pub dec_deg: f64,
    /// Mean number of pairs started per frame at full beam gain.
    pub pulse_rate_per_frame: f64,
    pub delta_f_min_hz: f64,
    pub delta_f_max_hz: f64,
    pub delta_t_frames: u32,
    pub snr_target_db: f64,
    pub polarization_tag: PolTag,
    /// When set, the source only emits while the pointing RA is within this
    /// many hours of `ra_hr`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_halfwidth_hr: Option<f64>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            ra_hr: 5.25,
            dec_deg: -7.6,
            pulse_rate_per_frame: 0.0,
            delta_f_min_hz: 7.9,
            delta_f_max_hz: 2.0e6,
            delta_t_frames: 0,
            snr_target_db: 30.0,
            polarization_tag: PolTag::X,
            active_halfwidth_hr: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiKind {
    BroadbandFlat,
    NarrowbandCarrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiDirection {
    /// Identical signal in both elements.
    CommonMode,
    /// Arrives through the antennas from a direction with geometric delay
    /// `sidelobe_delay_s`, so the instrument delay applies to it as well.
    Sidelobe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfiSpec {
    pub kind: RfiKind,
    pub rf_freq_hz: f64,
    pub power_rel_noise: f64,
    pub direction: RfiDirection,
    pub sidelobe_delay_s: f64,
    pub duty_cycle: f64,
    /// Broadband only; defaults to one segment bandwidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
}

impl Default for RfiSpec {
    fn default() -> Self {
        Self {
            kind: RfiKind::NarrowbandCarrier,
            rf_freq_hz: 1410e6,
            power_rel_noise: 100.0,
            direction: RfiDirection::CommonMode,
            sidelobe_delay_s: 0.0,
            duty_cycle: 1.0,
            bandwidth_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    pub snr_threshold_db: f64,
    pub pairing_window_frames: u32,
    pub require_same_polarization: bool,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            snr_threshold_db: 8.5,
            pairing_window_frames: 0,
            require_same_polarization: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub tau_int_s: f64,
    pub filter_halfwidth_rad: f64,
    pub log_delta_f_low: f64,
    pub log_delta_f_high: f64,
    /// Slack on both log10(Δf/MHz) limits. The default keeps the quoted
    /// 7.9 Hz and 2.0 MHz endpoints inside the -5.1..+0.3 range.
    pub edge_tolerance_decades: f64,
    pub flip_correction_sign: bool,
    pub tau_search_low_s: f64,
    pub tau_search_high_s: f64,
    pub tau_search_step_s: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            tau_int_s: 0.0,
            filter_halfwidth_rad: 0.04,
            log_delta_f_low: -5.1,
            log_delta_f_high: 0.3,
            edge_tolerance_decades: 0.0025,
            flip_correction_sign: false,
            tau_search_low_s: -10e-9,
            tau_search_high_s: 10e-9,
            tau_search_step_s: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    #[default]
    Uniform,
    Exposure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsParams {
    pub window_low_hr: f64,
    pub window_high_hr: f64,
    pub bin_width_hr: f64,
    pub probability_mode: ProbabilityMode,
    /// Bins with Cohen's d at or above this are flagged.
    pub significance_d: f64,
    pub fwhm_center_hr: f64,
    pub fwhm_width_hr: f64,
    pub per_day: bool,
}

impl Default for StatsParams {
    fn default() -> Self {
        Self {
            window_low_hr: 3.3,
            window_high_hr: 7.3,
            bin_width_hr: 0.1,
            probability_mode: ProbabilityMode::Uniform,
            significance_d: 3.5,
            fwhm_center_hr: 5.25,
            fwhm_width_hr: 9.0 / 15.0,
            per_day: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub observation: ObservationConfig,
    pub sources: Vec<SourceSpec>,
    pub rfi: Vec<RfiSpec>,
    pub detection: DetectionParams,
    pub filter: FilterParams,
    pub stats: StatsParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: "default".to_string(),
            observation: ObservationConfig::default(),
            sources: Vec::new(),
            rfi: Vec::new(),
            detection: DetectionParams::default(),
            filter: FilterParams::default(),
            stats: StatsParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.observation.validate()?;
        // Below 0 dB nearly every bin would be an event.
        if !(self.detection.snr_threshold_db > 0.0) {
            return Err(Error::config("snr_threshold_db must be positive"));
        }
        let f = &self.filter;
        if f.filter_halfwidth_rad <= 0.0 {
            return Err(Error::config("filter_halfwidth_rad must be positive"));
        }
        if f.log_delta_f_high < f.log_delta_f_low {
            return Err(Error::config("log_delta_f_high must not be below log_delta_f_low"));
        }
        if f.tau_search_step_s <= 0.0 || f.tau_search_high_s < f.tau_search_low_s {
            return Err(Error::config("invalid tau search grid"));
        }
        let s = &self.stats;
        if s.bin_width_hr <= 0.0 || s.window_high_hr <= s.window_low_hr {
            return Err(Error::config("invalid stats RA window"));
        }
        for rfi in &self.rfi {
            if !(0.0..=1.0).contains(&rfi.duty_cycle) {
                return Err(Error::config("rfi duty_cycle must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}
