use crate::calib::{lst_hours, next_utc_at_lst, pointing_hour_angle_offset_hr, SIDEREAL_DAY_S, SIDEREAL_HR_PER_S};
use crate::config::ObservationConfig;
use crate::error::{Error, Result};

/// Timing and pointing of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameInfo {
    pub frame_index: u64,
    /// Start of the frame's acquisition interval.
    pub utc_s: f64,
    /// Local sidereal time at mid-frame.
    pub lst_hr: f64,
    /// Beam-centre RA at mid-frame.
    pub ra_pointing_hr: f64,
    pub transit: u32,
}

/// Frames cover the configured pointing-RA window once per sidereal day.
/// Frame indices run contiguously through successive transits.
#[derive(Debug, Clone)]
pub struct FrameSchedule {
    first_utc_s: f64,
    frames_per_transit: u64,
    transits: u32,
    hop_s: f64,
    frame_s: f64,
    longitude_deg: f64,
    dha_hr: f64,
}

impl FrameSchedule {
    pub fn new(cfg: &ObservationConfig) -> Result<Self> {
        let dha_hr = pointing_hour_angle_offset_hr(cfg.azimuth_deg, cfg.dec_deg, cfg.latitude_deg)?;
        let target_lst = (cfg.ra_window_low_hr - dha_hr).rem_euclid(24.0);
        let t = next_utc_at_lst(target_lst, cfg.start_utc_s, cfg.longitude_deg);
        // The first frame is centred on the window's lower edge.
        let first_utc_s = t - 0.5 * cfg.frame_seconds;
        let frames_per_transit = (cfg.ra_window_hr() / SIDEREAL_HR_PER_S / cfg.hop_seconds()).floor() as u64;
        if frames_per_transit == 0 {
            return Err(Error::config("RA window is shorter than one frame hop"));
        }
        Ok(Self {
            first_utc_s,
            frames_per_transit,
            transits: cfg.duration_days,
            hop_s: cfg.hop_seconds(),
            frame_s: cfg.frame_seconds,
            longitude_deg: cfg.longitude_deg,
            dha_hr,
        })
    }

    pub fn len(&self) -> u64 {
        self.frames_per_transit * self.transits as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frames_per_transit(&self) -> u64 {
        self.frames_per_transit
    }

    pub fn transits(&self) -> u32 {
        self.transits
    }

    pub fn transit_start_utc(&self, transit: u32) -> f64 {
        self.first_utc_s + transit as f64 * SIDEREAL_DAY_S
    }

    /// True if `frame + offset` lies in the same transit as `frame`.
    pub fn same_transit(&self, frame: u64, later: u64) -> bool {
        later < self.len() && frame / self.frames_per_transit == later / self.frames_per_transit
    }

    pub fn info(&self, frame_index: u64) -> FrameInfo {
        let transit = (frame_index / self.frames_per_transit) as u32;
        let local = frame_index % self.frames_per_transit;
        let utc_s = self.transit_start_utc(transit) + local as f64 * self.hop_s;
        let lst_hr = lst_hours(utc_s + 0.5 * self.frame_s, self.longitude_deg);
        FrameInfo {
            frame_index,
            utc_s,
            lst_hr,
            ra_pointing_hr: (lst_hr + self.dha_hr).rem_euclid(24.0),
            transit,
        }
    }
}
