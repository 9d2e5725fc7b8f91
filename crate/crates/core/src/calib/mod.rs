//! Calibration procedures: drift-scan fitting, sidereal time and pointing,
//! instrument-delay scans, and the radiometer sensitivity factor.

mod delay;
mod fit;
mod sidereal;

pub use delay::{tau_int_scan, CorrelatorFrames, DelayScan};
pub use fit::{
    continuum_snr_db, fit_gauss_flat, fit_gauss_flat_ra, sensitivity_factor, DriftScan, GaussFlatFit, Site,
    FWHM_PER_SIGMA,
};
pub use sidereal::{
    lst_hours, next_utc_at_lst, pointing_hour_angle_offset_hr, pointing_ra_hr, wrap_hours, SIDEREAL_DAY_S, SIDEREAL_HR_PER_S,
};
