//! Mean sidereal time and near-meridian pointing.

use crate::error::{Error, Result};

/// Mean sidereal day in SI seconds.
pub const SIDEREAL_DAY_S: f64 = 86_164.090_5;
/// Rate at which local sidereal time advances, in sidereal hours per SI second.
pub const SIDEREAL_HR_PER_S: f64 = 24.0 / SIDEREAL_DAY_S;

/// Unix time of J2000.0 (2000-01-01T12:00:00, UT1 ~ UTC).
const J2000_UNIX_S: f64 = 946_728_000.0;

/// Local mean sidereal time in hours, `[0, 24)`.
///
/// Uses the IAU 1982 GMST polynomial with UTC standing in for UT1, which
/// keeps the error under a second over decades around J2000.
pub fn lst_hours(utc_s: f64, longitude_deg: f64) -> f64 {
    let d = (utc_s - J2000_UNIX_S) / 86_400.0;
    let t = d / 36_525.0;
    // Split the linear term so the large whole-turn part cancels exactly.
    let gmst_deg = 280.460_618_37 + 360.0 * d.fract() + 0.985_647_366_29 * d
        + 0.000_387_933 * t * t
        - t * t * t / 38_710_000.0;
    ((gmst_deg + longitude_deg) / 15.0).rem_euclid(24.0)
}

/// First UTC at or after `after_utc_s` at which the local sidereal time
/// equals `lst_target_hr`.
pub fn next_utc_at_lst(lst_target_hr: f64, after_utc_s: f64, longitude_deg: f64) -> f64 {
    let lst0 = lst_hours(after_utc_s, longitude_deg);
    let mut t = after_utc_s + (lst_target_hr - lst0).rem_euclid(24.0) / SIDEREAL_HR_PER_S;
    for _ in 0..2 {
        t += wrap_hours(lst_target_hr - lst_hours(t, longitude_deg)) / SIDEREAL_HR_PER_S;
    }
    t
}

/// Hour-angle offset of the beam centre, in hours, for an antenna parked at
/// `azimuth_deg` near the meridian.
///
/// First-order form: `(az - 180) * cos(alt) / (15 * cos(dec))` with the
/// transit altitude `alt = 90 - |lat - dec|`. Positive for azimuths west of
/// south.
pub fn pointing_hour_angle_offset_hr(azimuth_deg: f64, dec_deg: f64, latitude_deg: f64) -> Result<f64> {
    let offset = azimuth_deg - 180.0;
    if offset.abs() >= 5.0 {
        return Err(Error::input(format!(
            "azimuth {azimuth_deg} deg is too far from the meridian for the first-order correction"
        )));
    }
    if dec_deg.abs() >= 90.0 {
        return Err(Error::input("declination must satisfy |dec| < 90 deg"));
    }
    let alt = 90.0 - (latitude_deg - dec_deg).abs();
    Ok(offset * alt.to_radians().cos() / (15.0 * dec_deg.to_radians().cos()))
}

/// Right ascension at the beam centre: `LST + ΔHA(az, dec, lat)`, wrapped to `[0, 24)`.
pub fn pointing_ra_hr(lst_hr: f64, azimuth_deg: f64, dec_deg: f64, latitude_deg: f64) -> Result<f64> {
    let dha = pointing_hour_angle_offset_hr(azimuth_deg, dec_deg, latitude_deg)?;
    Ok((lst_hr + dha).rem_euclid(24.0))
}

/// Signed difference `a - b` between two hour angles, wrapped to `[-12, 12)`.
pub fn wrap_hours(diff_hr: f64) -> f64 {
    (diff_hr + 12.0).rem_euclid(24.0) - 12.0
}
