//! Gaussian-plus-flat drift-scan fitting.

use std::io::BufRead;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use super::sidereal::{lst_hours, pointing_ra_hr, wrap_hours};
use crate::error::{Error, Result};

/// `FWHM / sigma` for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2 * sqrt(2 ln 2)

const MAX_ITERATIONS: usize = 200;
const REL_TOLERANCE: f64 = 1e-9;

/// Continuum power against time for one transit of a calibrator.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftScan {
    /// `(utc_s, continuum_power)`, strictly increasing in time.
    pub samples: Vec<(f64, f64)>,
    pub source_name: String,
    pub dec_deg: f64,
}

/// Where the antenna was parked during a drift scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub azimuth_deg: f64,
}

impl DriftScan {
    pub fn validate(&self) -> Result<()> {
        if self.samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::input("drift scan timestamps must be strictly increasing"));
        }
        if self.samples.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
            return Err(Error::input("drift scan contains non-finite samples"));
        }
        Ok(())
    }

    /// Beam-centre RA of every sample, unwrapped to be continuous across 0 h.
    pub fn ra_axis(&self, site: &Site) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut first = None;
        for &(t, _) in &self.samples {
            let lst = lst_hours(t, site.longitude_deg);
            let ra = pointing_ra_hr(lst, site.azimuth_deg, self.dec_deg, site.latitude_deg)?;
            let ra0 = *first.get_or_insert(ra);
            out.push(ra0 + wrap_hours(ra - ra0));
        }
        Ok(out)
    }

    /// Reads a two-column `utc_s,power` CSV. A header line is skipped if its
    /// first field does not parse as a number.
    pub fn read_csv(path: &Path, source_name: &str, dec_deg: f64) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut samples = Vec::new();
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Archive {
                    path: path.to_path_buf(),
                    line: idx as u64 + 1,
                    msg: "expected two columns: utc_s,power".into(),
                });
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(p)) => samples.push((t, p)),
                _ if idx == 0 => continue,
                _ => {
                    return Err(Error::Archive {
                        path: path.to_path_buf(),
                        line: idx as u64 + 1,
                        msg: format!("cannot parse `{line}`"),
                    })
                }
            }
        }
        let scan = DriftScan {
            samples,
            source_name: source_name.to_string(),
            dec_deg,
        };
        scan.validate()?;
        Ok(scan)
    }
}

/// `power(ra) = floor + amplitude * exp(-(ra - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussFlatFit {
    pub amplitude: f64,
    pub center_ra_hr: f64,
    pub sigma_ra_hr: f64,
    pub floor: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl GaussFlatFit {
    pub fn fwhm_ra_hr(&self) -> f64 {
        FWHM_PER_SIGMA * self.sigma_ra_hr
    }

    /// FWHM as an RA angle in degrees (15 deg per hour, no cos(dec) factor).
    pub fn fwhm_deg(&self) -> f64 {
        15.0 * self.fwhm_ra_hr()
    }

    pub fn model(&self, ra_hr: f64) -> f64 {
        gauss_flat(&self.params(), ra_hr)
    }

    fn params(&self) -> Vector4<f64> {
        Vector4::new(self.floor, self.amplitude, self.center_ra_hr, self.sigma_ra_hr)
    }

    /// Key-value fit report.
    pub fn report(&self, source_name: &str) -> String {
        let snr = continuum_snr_db(self)
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|_| "nan".into());
        format!(
            "source = \"{source_name}\"\n\
             converged = {}\n\
             iterations = {}\n\
             floor = {:.9e}\n\
             amplitude = {:.9e}\n\
             center_ra_hr = {:.9}\n\
             sigma_ra_hr = {:.9}\n\
             fwhm_ra_hr = {:.9}\n\
             fwhm_deg = {:.6}\n\
             continuum_snr_db = {snr}\n\
             residual_rms = {:.6e}\n",
            self.converged,
            self.iterations,
            self.floor,
            self.amplitude,
            self.center_ra_hr,
            self.sigma_ra_hr,
            self.fwhm_ra_hr(),
            self.fwhm_deg(),
            self.residual_rms,
        )
    }
}

fn gauss_flat(p: &Vector4<f64>, x: f64) -> f64 {
    let z = (x - p[2]) / p[3];
    p[0] + p[1] * (-0.5 * z * z).exp()
}

fn sum_sq_residuals(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - gauss_flat(p, xi);
            r * r
        })
        .sum()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn boxcar(values: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return values.to_vec();
    }
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn initial_guess(x: &[f64], y: &[f64]) -> Result<Vector4<f64>> {
    let floor = median(y);
    // Light smoothing keeps single noise spikes from capturing the argmax.
    let smooth = boxcar(y, x.len() / 128);
    let (imax, &ymax) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let amp = ymax - floor;
    if amp <= 0.0 || !amp.is_finite() {
        return Err(Error::Degenerate("drift scan has no peak above its median".into()));
    }
    let half = floor + 0.5 * amp;
    let mut lo = imax;
    while lo > 0 && smooth[lo] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < x.len() && smooth[hi] >= half {
        hi += 1;
    }
    let mut fwhm = x[hi] - x[lo];
    if fwhm <= 0.0 {
        fwhm = (x[x.len() - 1] - x[0]) / x.len() as f64;
    }
    if x[x.len() - 1] - x[0] <= fwhm {
        return Err(Error::input("drift scan must span more than one FWHM"));
    }
    Ok(Vector4::new(floor, amp, x[imax], fwhm / FWHM_PER_SIGMA))
}

/// Fits the Gaussian-plus-flat model to `power` sampled at beam-centre RAs.
///
/// Levenberg-Marquardt with diagonal scaling, starting from floor = median,
/// amplitude = peak - median, center = peak position and sigma from the
/// half-maximum crossings. Stops when the relative parameter change of an
/// accepted step drops below 1e-9 or after 200 iterations; the best estimate
/// so far is returned with `converged = false` in the latter case.
pub fn fit_gauss_flat_ra(ra_hr: &[f64], power: &[f64]) -> Result<GaussFlatFit> {
    if ra_hr.len() != power.len() {
        return Err(Error::input("RA and power arrays differ in length"));
    }
    if ra_hr.len() < 8 {
        return Err(Error::input("need at least 8 drift-scan samples"));
    }
    let mut p = initial_guess(ra_hr, power)?;
    let mut cost = sum_sq_residuals(&p, ra_hr, power);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in ra_hr.iter().zip(power) {
            let d = x - p[2];
            let s2 = p[3] * p[3];
            let g = (-0.5 * d * d / s2).exp();
            let row = Vector4::new(1.0, g, p[1] * g * d / s2, p[1] * g * d * d / (s2 * p[3]));
            let r = y - (p[0] + p[1] * g);
            jtj += row * row.transpose();
            jtr += row * r;
        }

        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if trial[3] <= 0.0 || trial[1] < 0.0 || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_cost = sum_sq_residuals(&trial, ra_hr, power);
            if trial_cost <= cost {
                let rel = step
                    .iter()
                    .zip(p.iter())
                    .map(|(s, v)| s.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < REL_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step at any damping: stationary point.
            converged = true;
            break;
        }
    }

    Ok(GaussFlatFit {
        floor: p[0],
        amplitude: p[1],
        center_ra_hr: p[2],
        sigma_ra_hr: p[3],
        residual_rms: (cost / ra_hr.len() as f64).sqrt(),
        converged,
        iterations,
    })
}

/// Fits a drift scan after mapping its timestamps to beam-centre RA.
pub fn fit_gauss_flat(scan: &DriftScan, site: &Site) -> Result<GaussFlatFit> {
    scan.validate()?;
    let ra = scan.ra_axis(site)?;
    let power: Vec<f64> = scan.samples.iter().map(|s| s.1).collect();
    let mut fit = fit_gauss_flat_ra(&ra, &power)?;
    fit.center_ra_hr = fit.center_ra_hr.rem_euclid(24.0);
    Ok(fit)
}

/// Peak-over-floor continuum ratio in dB: `10 log10((floor + amplitude) / floor)`.
pub fn continuum_snr_db(fit: &GaussFlatFit) -> Result<f64> {
    if fit.floor <= 0.0 {
        return Err(Error::input("fit floor must be positive"));
    }
    Ok(10.0 * ((fit.floor + fit.amplitude) / fit.floor).log10())
}

/// Radiometer sensitivity factor `1 / sqrt(bandwidth * time * n)`.
pub fn sensitivity_factor(delta_nu_hz: f64, t_s: f64, n: f64) -> Result<f64> {
    if delta_nu_hz <= 0.0 || t_s <= 0.0 || n <= 0.0 {
        return Err(Error::input("sensitivity factor inputs must be positive"));
    }
    Ok(1.0 / (delta_nu_hz * t_s * n).sqrt())
}
