//! FFT channelization and segment-relative SNR.
//!
//! The FFT uses a unit-gain scaling (`1/N` on the forward transform) so a
//! tone centred in bin `k` with amplitude `A` gives `|X[k]| = A`. SNR is
//! always referred to the mean power of the fixed 256-bin (by default)
//! segment containing the bin, so the scaling cancels out of every SNR.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::config::{Element, ObservationConfig, PolTag, SnrConvention};
use crate::error::{Error, Result};
use crate::sigsim::{FrameInfo, FrameSpectrum};

/// One FFT bin of one frame for one element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinMeasurement {
    pub frame_index: u64,
    pub utc_s: f64,
    pub element: Element,
    pub bin_index: usize,
    pub rf_freq_hz: f64,
    pub power: f64,
    pub snr_db: f64,
    pub phase_rad: f64,
    pub segment_index: usize,
    pub polarization_tag: PolTag,
    pub ra_pointing_hr: f64,
}

/// Reusable forward transform for one frame length.
pub struct Channelizer {
    fft: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Channelizer {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::input(format!("frame length {n} is not a power of two")));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self { fft, n })
    }

    /// Unit-gain forward DFT; bin `k` is `band_low + k / frame_seconds`.
    pub fn transform(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.n {
            return Err(Error::input(format!(
                "expected {} samples per frame, got {}",
                self.n,
                samples.len()
            )));
        }
        let mut buf = samples.to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        Ok(buf)
    }
}

/// One-shot FFT of a frame of `sample_rate_hz * frame_seconds` complex samples.
pub fn fft_frame(samples: &[Complex64], sample_rate_hz: f64, frame_seconds: f64) -> Result<Vec<Complex64>> {
    let expected = sample_rate_hz * frame_seconds;
    if !(expected.is_finite() && expected >= 1.0) || (expected - expected.round()).abs() > 1e-6 {
        return Err(Error::input(format!(
            "sample rate x frame length = {expected} is not a whole number of samples"
        )));
    }
    if samples.len() != expected.round() as usize {
        return Err(Error::input(format!(
            "frame holds {} samples, expected {}",
            samples.len(),
            expected.round()
        )));
    }
    Channelizer::new(samples.len())?.transform(samples)
}

/// `10 log10(bin_power / mean(segment_powers))`, the bin under test being
/// one of `segment_powers`.
pub fn snr_db(bin_power: f64, segment_powers: &[f64]) -> Result<f64> {
    if segment_powers.is_empty() {
        return Err(Error::input("empty segment"));
    }
    let mean = segment_powers.iter().sum::<f64>() / segment_powers.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate(format!("segment mean power {mean} is not positive")));
    }
    Ok(10.0 * (bin_power / mean).log10())
}

/// SNR of every bin in a segment under either convention.
pub fn segment_snr_db(powers: &[f64], convention: SnrConvention) -> Result<Vec<f64>> {
    let n = powers.len();
    if n < 2 {
        return Err(Error::input("a segment needs at least two bins"));
    }
    let total: f64 = powers.iter().sum();
    let out = powers
        .iter()
        .map(|&p| {
            let reference = match convention {
                SnrConvention::IncludeTestBin => total / n as f64,
                SnrConvention::ExcludeTestBin => (total - p) / (n - 1) as f64,
            };
            if reference > 0.0 {
                Ok(10.0 * (p / reference).log10())
            } else {
                Err(Error::Degenerate("segment reference power is not positive".into()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

/// Principal argument in `(-pi, pi]`.
pub fn phase_rad(amplitude: Complex64) -> Result<f64> {
    if amplitude.re == 0.0 && amplitude.im == 0.0 {
        return Err(Error::input("phase of a zero amplitude is undefined"));
    }
    Ok(wrap_phase(amplitude.arg()))
}

/// Wraps any angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x - (2.0 * PI) * ((x + PI) / (2.0 * PI)).floor();
    // `w` is in [-pi, pi); move the closed end to +pi.
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Measurements for every bin of one element's frame.
pub fn channelize(
    cfg: &ObservationConfig,
    spectrum: &FrameSpectrum,
    ra_pointing_hr: f64,
) -> Result<Vec<BinMeasurement>> {
    let n = cfg.n_bins();
    if spectrum.bins.len() != n {
        return Err(Error::input(format!(
            "spectrum has {} bins, configuration implies {n}",
            spectrum.bins.len()
        )));
    }
    let bps = cfg.bins_per_segment;
    let mut out = Vec::with_capacity(n);
    for (seg, chunk) in spectrum.bins.chunks(bps).enumerate() {
        let powers: Vec<f64> = chunk.iter().map(|z| z.norm_sqr()).collect();
        let snrs = segment_snr_db(&powers, cfg.snr_convention)?;
        for (j, (z, (&power, snr))) in chunk.iter().zip(powers.iter().zip(snrs)).enumerate() {
            let bin = seg * bps + j;
            out.push(BinMeasurement {
                frame_index: spectrum.frame_index,
                utc_s: spectrum.utc_s,
                element: spectrum.element,
                bin_index: bin,
                rf_freq_hz: cfg.bin_freq_hz(bin),
                power,
                snr_db: snr,
                phase_rad: if power > 0.0 { wrap_phase(z.arg()) } else { 0.0 },
                segment_index: seg,
                polarization_tag: spectrum.polarization_tag,
                ra_pointing_hr,
            });
        }
    }
    Ok(out)
}

/// A bin in which both elements exceed the SNR threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub bin_index: usize,
    pub snr_east_db: f64,
    pub snr_west_db: f64,
    pub phase_east_rad: f64,
    pub phase_west_rad: f64,
}

/// Finds dual-element threshold crossings in a run of whole segments
/// starting at `first_bin` (which must sit on a segment boundary). The
/// final segment may be short.
pub fn dual_crossings(
    east: &[Complex64],
    west: &[Complex64],
    first_bin: usize,
    bins_per_segment: usize,
    threshold_db: f64,
    convention: SnrConvention,
) -> Result<Vec<Crossing>> {
    if east.len() != west.len() {
        return Err(Error::Misaligned {
            position: first_bin,
            detail: format!("east has {} bins, west {}", east.len(), west.len()),
        });
    }
    let mut out = Vec::new();
    let mut pe = Vec::with_capacity(bins_per_segment);
    let mut pw = Vec::with_capacity(bins_per_segment);
    for (seg, (ce, cw)) in east.chunks(bins_per_segment).zip(west.chunks(bins_per_segment)).enumerate() {
        pe.clear();
        pw.clear();
        pe.extend(ce.iter().map(|z| z.norm_sqr()));
        pw.extend(cw.iter().map(|z| z.norm_sqr()));
        let se = segment_snr_db(&pe, convention)?;
        let sw = segment_snr_db(&pw, convention)?;
        for j in 0..ce.len() {
            if se[j] > threshold_db && sw[j] > threshold_db {
                out.push(Crossing {
                    bin_index: first_bin + seg * bins_per_segment + j,
                    snr_east_db: se[j],
                    snr_west_db: sw[j],
                    phase_east_rad: wrap_phase(ce[j].arg()),
                    phase_west_rad: wrap_phase(cw[j].arg()),
                });
            }
        }
    }
    Ok(out)
}

/// Everything needed to turn a frame's spectra into measurements.
pub fn channelize_pair(
    cfg: &ObservationConfig,
    east: &FrameSpectrum,
    west: &FrameSpectrum,
    info: &FrameInfo,
) -> Result<(Vec<BinMeasurement>, Vec<BinMeasurement>)> {
    Ok((
        channelize(cfg, east, info.ra_pointing_hr)?,
        channelize(cfg, west, info.ra_pointing_hr)?,
    ))
}

/// Debug dump of measurements as CSV with a header row.
pub fn write_measurements_csv<W: Write>(out: W, rows: &[BinMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::input(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
