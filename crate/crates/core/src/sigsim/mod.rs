//! Synthetic two-element observations.
//!
//! Each frame is a pure function of `(config, seed, frame_index)`: noise,
//! injected pulse pairs and RFI are drawn from per-frame ChaCha streams, so
//! frames can be produced in any order or in parallel.
//!
//! Phase convention shared with [`crate::phasefilter`]: a signal arriving
//! with geometric delay `tau_geom` through an instrument whose delay is
//! `tau_int` shows `phase(W) - phase(E) = 2 pi f (tau_geom - tau_int)`, so the
//! delay-corrected pair metric vanishes when the assumed delay equals
//! `tau_int` at transit.

mod calibrators;
mod dense;
mod plan;
mod schedule;
mod sparse;
mod timedomain;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channelizer::{dual_crossings, Crossing};
use crate::config::{Element, GenerationMode, ObservationConfig, PolTag, RfiSpec, SourceSpec};
use crate::error::Result;

pub(crate) use dense::complex_normal;
pub use calibrators::{simulate_correlator_frames, simulate_drift_scan, CorrelatorSpec, DriftScanSpec};
pub use plan::{BroadbandPatch, FramePlan, Tone};
pub use schedule::{FrameInfo, FrameSchedule};
pub use sparse::{exceedance_count_pmf, SparseSampler};

/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// East-West baseline delay `(B / c) cos(dec) sin(ha)`, seconds.
pub fn geometric_delay(baseline_m: f64, dec_deg: f64, hour_angle_rad: f64) -> f64 {
    baseline_m / C_LIGHT * dec_deg.to_radians().cos() * hour_angle_rad.sin()
}

/// One element's complex bin amplitudes for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpectrum {
    pub frame_index: u64,
    pub utc_s: f64,
    pub element: Element,
    pub bins: Vec<Complex64>,
    pub polarization_tag: PolTag,
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Noise = 0,
    Rfi = 1,
    /// Source `i` uses `Source as u64 + i`.
    Source = 2,
}

pub(crate) fn frame_rng(seed: u64, frame_index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((frame_index << 8) | stream);
    rng
}

/// Configured simulation: the frame schedule plus everything injected.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ObservationConfig,
    sources: Vec<SourceSpec>,
    rfi: Vec<RfiSpec>,
    schedule: FrameSchedule,
}

impl Simulator {
    pub fn new(cfg: &ObservationConfig, sources: &[SourceSpec], rfi: &[RfiSpec]) -> Result<Self> {
        cfg.validate()?;
        let schedule = FrameSchedule::new(cfg)?;
        for s in sources {
            plan::validate_source(cfg, s)?;
        }
        for r in rfi {
            plan::validate_rfi(cfg, r)?;
        }
        if sources.len() > 250 {
            return Err(crate::Error::config("at most 250 sources are supported"));
        }
        Ok(Self {
            cfg: cfg.clone(),
            sources: sources.to_vec(),
            rfi: rfi.to_vec(),
            schedule,
        })
    }

    pub fn config(&self) -> &ObservationConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &FrameSchedule {
        &self.schedule
    }

    pub fn frame_count(&self) -> u64 {
        self.schedule.len()
    }

    pub fn frame_info(&self, frame_index: u64) -> FrameInfo {
        self.schedule.info(frame_index)
    }

    /// Everything deterministic about a frame: timing, pointing, injected
    /// tones and RFI patches.
    pub fn plan(&self, frame_index: u64) -> FramePlan {
        plan::build(&self.cfg, &self.schedule, &self.sources, &self.rfi, frame_index)
    }

    /// Full spectra for both elements. Time-domain configs go through the
    /// FFT channelizer; the other modes synthesize bins directly.
    pub fn spectra(&self, frame_index: u64) -> Result<(FrameSpectrum, FrameSpectrum)> {
        let plan = self.plan(frame_index);
        let mut rng = frame_rng(self.cfg.seed, frame_index, Stream::Noise as u64);
        let (east, west) = match self.cfg.generation {
            GenerationMode::TimeDomain => timedomain::synthesize(&self.cfg, &plan, &mut rng)?,
            GenerationMode::Dense | GenerationMode::Sparse => dense::synthesize(&self.cfg, &plan, &mut rng),
        };
        let mk = |element, bins| FrameSpectrum {
            frame_index,
            utc_s: plan.info.utc_s,
            element,
            bins,
            polarization_tag: self.cfg.polarization,
        };
        Ok((mk(Element::East, east), mk(Element::West, west)))
    }

    /// Sampler for the sparse generation mode, or `None` when the mode is
    /// not sparse or the threshold is too low for the closed forms to be
    /// numerically reliable (frames are then synthesized densely).
    pub fn sparse_sampler(&self, threshold_db: f64) -> Option<SparseSampler> {
        if self.cfg.generation != GenerationMode::Sparse {
            return None;
        }
        match SparseSampler::new(&self.cfg, threshold_db) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("sparse generation unavailable ({e}); falling back to dense synthesis");
                None
            }
        }
    }

    /// Dual-element threshold crossings of one frame, sorted by bin.
    pub fn crossings(
        &self,
        frame_index: u64,
        threshold_db: f64,
        sampler: Option<&SparseSampler>,
    ) -> Result<Vec<Crossing>> {
        if let Some(s) = sampler {
            let plan = self.plan(frame_index);
            let mut rng = frame_rng(self.cfg.seed, frame_index, Stream::Noise as u64);
            return s.sample_frame(&self.cfg, &plan, &mut rng);
        }
        let (east, west) = self.spectra(frame_index)?;
        dual_crossings(
            &east.bins,
            &west.bins,
            0,
            self.cfg.bins_per_segment,
            threshold_db,
            self.cfg.snr_convention,
        )
    }

    /// Iterates over all frames in `frame_index` order.
    pub fn frames(&self) -> impl Iterator<Item = Result<(FrameSpectrum, FrameSpectrum)>> + '_ {
        (0..self.frame_count()).map(|i| self.spectra(i))
    }
}

/// Builds a simulator and streams every frame as an `(EAST, WEST)` pair.
pub fn simulate_frames(
    cfg: &ObservationConfig,
    sources: &[SourceSpec],
    rfi: &[RfiSpec],
) -> Result<impl Iterator<Item = Result<(FrameSpectrum, FrameSpectrum)>>> {
    let sim = Simulator::new(cfg, sources, rfi)?;
    Ok((0..sim.frame_count()).map(move |i| sim.spectra(i)))
}
