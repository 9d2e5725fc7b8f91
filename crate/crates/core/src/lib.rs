//! Interferometric pulse-pair detection: simulation, channelization,
//! candidate filtering, RA-binned binomial statistics and calibration.
// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod channelizer;
pub mod config;
mod error;
pub mod pairdetect;
pub mod phasefilter;
pub mod pipeline;
pub mod sigsim;
pub mod skystats;

pub use config::{
    DetectionParams, Element, ExperimentConfig, FilterParams, GenerationMode, ObservationConfig, PolTag,
    ProbabilityMode, RfiDirection, RfiKind, RfiSpec, SnrConvention, SourceSpec, StatsParams,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
