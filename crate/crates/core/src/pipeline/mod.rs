//! Staged experiment runner: simulate and detect, pair and filter,
//! analyze, plot. Each stage leaves its artifact on disk; the manifest is
//! written last.

pub mod manifest;
pub mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::pairdetect::{events_from_crossings, form_pairs, read_level1_archive, write_level1_archive, PairCandidate, PulseEvent};
use crate::phasefilter::{second_level_filter, tune_tau_int, SecondLevelResult, TauTuning};
use crate::sigsim::Simulator;
use crate::skystats::{analyze, bin_probabilities, write_stats_csv, Analysis, RaBins};

pub use manifest::{config_hash, level1_config_hash, sha256_file, sha256_hex, ExperimentManifest, OutputEntry};
pub use plot::{caption, plot_stats};

pub const LEVEL1_FILE: &str = "level1.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const FIGURE_FILE: &str = "figure.svg";
pub const MANIFEST_FILE: &str = "manifest.toml";

const FRAMES_PER_TASK: u64 = 512;

/// A rayon pool with exactly `threads` workers (0 means the rayon default).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))
}

/// Simulates every frame and applies the first-level filter. Frames are
/// processed in parallel chunks and concatenated in frame order.
pub fn detect_events(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<Vec<PulseEvent>> {
    let sim = Simulator::new(&cfg.observation, &cfg.sources, &cfg.rfi)?;
    let threshold = cfg.detection.snr_threshold_db;
    let sampler = sim.sparse_sampler(threshold);
    let frames = sim.frame_count();
    let tasks = frames.div_ceil(FRAMES_PER_TASK);
    let chunks = pool.install(|| {
        (0..tasks)
            .into_par_iter()
            .map(|t| {
                let mut events = Vec::new();
                for f in t * FRAMES_PER_TASK..((t + 1) * FRAMES_PER_TASK).min(frames) {
                    let crossings = sim.crossings(f, threshold, sampler.as_ref())?;
                    if !crossings.is_empty() {
                        let info = sim.frame_info(f);
                        events.extend(events_from_crossings(&cfg.observation, &cfg.detection, &info, &crossings));
                    }
                }
                Ok(events)
            })
            .collect::<Result<Vec<Vec<PulseEvent>>>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Bin-sorted pairing followed by the second-level filter.
pub fn filter_candidates(cfg: &ExperimentConfig, level1: &[PulseEvent]) -> Result<(Vec<PairCandidate>, SecondLevelResult)> {
    let pairs = form_pairs(
        level1,
        cfg.detection.pairing_window_frames,
        cfg.detection.require_same_polarization,
    );
    let second = second_level_filter(&pairs, &cfg.filter)?;
    Ok((pairs, second))
}

/// RA-bin statistics of second-level survivors, with bin probabilities
/// drawn from the level-1 events when exposure weighting is selected.
pub fn analyze_candidates(cfg: &ExperimentConfig, level1: &[PulseEvent], passed: &[PairCandidate]) -> Result<Analysis> {
    let bins = RaBins::from_params(&cfg.stats)?;
    let p = bin_probabilities(level1, &bins, cfg.stats.probability_mode)?;
    analyze(passed, &bins, &p)
}

/// FWHM window `[centre - width/2, centre + width/2]` from the stats settings.
pub fn fwhm_window(cfg: &ExperimentConfig) -> (f64, f64) {
    let s = &cfg.stats;
    (s.fwhm_center_hr - 0.5 * s.fwhm_width_hr, s.fwhm_center_hr + 0.5 * s.fwhm_width_hr)
}

/// Grid search for the instrument delay against an existing level-1 set.
pub fn tune_tau(cfg: &ExperimentConfig, level1: &[PulseEvent], pool: &rayon::ThreadPool) -> Result<TauTuning> {
    let pairs = form_pairs(
        level1,
        cfg.detection.pairing_window_frames,
        cfg.detection.require_same_polarization,
    );
    let bins = RaBins::from_params(&cfg.stats)?;
    let p = bin_probabilities(level1, &bins, cfg.stats.probability_mode)?;
    let (lo, hi) = fwhm_window(cfg);
    pool.install(|| tune_tau_int(&pairs, &cfg.filter, lo, hi, |passed| Ok(analyze(passed, &bins, &p)?.bins)))
}

pub const CANDIDATES_HEADER: &str = "frame_a,bin_a,frame_b,bin_b,utc_s,delta_t_s,delta_f_hz,log10_delta_f_mhz,phase_metric_rad,ra_pointing_hr";

pub fn write_candidates_csv<W: Write>(mut out: W, candidates: &[PairCandidate]) -> Result<()> {
    writeln!(out, "{CANDIDATES_HEADER}")?;
    for c in candidates {
        writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.1},{:.6},{:.6},{:.6}",
            c.event_a.frame_index,
            c.event_a.bin_index,
            c.event_b.frame_index,
            c.event_b.bin_index,
            c.event_b.utc_s,
            c.delta_t_s,
            c.delta_f_hz,
            c.log10_delta_f_mhz,
            c.phase_metric_rad.unwrap_or(f64::NAN),
            c.ra_pointing_hr
        )?;
    }
    Ok(())
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: ExperimentManifest,
    pub level1_events: usize,
    pub pair_candidates: usize,
    pub second_level: SecondLevelResult,
    pub analysis: Analysis,
    pub level1_reused: bool,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            msg: other.to_string(),
        },
    })
}

fn reusable_level1(cfg: &ExperimentConfig, out_dir: &Path) -> Option<Vec<PulseEvent>> {
    let previous = ExperimentManifest::load(&out_dir.join(MANIFEST_FILE)).ok()?;
    let entry = previous.outputs.get("level1")?;
    let path = out_dir.join(LEVEL1_FILE);
    if previous.level1_config_hash != level1_config_hash(cfg).ok()? || sha256_file(&path).ok()? != entry.sha256 {
        return None;
    }
    read_level1_archive(&path).ok()
}

/// Runs every stage into `out_dir`. With `resume`, a level-1 archive whose
/// recorded hash and generating parameters match is reused instead of
/// re-simulated. On failure the artifacts written so far are kept and the
/// manifest records the failing stage.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: usize, resume: bool) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = ExperimentManifest {
        experiment_id: cfg.experiment_id.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: "running".into(),
        failed_stage: None,
        failure: None,
        config_hash: config_hash(cfg)?,
        level1_config_hash: level1_config_hash(cfg)?,
        inputs: Vec::new(),
        summary: Default::default(),
        outputs: Default::default(),
        config: cfg.clone(),
    };
    let result = run_stages(cfg, out_dir, threads, resume, &mut manifest);
    match result {
        Ok(summary) => Ok(summary),
        Err(e) => {
            manifest.status = "failed".into();
            if let Error::Stage { stage, .. } = &e {
                manifest.failed_stage = Some(stage.to_string());
            }
            manifest.failure = Some(e.to_string());
            manifest.write(&out_dir.join(MANIFEST_FILE))?;
            Err(e)
        }
    }
}

fn record(manifest: &mut ExperimentManifest, key: &str, path: &Path) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    manifest.outputs.insert(
        key.to_string(),
        OutputEntry {
            path: name,
            sha256: sha256_file(path)?,
        },
    );
    Ok(())
}

fn run_stages(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
    resume: bool,
    manifest: &mut ExperimentManifest,
) -> Result<RunSummary> {
    let level1_path: PathBuf = out_dir.join(LEVEL1_FILE);
    let reused = if resume { reusable_level1(cfg, out_dir) } else { None };
    let level1_reused = reused.is_some();
    if !level1_reused {
        let pool = stage("detect", thread_pool(threads))?;
        let events = stage("detect", detect_events(cfg, &pool))?;
        stage("detect", write_level1_archive(&level1_path, &events))?;
    }
    // Downstream stages always work from the archive as written.
    let level1 = stage("detect", read_level1_archive(&level1_path))?;
    record(manifest, "level1", &level1_path)?;
    manifest.inputs = vec![LEVEL1_FILE.to_string()];

    let (pairs, second) = stage("filter", filter_candidates(cfg, &level1))?;
    let cand_path = out_dir.join(CANDIDATES_FILE);
    stage(
        "filter",
        std::fs::File::create(&cand_path)
            .map_err(Error::from)
            .and_then(|f| write_candidates_csv(std::io::BufWriter::new(f), &second.passed)),
    )?;
    record(manifest, "candidates", &cand_path)?;

    let analysis = stage("analyze", analyze_candidates(cfg, &level1, &second.passed))?;
    let stats_path = out_dir.join(STATS_FILE);
    stage(
        "analyze",
        std::fs::File::create(&stats_path)
            .map_err(Error::from)
            .and_then(|f| write_stats_csv(std::io::BufWriter::new(f), &analysis.bins)),
    )?;
    record(manifest, "stats", &stats_path)?;

    let svg = plot_stats(&analysis.bins, cfg.stats.fwhm_center_hr, cfg.stats.fwhm_width_hr);
    let fig_path = out_dir.join(FIGURE_FILE);
    stage("plot", std::fs::write(&fig_path, svg).map_err(Error::from))?;
    record(manifest, "figure", &fig_path)?;

    let s = &mut manifest.summary;
    s.insert("level1_events".into(), level1.len().to_string());
    s.insert("pair_candidates".into(), pairs.len().to_string());
    s.insert("second_level_candidates".into(), second.passed.len().to_string());
    if let Some(peak) = &analysis.peak {
        s.insert("peak_ra_low_hr".into(), format!("{:.4}", peak.stats.ra_low_hr));
        s.insert("peak_ra_high_hr".into(), format!("{:.4}", peak.stats.ra_high_hr));
        s.insert(
            "peak_cohens_d".into(),
            format!("{:.6}", peak.stats.cohens_d.unwrap_or(f64::NAN)),
        );
        s.insert("peak_tail_prob_ge".into(), format!("{:.6e}", peak.stats.tail_prob_ge));
        s.insert("peak_tail_prob_gt".into(), format!("{:.6e}", peak.stats.tail_prob_gt));
    }
    manifest.status = "complete".into();
    manifest.write(&out_dir.join(MANIFEST_FILE))?;

    Ok(RunSummary {
        manifest: manifest.clone(),
        level1_events: level1.len(),
        pair_candidates: pairs.len(),
        second_level: second,
        analysis,
        level1_reused,
    })
}

/// Largest in-window `|d|` of a pure-noise version of `cfg` (sources
/// silenced) for each seed. Runs entirely in memory.
pub fn null_experiment(cfg: &ExperimentConfig, seeds: &[u64], pool: &rayon::ThreadPool) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.observation.seed = seed;
            for s in &mut c.sources {
                s.pulse_rate_per_frame = 0.0;
            }
            let level1: Vec<PulseEvent> = detect_events(&c, pool)?
                .iter()
                .map(crate::pairdetect::quantize_event)
                .collect();
            let (_, second) = filter_candidates(&c, &level1)?;
            let a = analyze_candidates(&c, &level1, &second.passed)?;
            Ok(a.bins.iter().filter_map(|b| b.cohens_d).fold(0.0f64, |m, d| m.max(d.abs())))
        })
        .collect()
}
