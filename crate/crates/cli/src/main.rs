use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pulsepair::calib::{fit_gauss_flat, tau_int_scan, DriftScan, Site};
use pulsepair::channelizer::{channelize_pair, write_measurements_csv};
use pulsepair::pairdetect::{read_level1_archive, write_level1_archive, PulseEvent};
use pulsepair::pipeline::{
    self, analyze_candidates, detect_events, filter_candidates, null_experiment, plot_stats, run_experiment,
    thread_pool, tune_tau, write_candidates_csv,
};
use pulsepair::sigsim::{simulate_correlator_frames, simulate_drift_scan, CorrelatorSpec, DriftScanSpec, Simulator};
use pulsepair::skystats::{read_stats_csv, write_stats_csv, RaBinStats};
use pulsepair::{Error, ExperimentConfig};

/// Paired-pulse search over a simulated two-element drift-scan interferometer.
#[derive(Parser, Debug)]
#[command(name = "pulsepair", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the simulation seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 picks one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Artifact format for commands that can write either.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump channelized bin measurements of a few frames to measurements.csv.
    Simulate {
        #[arg(long, default_value_t = 0)]
        first_frame: u64,
        #[arg(long, default_value_t = 1)]
        frames: u64,
    },
    /// Simulate the observation and write the level-1 archive (level1.csv).
    Detect,
    /// Pair and second-level filter an existing level-1 archive into candidates.csv.
    Refilter {
        /// Level-1 archive; defaults to level1.csv in the output directory.
        #[arg(long)]
        level1: Option<PathBuf>,
        /// Overrides the phase-filter half width (rad).
        #[arg(long)]
        halfwidth: Option<f64>,
        /// Overrides the lower log10 spacing bound (MHz).
        #[arg(long, allow_hyphen_values = true)]
        log_df_low: Option<f64>,
        /// Overrides the upper log10 spacing bound (MHz).
        #[arg(long, allow_hyphen_values = true)]
        log_df_high: Option<f64>,
        /// Overrides the instrument delay used by the filter (s).
        #[arg(long, allow_hyphen_values = true)]
        tau_int: Option<f64>,
    },
    /// RA-binned statistics of a level-1 archive: stats.csv, or figure.svg with --format svg.
    Analyze {
        #[arg(long)]
        level1: Option<PathBuf>,
    },
    /// Fit a drift scan for beam width and continuum SNR, and scan the instrument delay.
    Calibrate {
        /// Two-column utc_s,power drift scan; a simulated scan is used when omitted.
        #[arg(long)]
        drift_csv: Option<PathBuf>,
        #[arg(long, default_value = "calibrator")]
        source_name: String,
        /// Beam FWHM for the simulated scan (deg of RA).
        #[arg(long, default_value_t = 9.0)]
        fwhm_deg: f64,
        /// Continuum peak over floor for the simulated scan (dB).
        #[arg(long, default_value_t = 0.18)]
        snr_db: f64,
        #[arg(long, default_value_t = -200.0, allow_hyphen_values = true)]
        tap_low_ns: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tap_high_ns: f64,
        #[arg(long, default_value_t = 10.0)]
        tap_step_ns: f64,
    },
    /// Grid search of the instrument delay against a level-1 archive.
    TuneTau {
        #[arg(long)]
        level1: Option<PathBuf>,
    },
    /// Largest |d| of noise-only runs over consecutive seeds.
    NullMc {
        #[arg(long, default_value_t = 20)]
        runs: u64,
        /// |d| at or above which a run counts as a false detection.
        #[arg(long, default_value_t = 3.5)]
        significance: f64,
    },
    /// Render stats.csv as figure.svg, or print it with --format csv.
    Report {
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Every stage in order, with manifest.toml written last.
    Run {
        /// Reuse a matching level-1 archive already in the output directory.
        #[arg(long)]
        resume: bool,
    },
}

fn load_config(g: &Global) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.observation.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_out(g: &Global) -> anyhow::Result<&Path> {
    std::fs::create_dir_all(&g.out).with_context(|| format!("cannot create {}", g.out.display()))?;
    Ok(&g.out)
}

fn level1_path(g: &Global, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| g.out.join(pipeline::LEVEL1_FILE))
}

fn read_level1(path: &Path) -> anyhow::Result<Vec<PulseEvent>> {
    read_level1_archive(path).with_context(|| format!("reading level-1 archive {}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> pulsepair::Result<()>) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn print_peak(stats: &[RaBinStats]) {
    let peak = stats
        .iter()
        .filter(|s| s.cohens_d.is_some())
        .max_by(|a, b| a.cohens_d.partial_cmp(&b.cohens_d).unwrap_or(std::cmp::Ordering::Equal));
    match peak {
        Some(p) => {
            println!(
                "peak bin {:.2}-{:.2} h: {} of {} (mean {:.2}), d = {:.3}",
                p.ra_low_hr,
                p.ra_high_hr,
                p.observed_count,
                p.trials_n,
                p.expected_mean,
                p.cohens_d.unwrap_or(f64::NAN)
            );
            println!("P(X >= {}) = {:.4e}, P(X > {}) = {:.4e}", p.observed_count, p.tail_prob_ge, p.observed_count, p.tail_prob_gt);
        }
        None => println!("no candidates in the analysis window"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { first_frame, frames } => {
            let cfg = load_config(g)?;
            let sim = Simulator::new(&cfg.observation, &cfg.sources, &cfg.rfi)?;
            let end = (first_frame + frames).min(sim.frame_count());
            if *first_frame >= end {
                bail!(Error::Input(format!("observation has only {} frames", sim.frame_count())));
            }
            let mut rows = Vec::new();
            for f in *first_frame..end {
                let (east, west) = sim.spectra(f)?;
                let (e, w) = channelize_pair(&cfg.observation, &east, &west, &sim.frame_info(f))?;
                rows.extend(e);
                rows.extend(w);
            }
            let path = create_out(g)?.join("measurements.csv");
            write_file(&path, |w| write_measurements_csv(w, &rows))?;
            println!("{} measurements from {} frames -> {}", rows.len(), end - first_frame, path.display());
        }
        Command::Detect => {
            let cfg = load_config(g)?;
            let pool = thread_pool(g.threads)?;
            let events = detect_events(&cfg, &pool)?;
            let path = create_out(g)?.join(pipeline::LEVEL1_FILE);
            write_level1_archive(&path, &events)?;
            println!("{} level-1 events over {} frames -> {}", events.len(), Simulator::new(&cfg.observation, &cfg.sources, &cfg.rfi)?.frame_count(), path.display());
        }
        Command::Refilter { level1, halfwidth, log_df_low, log_df_high, tau_int } => {
            let mut cfg = load_config(g)?;
            if let Some(h) = halfwidth {
                cfg.filter.filter_halfwidth_rad = *h;
            }
            if let Some(v) = log_df_low {
                cfg.filter.log_delta_f_low = *v;
            }
            if let Some(v) = log_df_high {
                cfg.filter.log_delta_f_high = *v;
            }
            if let Some(t) = tau_int {
                cfg.filter.tau_int_s = *t;
            }
            cfg.validate()?;
            let level1 = read_level1(&level1_path(g, level1))?;
            let (pairs, second) = filter_candidates(&cfg, &level1)?;
            let out = create_out(g)?;
            write_file(&out.join(pipeline::CANDIDATES_FILE), |w| write_candidates_csv(w, &second.passed))?;
            write_file(&out.join("diagnostics.csv"), |w| second.write_diagnostics_csv(w))?;
            println!("{} events, {} pairs, {} passed the second-level filter", level1.len(), pairs.len(), second.passed.len());
        }
        Command::Analyze { level1 } => {
            let cfg = load_config(g)?;
            let level1 = read_level1(&level1_path(g, level1))?;
            let (_, second) = filter_candidates(&cfg, &level1)?;
            let analysis = analyze_candidates(&cfg, &level1, &second.passed)?;
            let out = create_out(g)?;
            match g.format {
                Format::Csv => write_file(&out.join(pipeline::STATS_FILE), |w| write_stats_csv(w, &analysis.bins))?,
                Format::Svg => std::fs::write(
                    out.join(pipeline::FIGURE_FILE),
                    plot_stats(&analysis.bins, cfg.stats.fwhm_center_hr, cfg.stats.fwhm_width_hr),
                )?,
            }
            print_peak(&analysis.bins);
        }
        Command::Calibrate { drift_csv, source_name, fwhm_deg, snr_db, tap_low_ns, tap_high_ns, tap_step_ns } => {
            let cfg = load_config(g)?;
            let obs = &cfg.observation;
            let site = Site {
                latitude_deg: obs.latitude_deg,
                longitude_deg: obs.longitude_deg,
                azimuth_deg: obs.azimuth_deg,
            };
            let scan: DriftScan = match drift_csv {
                Some(path) => DriftScan::read_csv(path, source_name, obs.dec_deg)?,
                None => simulate_drift_scan(&DriftScanSpec {
                    site,
                    source_name: source_name.clone(),
                    dec_deg: obs.dec_deg,
                    fwhm_deg: *fwhm_deg,
                    continuum_snr_db: *snr_db,
                    seed: obs.seed,
                    ..DriftScanSpec::default()
                })?,
            };
            let fit = fit_gauss_flat(&scan, &site)?;
            println!("{}", fit.report(source_name));
            let frames = simulate_correlator_frames(&CorrelatorSpec {
                band_low_hz: obs.band_low_hz,
                band_high_hz: obs.band_high_hz,
                tau_int_true_s: obs.tau_int_true_s,
                baseline_meters: obs.baseline_meters,
                dec_deg: obs.dec_deg,
                seed: obs.seed,
                ..CorrelatorSpec::default()
            })?;
            let delay = tau_int_scan(&frames, tap_low_ns * 1e-9, tap_high_ns * 1e-9, tap_step_ns * 1e-9)?;
            println!("tau_int = {:.1} ns (+/- {:.1} ns)", delay.tau_int_s * 1e9, delay.uncertainty_s * 1e9);
            let path = create_out(g)?.join("calibration.csv");
            write_file(&path, |w| {
                writeln!(w, "source,center_ra_hr,fwhm_deg,amplitude,floor,tau_int_s")?;
                writeln!(
                    w,
                    "{},{:.6},{:.6},{:.6e},{:.6e},{:.6e}",
                    source_name,
                    fit.center_ra_hr,
                    fit.fwhm_deg(),
                    fit.amplitude,
                    fit.floor,
                    delay.tau_int_s
                )?;
                Ok(())
            })?;
        }
        Command::TuneTau { level1 } => {
            let cfg = load_config(g)?;
            let level1 = read_level1(&level1_path(g, level1))?;
            let pool = thread_pool(g.threads)?;
            let tuning = tune_tau(&cfg, &level1, &pool)?;
            let path = create_out(g)?.join("tau_scan.csv");
            write_file(&path, |w| {
                writeln!(w, "tau_int_s,peak_cohens_d")?;
                for (tau, d) in &tuning.objective {
                    writeln!(w, "{tau:.6e},{d:.6}")?;
                }
                Ok(())
            })?;
            println!("best tau_int = {:.3} ns (d = {:.3})", tuning.tau_best_s * 1e9, tuning.d_best);
        }
        Command::NullMc { runs, significance } => {
            let cfg = load_config(g)?;
            let pool = thread_pool(g.threads)?;
            let seeds: Vec<u64> = (0..*runs).map(|i| cfg.observation.seed.wrapping_add(i)).collect();
            let maxima = null_experiment(&cfg, &seeds, &pool)?;
            let path = create_out(g)?.join("null_mc.csv");
            write_file(&path, |w| {
                writeln!(w, "seed,max_abs_cohens_d")?;
                for (s, d) in seeds.iter().zip(&maxima) {
                    writeln!(w, "{s},{d:.6}")?;
                }
                Ok(())
            })?;
            let quiet = maxima.iter().filter(|&&d| d < *significance).count();
            println!("{quiet} of {} null runs stay below |d| = {significance}", maxima.len());
        }
        Command::Report { stats } => {
            let cfg = load_config(g)?;
            let path = stats.clone().unwrap_or_else(|| g.out.join(pipeline::STATS_FILE));
            let rows = read_stats_csv(&path)?;
            match g.format {
                Format::Svg => {
                    let fig = create_out(g)?.join(pipeline::FIGURE_FILE);
                    std::fs::write(&fig, plot_stats(&rows, cfg.stats.fwhm_center_hr, cfg.stats.fwhm_width_hr))?;
                    println!("figure -> {}", fig.display());
                }
                Format::Csv => write_stats_csv(std::io::stdout().lock(), &rows)?,
            }
            print_peak(&rows);
        }
        Command::Run { resume } => {
            let cfg = load_config(g)?;
            let summary = run_experiment(&cfg, &g.out, g.threads, *resume)?;
            println!(
                "{} level-1 events{}, {} pairs, {} candidates",
                summary.level1_events,
                if summary.level1_reused { " (reused)" } else { "" },
                summary.pair_candidates,
                summary.second_level.passed.len()
            );
            print_peak(&summary.analysis.bins);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::Input(_) | Error::Archive { .. } | Error::TomlDe(_) | Error::Misaligned { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
