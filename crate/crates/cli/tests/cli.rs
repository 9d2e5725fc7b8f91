use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsepair"))
}

/// The shipped scaled config cut down to one transit.
fn one_day_config(dir: &Path) -> PathBuf {
    let src = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/scaled.toml");
    let text = std::fs::read_to_string(src).unwrap().replace("duration_days = 6", "duration_days = 1");
    let path = dir.join("one_day.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

#[test]
fn run_writes_all_artifacts_independent_of_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = one_day_config(tmp.path());
    let mut stats = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = tmp.path().join(format!("t{threads}"));
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
            "run",
        ]);
        assert!(out.status.success());
        for f in ["level1.csv", "candidates.csv", "stats.csv", "figure.svg", "manifest.toml"] {
            assert!(out_dir.join(f).is_file(), "{f} missing");
        }
        stats.push(std::fs::read(out_dir.join("stats.csv")).unwrap());
    }
    assert_eq!(stats[0], stats[1]);
}

#[test]
fn staged_commands_chain_through_the_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = one_day_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("staged");
    let out = out.to_str().unwrap();
    assert!(run(&["--config", cfg, "--out", out, "detect"]).status.success());

    let count = |args: &[&str]| -> usize {
        assert!(run(args).status.success());
        let text = std::fs::read_to_string(Path::new(out).join("candidates.csv")).unwrap();
        text.lines().count() - 1
    };
    let narrow = count(&["--config", cfg, "--out", out, "refilter"]);
    let wide = count(&["--config", cfg, "--out", out, "refilter", "--halfwidth", "0.08"]);
    assert!(wide >= narrow, "{narrow} then {wide}");

    assert!(run(&["--config", cfg, "--out", out, "analyze"]).status.success());
    assert!(run(&["--config", cfg, "--out", out, "--format", "svg", "report"]).status.success());
    let svg = std::fs::read_to_string(Path::new(out).join("figure.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("FWHM"));
    assert!(run(&["--config", cfg, "--out", out, "tune-tau"]).status.success());
    assert!(Path::new(out).join("tau_scan.csv").is_file());
}

#[test]
fn calibrate_reports_the_beam() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--out", tmp.path().to_str().unwrap(), "calibrate", "--fwhm-deg", "8.2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let fwhm: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("fwhm_deg = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((fwhm - 8.2).abs() < 0.2, "{text}");
    assert!(tmp.path().join("calibration.csv").is_file());
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    // Usage error.
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["run", "--threads", "many"]).output().unwrap().status.code(), Some(1));
    // Help is not an error.
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));

    // Validation failure: a config that parses but is inconsistent.
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "experiment_id = \"bad\"\n[observation]\nband_low_hz = 1455e6\nband_high_hz = 1405e6\n").unwrap();
    let code = bin().args(["--config", bad.to_str().unwrap(), "detect"]).output().unwrap().status.code();
    assert_eq!(code, Some(3));

    // Malformed archive rows are a validation failure too.
    let archive = tmp.path().join("level1.csv");
    std::fs::write(&archive, "not,an,archive\n1,2\n").unwrap();
    let code = bin()
        .args(["--out", tmp.path().to_str().unwrap(), "refilter"])
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(3));

    // Stage failure: the input archive is missing.
    let empty = tmp.path().join("empty");
    let code = bin()
        .args(["--out", empty.to_str().unwrap(), "analyze"])
        .output()
        .unwrap()
        .status
        .code();
    assert_eq!(code, Some(2));
}
