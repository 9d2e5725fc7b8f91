//! Level-1 archive: one CSV row per pulse event, fixed column precision.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::PulseEvent;
use crate::config::PolTag;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const ARCHIVE_HEADER: &str = "schema_version,utc_s,frame_index,bin_index,rf_freq_hz,snr_east_db,snr_west_db,\
phase_east_rad,phase_west_rad,polarization_tag,ra_pointing_hr";

/// Formats with 6 significant digits, like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mant, e) = sci.split_at(sci.find('e').expect("exponent"));
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}{e}")
    }
}

fn format_row(e: &PulseEvent) -> String {
    format!(
        "{SCHEMA_VERSION},{:.3},{},{},{:.1},{},{},{},{},{},{}",
        e.utc_s,
        e.frame_index,
        e.bin_index,
        e.rf_freq_hz,
        format_sig6(e.snr_east_db),
        format_sig6(e.snr_west_db),
        format_sig6(e.phase_east_rad),
        format_sig6(e.phase_west_rad),
        e.polarization_tag.as_str(),
        format_sig6(e.ra_pointing_hr),
    )
}

fn parse_row(line: &str) -> std::result::Result<PulseEvent, String> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 11 {
        return Err(format!("expected 11 columns, found {}", cols.len()));
    }
    let version: u32 = cols[0].parse().map_err(|_| format!("bad schema_version `{}`", cols[0]))?;
    if version != SCHEMA_VERSION {
        return Err(format!("schema version {version} is not supported (expected {SCHEMA_VERSION})"));
    }
    let f = |i: usize, name: &str| -> std::result::Result<f64, String> {
        cols[i]
            .parse::<f64>()
            .map_err(|_| format!("bad {name} `{}`", cols[i]))
    };
    Ok(PulseEvent {
        utc_s: f(1, "utc_s")?,
        frame_index: cols[2].parse().map_err(|_| format!("bad frame_index `{}`", cols[2]))?,
        bin_index: cols[3].parse().map_err(|_| format!("bad bin_index `{}`", cols[3]))?,
        rf_freq_hz: f(4, "rf_freq_hz")?,
        snr_east_db: f(5, "snr_east_db")?,
        snr_west_db: f(6, "snr_west_db")?,
        phase_east_rad: f(7, "phase_east_rad")?,
        phase_west_rad: f(8, "phase_west_rad")?,
        polarization_tag: PolTag::parse(cols[9]).ok_or_else(|| format!("bad polarization_tag `{}`", cols[9]))?,
        ra_pointing_hr: f(10, "ra_pointing_hr")?,
    })
}

/// The event exactly as it reads back from an archive.
pub fn quantize_event(e: &PulseEvent) -> PulseEvent {
    parse_row(&format_row(e)).expect("formatted rows always parse")
}

/// Append-only archive writer. A new or empty file gets the header; an
/// existing file must already carry it.
pub struct Level1Writer {
    out: BufWriter<File>,
    rows: u64,
}

impl Level1Writer {
    pub fn append(path: &Path) -> Result<Self> {
        let existing = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        if existing > 0 {
            let mut first = String::new();
            BufReader::new(File::open(path)?).read_line(&mut first)?;
            if first.trim_end() != ARCHIVE_HEADER {
                return Err(archive_err(path, 1, "existing file is not a level-1 archive"));
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        if existing == 0 {
            writeln!(out, "{ARCHIVE_HEADER}")?;
        }
        Ok(Self { out, rows: 0 })
    }

    pub fn write(&mut self, event: &PulseEvent) -> Result<()> {
        writeln!(self.out, "{}", format_row(event))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes a fresh archive, replacing any file at `path`.
pub fn write_level1_archive(path: &Path, events: &[PulseEvent]) -> Result<()> {
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    let mut w = Level1Writer::append(path)?;
    for e in events {
        w.write(e)?;
    }
    w.finish()
}

fn archive_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Archive {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

pub fn read_level1_archive(path: &Path) -> Result<Vec<PulseEvent>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            if line.trim_end() != ARCHIVE_HEADER {
                let msg = match line.split(',').next() {
                    Some("schema_version") => "header columns do not match this schema version",
                    _ => "missing level-1 archive header",
                };
                return Err(archive_err(path, lineno, msg));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        events.push(parse_row(line.trim_end()).map_err(|m| archive_err(path, lineno, m))?);
    }
    Ok(events)
}
