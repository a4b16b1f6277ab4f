//! Persistent formats: cascade files, dataset manifests, fit results,
//! forecast series and evaluation reports.
//!
//! Cascade files are line-oriented text (header keys, then one event per
//! line); everything else is pretty-printed JSON with a `schema_version`
//! field. Identical inputs serialize to identical bytes, and floats use
//! shortest round-trip encoding, so golden files diff cleanly. The exact
//! layouts are documented in `FORMATS.md` at the repository root.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::fit::FitResult;
use crate::forecast::ForecastSeries;
use crate::model::{Cascade, CascadeMeta, Event, TwoStageParams};

/// Current (major) schema version of every format this build writes.
pub const SCHEMA_VERSION: u32 = 1;

const CASCADE_MAGIC: &str = "cascade-file";

// ---------------------------------------------------------------------------
// Cascade text format
// ---------------------------------------------------------------------------

/// Serialize a cascade to its line-oriented text form.
pub fn cascade_to_string(cascade: &Cascade) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CASCADE_MAGIC} {SCHEMA_VERSION}");
    let _ = writeln!(out, "id: {}", cascade.id);
    if let Some(title) = &cascade.meta.title {
        let _ = writeln!(out, "title: {title}");
    }
    if let Some(date) = &cascade.meta.origin_date {
        let _ = writeln!(out, "origin-date: {date}");
    }
    if let Some(source) = &cascade.meta.source {
        let _ = writeln!(out, "source: {source}");
    }
    let _ = writeln!(out, "t-max: {}", cascade.t_max);
    let _ = writeln!(out, "events:");
    for e in &cascade.events {
        let _ = writeln!(out, "{} {}", e.time, e.followers);
    }
    out
}

pub fn save_cascade(cascade: &Cascade, path: &Path) -> Result<()> {
    std::fs::write(path, cascade_to_string(cascade)).map_err(|e| Error::io(path, e))
}

/// Parse a cascade file. Events missing the follower column default to 1;
/// out-of-order events are sorted with a warning; duplicate timestamps are
/// allowed.
pub fn load_cascade(path: &Path) -> Result<Cascade> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cascade(&text, path)
}

fn parse_cascade(text: &str, path: &Path) -> Result<Cascade> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| perr(1, "empty file".into()))?;
    let mut head = first.split_whitespace();
    if head.next() != Some(CASCADE_MAGIC) {
        return Err(perr(1, format!("expected `{CASCADE_MAGIC} <version>` header")));
    }
    let version: u32 = head
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| perr(1, "missing or malformed version".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found: version,
            supported: SCHEMA_VERSION,
        });
    }

    let mut id: Option<String> = None;
    let mut meta = CascadeMeta::default();
    let mut t_max: Option<f64> = None;
    let mut events: Vec<Event> = Vec::new();
    let mut in_events = false;

    for (ln0, raw) in lines {
        let line_no = ln0 + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !in_events {
            if line == "events:" {
                in_events = true;
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| perr(line_no, format!("expected `key: value`, got `{line}`")))?;
            let value = value.trim().to_string();
            match key.trim() {
                "id" => id = Some(value),
                "title" => meta.title = Some(value),
                "origin-date" => meta.origin_date = Some(value),
                "source" => meta.source = Some(value),
                "t-max" => {
                    t_max = Some(value.parse().map_err(|_| {
                        perr(line_no, format!("malformed t-max value `{value}`"))
                    })?)
                }
                other => {
                    return Err(perr(line_no, format!("unknown header key `{other}`")));
                }
            }
        } else {
            let mut parts = line.split_whitespace();
            let time: f64 = parts
                .next()
                .unwrap()
                .parse()
                .map_err(|_| perr(line_no, format!("malformed event time in `{line}`")))?;
            let followers: u64 = match parts.next() {
                Some(f) => f.parse().map_err(|_| {
                    perr(
                        line_no,
                        format!("malformed follower count in `{line}` (must be a non-negative integer)"),
                    )
                })?,
                None => 1,
            };
            if parts.next().is_some() {
                return Err(perr(line_no, format!("too many columns in `{line}`")));
            }
            if !time.is_finite() || time < 0.0 {
                return Err(Error::invalid(
                    "event time",
                    format!("{time} at {}:{line_no}", path.display()),
                ));
            }
            events.push(Event::new(time, followers));
        }
    }

    let id = id.ok_or_else(|| perr(1, "missing `id:` header".into()))?;
    let t_max = t_max.ok_or_else(|| perr(1, "missing `t-max:` header".into()))?;
    if !events.windows(2).all(|w| w[0].time <= w[1].time) {
        log::warn!("{}: events out of order, sorting", path.display());
        events.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    }
    let mut cascade = Cascade::new(id, events, t_max)?;
    cascade.meta = meta;
    Ok(cascade)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// One labeled group of cascade files sharing (optional) truth parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSet {
    pub label: String,
    /// Present for synthetic suites; absent for observed data.
    pub truth: Option<TwoStageParams>,
    /// Paths relative to the manifest file.
    pub cascades: Vec<String>,
}

/// Dataset manifest: which cascade files make up a suite and how they are
/// meant to be consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Train/test split as a fraction of each record, when evaluating.
    pub split_fraction: Option<f64>,
    /// Observation-time grid for recovery experiments.
    pub t_obs_grid: Option<Vec<f64>>,
    pub sets: Vec<CascadeSet>,
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    write_json(manifest, path)
}

/// Load a manifest and verify every referenced cascade file exists next to
/// it.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found: manifest.schema_version,
            supported: SCHEMA_VERSION,
        });
    }
    let base = manifest_base(path);
    for set in &manifest.sets {
        for rel in &set.cascades {
            let p = base.join(rel);
            if !p.is_file() {
                return Err(Error::Precondition(format!(
                    "manifest {} references missing cascade file {}",
                    path.display(),
                    p.display()
                )));
            }
        }
    }
    Ok(manifest)
}

pub fn manifest_base(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Load every cascade of one set, in manifest order.
pub fn load_set_cascades(set: &CascadeSet, base: &Path) -> Result<Vec<Cascade>> {
    set.cascades
        .iter()
        .map(|rel| load_cascade(&base.join(rel)))
        .collect()
}

// ---------------------------------------------------------------------------
// JSON wrappers
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FitFile {
    schema_version: u32,
    fit: FitResult,
}

pub fn save_fit(fit: &FitResult, path: &Path) -> Result<()> {
    write_json(
        &FitFile {
            schema_version: SCHEMA_VERSION,
            fit: fit.clone(),
        },
        path,
    )
}

pub fn load_fit(path: &Path) -> Result<FitResult> {
    let file: FitFile = read_json(path)?;
    check_version(file.schema_version, path)?;
    Ok(file.fit)
}

#[derive(Serialize, Deserialize)]
struct ForecastFile {
    schema_version: u32,
    forecast: ForecastSeries,
}

pub fn save_forecast(series: &ForecastSeries, path: &Path) -> Result<()> {
    write_json(
        &ForecastFile {
            schema_version: SCHEMA_VERSION,
            forecast: series.clone(),
        },
        path,
    )
}

pub fn load_forecast(path: &Path) -> Result<ForecastSeries> {
    let file: ForecastFile = read_json(path)?;
    check_version(file.schema_version, path)?;
    Ok(file.forecast)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    schema_version: u32,
    report: EvalReport,
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    write_json(
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            report: report.clone(),
        },
        path,
    )
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let file: ReportFile = read_json(path)?;
    check_version(file.schema_version, path)?;
    Ok(file.report)
}

fn check_version(found: u32, path: &Path) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}
