use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono_tz::Tz;
use serde::Serialize;

use super::dst::{normalize_dst, LocalTimestamp, Reading};
use super::{Profile, ProfileLabels, ProfileSet};
use crate::calendar::{slot_start, DEFAULT_TIMEZONE, QUARTERS_PER_DAY};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub year: i32,
    pub timezone: Tz,
    /// Longest run of missing quarter-hours that is still interpolated.
    pub max_gap: usize,
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            year: 2022,
            timezone: DEFAULT_TIMEZONE,
            max_gap: QUARTERS_PER_DAY,
            delimiter: b',',
            has_header: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedRow,
    DuplicateReading,
    GapInterpolated,
    ProfileRejected,
    MissingLabels,
    UnusedLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub profile_id: Option<String>,
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(line) = self.line {
            write!(f, " line {line}")?;
        }
        if let Some(id) = &self.profile_id {
            write!(f, " [{id}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub set: ProfileSet,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestOutcome {
    pub fn rejected_ids(&self) -> Vec<&str> {
        self.diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::ProfileRejected)
            .filter_map(|d| d.profile_id.as_deref())
            .collect()
    }
}

/// A run of slots as `(start, len)`.
pub type Run = (usize, usize);

/// Linear interpolation over runs of missing values no longer than
/// `max_gap`. Runs touching either end of the series are held at the
/// nearest known value. Returns the filled series and the filled runs, or
/// the first run that is too long.
pub fn fill_gaps(
    slots: &[Option<f64>],
    max_gap: usize,
) -> std::result::Result<(Vec<f64>, Vec<Run>), Run> {
    if slots.iter().all(Option::is_none) {
        return Err((0, slots.len()));
    }
    let mut out = Vec::with_capacity(slots.len());
    let mut runs = Vec::new();
    let mut i = 0;
    while i < slots.len() {
        if let Some(v) = slots[i] {
            out.push(v);
            i += 1;
            continue;
        }
        let start = i;
        while i < slots.len() && slots[i].is_none() {
            i += 1;
        }
        let len = i - start;
        if len > max_gap {
            return Err((start, len));
        }
        let before = start.checked_sub(1).and_then(|k| slots[k]);
        let after = slots.get(i).copied().flatten();
        for j in 0..len {
            let v = match (before, after) {
                (Some(a), Some(b)) => a + (b - a) * (j + 1) as f64 / (len + 1) as f64,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!(),
            };
            out.push(v);
        }
        runs.push((start, len));
    }
    Ok((out, runs))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

fn parse_opt_f64(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("`{s}`: {e}"))
}

/// Reads `profile_id,has_hp,has_ev,pv_inverter_kva,connection_power_kva`.
pub fn read_labels(path: &Path) -> Result<Vec<(String, ProfileLabels)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::format(path, format!("line {line}: {msg}"));
        if record.len() < 3 {
            return Err(bad(format!(
                "expected at least 3 fields, got {}",
                record.len()
            )));
        }
        let id = record[0].to_string();
        let has_hp =
            parse_bool(&record[1]).ok_or_else(|| bad(format!("bad has_hp `{}`", &record[1])))?;
        let has_ev =
            parse_bool(&record[2]).ok_or_else(|| bad(format!("bad has_ev `{}`", &record[2])))?;
        let pv_inverter_kva = parse_opt_f64(record.get(3).unwrap_or("")).map_err(bad)?;
        let connection_power_kva = parse_opt_f64(record.get(4).unwrap_or("")).map_err(bad)?;
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::DuplicateId(id));
        }
        out.push((
            id,
            ProfileLabels {
                has_hp,
                has_ev,
                pv_inverter_kva,
                connection_power_kva,
                ev_max_charge_kw: None,
            },
        ));
    }
    Ok(out)
}

/// Reads long-format readings `profile_id,timestamp,power_kw` and the
/// optional labels file, normalizes every profile to the local-time grid
/// and validates it. Malformed rows are skipped and profiles that cannot be
/// repaired are rejected; both are reported as diagnostics.
pub fn ingest_profiles(
    profiles_path: &Path,
    labels_path: Option<&Path>,
    config: &IngestConfig,
) -> Result<IngestOutcome> {
    let mut diagnostics = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut readings: HashMap<String, Vec<Reading>> = HashMap::new();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(config.has_header)
        .delimiter(config.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(profiles_path)
        .map_err(|e| Error::csv(profiles_path, e))?;
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(Error::csv(profiles_path, e)),
            Err(e) => {
                diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::MalformedRow,
                    profile_id: None,
                    line: e.position().map(|p| p.line()),
                    message: e.to_string(),
                });
                continue;
            }
        }
        let line = record.position().map(|p| p.line());
        let malformed = |message: String, id: Option<&str>| Diagnostic {
            kind: DiagnosticKind::MalformedRow,
            profile_id: id.map(str::to_string),
            line,
            message,
        };
        if record.len() != 3 {
            diagnostics.push(malformed(
                format!("expected 3 fields, got {}", record.len()),
                None,
            ));
            continue;
        }
        let id = &record[0];
        let Some(timestamp) = LocalTimestamp::parse(&record[1]) else {
            diagnostics.push(malformed(
                format!("bad timestamp `{}`", &record[1]),
                Some(id),
            ));
            continue;
        };
        let power_kw = match record[2].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                diagnostics.push(malformed(format!("bad power `{}`", &record[2]), Some(id)));
                continue;
            }
        };
        let entry = readings.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            Vec::new()
        });
        entry.push(Reading {
            timestamp,
            power_kw,
        });
    }

    let labels: Option<HashMap<String, ProfileLabels>> = match labels_path {
        Some(p) => Some(read_labels(p)?.into_iter().collect()),
        None => None,
    };

    let mut profiles = Vec::with_capacity(order.len());
    for id in &order {
        let rows = readings.remove(id).expect("grouped above");
        let reject = |message: String| Diagnostic {
            kind: DiagnosticKind::ProfileRejected,
            profile_id: Some(id.clone()),
            line: None,
            message,
        };
        let profile_labels = match &labels {
            Some(map) => match map.get(id) {
                Some(l) => l.clone(),
                None => {
                    diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::MissingLabels,
                        profile_id: Some(id.clone()),
                        line: None,
                        message: "no labels row".into(),
                    });
                    diagnostics.push(reject("no labels row".into()));
                    continue;
                }
            },
            None => ProfileLabels::default(),
        };
        let normalized = match normalize_dst(&rows, config.timezone, config.year) {
            Ok(n) => n,
            Err(e) => {
                diagnostics.push(reject(e.to_string()));
                continue;
            }
        };
        if normalized.dropped_duplicates > 0 {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::DuplicateReading,
                profile_id: Some(id.clone()),
                line: None,
                message: format!(
                    "{} repeated timestamps outside the DST transition, first occurrence kept",
                    normalized.dropped_duplicates
                ),
            });
        }
        let power = match fill_gaps(&normalized.slots, config.max_gap) {
            Ok((power, runs)) => {
                for (start, len) in runs {
                    diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::GapInterpolated,
                        profile_id: Some(id.clone()),
                        line: None,
                        message: format!(
                            "{len} missing quarter-hours from {} interpolated",
                            slot_start(config.year, start)
                        ),
                    });
                }
                power
            }
            Err((start, len)) => {
                diagnostics.push(reject(format!(
                    "{len} consecutive missing quarter-hours from {} exceed the limit of {}",
                    slot_start(config.year, start.min(normalized.slots.len() - 1)),
                    config.max_gap
                )));
                continue;
            }
        };
        match Profile::new(id.clone(), power, profile_labels) {
            Ok(p) => profiles.push(p),
            Err(e) => diagnostics.push(reject(e.to_string())),
        }
    }

    if let Some(map) = &labels {
        let present: HashSet<&String> = order.iter().collect();
        let mut unused: Vec<&String> = map.keys().filter(|k| !present.contains(k)).collect();
        unused.sort();
        for id in unused {
            diagnostics.push(Diagnostic {
                kind: DiagnosticKind::UnusedLabels,
                profile_id: Some(id.clone()),
                line: None,
                message: "labels row without readings".into(),
            });
        }
    }

    let set = ProfileSet::new(config.year, config.timezone, profiles)?;
    Ok(IngestOutcome { set, diagnostics })
}
