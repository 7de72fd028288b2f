use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile_store::{write_text_file, Direction};
use crate::stats::DistributionSummary;

use super::SamplingConfig;

/// One row of the raw per-sample table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: usize,
    pub peak_kw: f64,
    pub peak_quarter_index: usize,
    pub simultaneity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub direction: Direction,
    pub peak_kw: DistributionSummary,
    pub peak_per_connection_kw: DistributionSummary,
    /// Over samples where it is defined.
    pub simultaneity: Option<DistributionSummary>,
    pub undefined_simultaneity: usize,
    /// Written separately as the raw table.
    #[serde(skip)]
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n_connections: usize,
    pub results: Vec<DirectionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub config: SamplingConfig,
    /// Size of the sampled subset.
    pub population: usize,
    pub year: i32,
    pub timezone: String,
    pub sizes: Vec<SizeReport>,
}

const SUMMARY_HEADER: &str =
    "n_connections,direction,metric,count,mean,sd,min,p5,p25,p50,p75,p95,max";
const SAMPLES_HEADER: &str =
    "n_connections,direction,sample_id,peak_kw,peak_quarter_index,simultaneity";

impl SamplingReport {
    pub fn result(&self, n_connections: usize, direction: Direction) -> Option<&DirectionResult> {
        self.sizes
            .iter()
            .find(|s| s.n_connections == n_connections)?
            .results
            .iter()
            .find(|r| r.direction == direction)
    }

    pub fn summaries(
        &self,
    ) -> impl Iterator<Item = (usize, Direction, &'static str, &DistributionSummary)> {
        self.sizes.iter().flat_map(|s| {
            s.results.iter().flat_map(move |r| {
                [
                    Some(("peak_kw", &r.peak_kw)),
                    Some(("peak_per_connection_kw", &r.peak_per_connection_kw)),
                    r.simultaneity.as_ref().map(|d| ("simultaneity", d)),
                ]
                .into_iter()
                .flatten()
                .map(move |(name, d)| (s.n_connections, r.direction, name, d))
            })
        })
    }

    /// Every summary satisfies min ≤ p5 ≤ p25 ≤ p50 ≤ p75 ≤ p95 ≤ max.
    pub fn is_ordered(&self) -> bool {
        self.summaries().all(|(_, _, _, d)| d.is_ordered())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body =
            serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        write_text_file(path, |w| writeln!(w, "{body}"))
    }

    pub fn read_json(path: &Path) -> Result<SamplingReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// One line per feeder size, direction and metric.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        write_text_file(path, |w| {
            writeln!(w, "{SUMMARY_HEADER}")?;
            for (n, dir, metric, d) in self.summaries() {
                writeln!(
                    w,
                    "{n},{},{metric},{},{},{},{},{},{},{},{},{},{}",
                    dir.name(),
                    d.count,
                    d.mean,
                    d.sd,
                    d.min,
                    d.p5,
                    d.p25,
                    d.p50,
                    d.p75,
                    d.p95,
                    d.max
                )?;
            }
            Ok(())
        })
    }

    pub fn write_samples_csv(&self, path: &Path) -> Result<()> {
        write_text_file(path, |w| {
            writeln!(w, "{SAMPLES_HEADER}")?;
            for s in &self.sizes {
                for r in &s.results {
                    for rec in &r.samples {
                        write!(
                            w,
                            "{},{},{},{},{},",
                            s.n_connections,
                            r.direction.name(),
                            rec.sample_id,
                            rec.peak_kw,
                            rec.peak_quarter_index
                        )?;
                        match rec.simultaneity {
                            Some(v) => writeln!(w, "{v}")?,
                            None => writeln!(w)?,
                        }
                    }
                }
            }
            Ok(())
        })
    }
}

/// A raw sample with its feeder size and direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub n_connections: usize,
    pub direction: Direction,
    pub record: SampleRecord,
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SampleRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::format(path, format!("line {line}: bad {what}"));
        if record.len() != 6 {
            return Err(bad("field count"));
        }
        let simultaneity = match record[5].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("simultaneity"))?),
        };
        out.push(SampleRow {
            n_connections: record[0].parse().map_err(|_| bad("n_connections"))?,
            direction: record[1].parse().map_err(|_| bad("direction"))?,
            record: SampleRecord {
                sample_id: record[2].parse().map_err(|_| bad("sample_id"))?,
                peak_kw: record[3].parse().map_err(|_| bad("peak_kw"))?,
                peak_quarter_index: record[4].parse().map_err(|_| bad("peak_quarter_index"))?,
                simultaneity,
            },
        });
    }
    Ok(out)
}

/// Difference `with − without` of every summary statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub mean: f64,
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

impl MetricDelta {
    fn between(with: &DistributionSummary, without: &DistributionSummary) -> MetricDelta {
        MetricDelta {
            mean: with.mean - without.mean,
            min: with.min - without.min,
            p5: with.p5 - without.p5,
            p25: with.p25 - without.p25,
            p50: with.p50 - without.p50,
            p75: with.p75 - without.p75,
            p95: with.p95 - without.p95,
            max: with.max - without.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRow {
    pub n_connections: usize,
    pub direction: Direction,
    /// Added peak per connection, kW.
    pub peak_per_connection_kw: MetricDelta,
    pub simultaneity: Option<MetricDelta>,
}

/// Per-connection contribution of a technology, estimated as the
/// difference between a population that has it and one that does not.
pub fn lct_contribution(
    with: &SamplingReport,
    without: &SamplingReport,
) -> Result<Vec<ContributionRow>> {
    let grid = |r: &SamplingReport| r.sizes.iter().map(|s| s.n_connections).collect::<Vec<_>>();
    if grid(with) != grid(without) {
        return Err(Error::GridMismatch(grid(with), grid(without)));
    }
    let mut rows = Vec::new();
    for (a, b) in with.sizes.iter().zip(&without.sizes) {
        for ra in &a.results {
            let rb = b
                .results
                .iter()
                .find(|r| r.direction == ra.direction)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "reports differ in direction: {} missing",
                        ra.direction.name()
                    ))
                })?;
            rows.push(ContributionRow {
                n_connections: a.n_connections,
                direction: ra.direction,
                peak_per_connection_kw: MetricDelta::between(
                    &ra.peak_per_connection_kw,
                    &rb.peak_per_connection_kw,
                ),
                simultaneity: match (&ra.simultaneity, &rb.simultaneity) {
                    (Some(x), Some(y)) => Some(MetricDelta::between(x, y)),
                    _ => None,
                },
            });
        }
    }
    Ok(rows)
}

pub fn write_contribution_csv(rows: &[ContributionRow], path: &Path) -> Result<()> {
    write_text_file(path, |w| {
        writeln!(
            w,
            "n_connections,direction,metric,mean,min,p5,p25,p50,p75,p95,max"
        )?;
        for r in rows {
            let metrics = [
                Some(("peak_per_connection_kw", r.peak_per_connection_kw)),
                r.simultaneity.map(|d| ("simultaneity", d)),
            ];
            for (name, d) in metrics.into_iter().flatten() {
                writeln!(
                    w,
                    "{},{},{name},{},{},{},{},{},{},{},{}",
                    r.n_connections,
                    r.direction.name(),
                    d.mean,
                    d.min,
                    d.p5,
                    d.p25,
                    d.p50,
                    d.p75,
                    d.p95,
                    d.max
                )?;
            }
        }
        Ok(())
    })
}
