//! When feeder peaks happen.
//!
//! Peak quarter-hour indices are local wall-clock slots, so a peak maps to
//! day `q / 96` and hour `(q % 96) / 4` without further time-zone work.

mod envelope;
mod figures;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::{date_of_day, day_of_quarter, days_in_year, hour_of_quarter, HOURS_PER_DAY};
use crate::error::{Error, Result};
use crate::profile_store::Direction;
use crate::sampler::{SampleRecord, SampleRow, SamplingReport};
use crate::stats::entropy;
use crate::weather::{daily_max_ssrd, daily_mean_temperature, WeatherSeries};

pub use envelope::{feeder_envelope, EnvelopeBands, FeederEnvelope};
pub use figures::{figure_stem, ExportFigures, PeakTiming};

/// Where in the year the sampled feeders peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTimeDistribution {
    pub direction: Direction,
    pub n_connections: usize,
    pub year: i32,
    pub n_samples: usize,
    /// Fraction of samples peaking on each day.
    pub day_histogram: Vec<f64>,
    /// `days x 24`, row-major: fraction of samples peaking in each hour.
    pub hour_day_matrix: Vec<f64>,
}

impl PeakTimeDistribution {
    pub fn days(&self) -> usize {
        self.day_histogram.len()
    }

    pub fn cell(&self, day: usize, hour: usize) -> f64 {
        self.hour_day_matrix[day * HOURS_PER_DAY + hour]
    }

    /// Shannon entropy (nats) of the hour x day cells.
    pub fn entropy(&self) -> f64 {
        entropy(&self.hour_day_matrix)
    }

    pub fn day_entropy(&self) -> f64 {
        entropy(&self.day_histogram)
    }

    /// Probability mass on the given days.
    pub fn mass_on(&self, days: &[usize]) -> f64 {
        days.iter().map(|&d| self.day_histogram[d]).sum()
    }

    /// Most likely peak day; the earliest on ties.
    pub fn modal_day(&self) -> usize {
        (0..self.days())
            .reduce(|a, b| {
                if self.day_histogram[b] > self.day_histogram[a] {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty year")
    }

    pub fn from_report(
        report: &SamplingReport,
        n_connections: usize,
        direction: Direction,
    ) -> Result<Self> {
        let result = report.result(n_connections, direction).ok_or_else(|| {
            Error::Config(format!(
                "report has no {direction} result for n = {n_connections}"
            ))
        })?;
        peak_time_distribution(&result.samples, direction, n_connections, report.year)
    }
}

pub fn peak_time_distribution(
    samples: &[SampleRecord],
    direction: Direction,
    n_connections: usize,
    year: i32,
) -> Result<PeakTimeDistribution> {
    if samples.is_empty() {
        return Err(Error::Empty("sample table"));
    }
    let days = days_in_year(year);
    let mut day_counts = vec![0u64; days];
    let mut cell_counts = vec![0u64; days * HOURS_PER_DAY];
    for s in samples {
        let day = day_of_quarter(s.peak_quarter_index);
        if day >= days {
            return Err(Error::Config(format!(
                "sample {} peaks at quarter {} beyond the {year} calendar",
                s.sample_id, s.peak_quarter_index
            )));
        }
        day_counts[day] += 1;
        cell_counts[day * HOURS_PER_DAY + hour_of_quarter(s.peak_quarter_index)] += 1;
    }
    let n = samples.len() as f64;
    let normalize = |c: Vec<u64>| c.into_iter().map(|c| c as f64 / n).collect();
    Ok(PeakTimeDistribution {
        direction,
        n_connections,
        year,
        n_samples: samples.len(),
        day_histogram: normalize(day_counts),
        hour_day_matrix: normalize(cell_counts),
    })
}

/// One distribution per `(n_connections, direction)` group of a raw sample
/// table, ordered by size then direction.
pub fn distributions_from_rows(rows: &[SampleRow], year: i32) -> Result<Vec<PeakTimeDistribution>> {
    let mut keys: Vec<(usize, Direction)> = rows
        .iter()
        .map(|r| (r.n_connections, r.direction))
        .collect();
    keys.sort_unstable_by_key(|&(n, d)| (n, d as u8));
    keys.dedup();
    keys.into_iter()
        .map(|(n, d)| {
            let samples: Vec<SampleRecord> = rows
                .iter()
                .filter(|r| r.n_connections == n && r.direction == d)
                .map(|r| r.record)
                .collect();
            peak_time_distribution(&samples, d, n, year)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub day: usize,
    pub date: NaiveDate,
    pub peak_probability: f64,
    pub mean_temperature_c: f64,
    pub max_ssrd_kw_m2: f64,
}

/// Joins the day histogram with daily weather.
pub fn weather_overlay(dist: &PeakTimeDistribution, w: &WeatherSeries) -> Result<Vec<OverlayRow>> {
    if w.year() != dist.year {
        return Err(Error::YearMismatch {
            expected: dist.year,
            found: w.year(),
        });
    }
    let temperature = daily_mean_temperature(w);
    let ssrd = daily_max_ssrd(w);
    Ok((0..dist.days())
        .map(|day| OverlayRow {
            day,
            date: date_of_day(dist.year, day),
            peak_probability: dist.day_histogram[day],
            mean_temperature_c: temperature[day],
            max_ssrd_kw_m2: ssrd[day],
        })
        .collect())
}

/// The `k` days with the lowest mean temperature, coldest first.
pub fn coldest_days(w: &WeatherSeries, k: usize) -> Vec<usize> {
    let t = daily_mean_temperature(w);
    let mut days: Vec<usize> = (0..t.len()).collect();
    days.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
    days.truncate(k);
    days
}
