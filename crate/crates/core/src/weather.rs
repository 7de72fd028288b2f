//! Hourly weather for the population's single reference location.

use std::path::Path;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::calendar::{date_of_day, days_in_year, hours_in_year, HOURS_PER_DAY, QUARTERS_PER_HOUR};
use crate::error::{Error, Result};
use crate::profile_store::LocalTimestamp;

/// Hourly 2 m air temperature (°C) and surface solar radiation downwards
/// (kW/m²) for one year, on the local wall-clock hour grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    year: i32,
    temperature_c: Vec<f64>,
    ssrd_kw_m2: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(year: i32, temperature_c: Vec<f64>, ssrd_kw_m2: Vec<f64>) -> Result<WeatherSeries> {
        let expected = hours_in_year(year);
        for found in [temperature_c.len(), ssrd_kw_m2.len()] {
            if found != expected {
                return Err(Error::WeatherLength {
                    expected,
                    found,
                    first_missing: None,
                });
            }
        }
        if temperature_c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("temperature"));
        }
        if let Some((index, &value)) = ssrd_kw_m2
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < 0.0)
        {
            if !value.is_finite() {
                return Err(Error::NonFinite("irradiation"));
            }
            return Err(Error::NegativeIrradiation { index, value });
        }
        Ok(WeatherSeries {
            year,
            temperature_c,
            ssrd_kw_m2,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn temperature_c(&self) -> &[f64] {
        &self.temperature_c
    }

    pub fn ssrd_kw_m2(&self) -> &[f64] {
        &self.ssrd_kw_m2
    }

    pub fn days(&self) -> usize {
        days_in_year(self.year)
    }
}

/// Reads `timestamp,temperature_c,ssrd_kw_m2` with one row per wall-clock
/// hour of `year`.
pub fn ingest_weather(path: &Path, year: i32) -> Result<WeatherSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let n = hours_in_year(year);
    let mut temperature = vec![f64::NAN; n];
    let mut ssrd = vec![f64::NAN; n];
    let mut filled = vec![false; n];
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::format(path, format!("line {line}: {msg}"));
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", record.len())));
        }
        let t = LocalTimestamp::parse(&record[0])
            .ok_or_else(|| bad(format!("bad timestamp `{}`", &record[0])))?;
        let wall = match t {
            LocalTimestamp::Naive(t) => t,
            LocalTimestamp::Zoned(t) => t.naive_local(),
        };
        if wall.year() != year {
            return Err(Error::YearMismatch {
                expected: year,
                found: wall.year(),
            });
        }
        if wall.minute() != 0 || wall.second() != 0 {
            return Err(bad(format!("timestamp {wall} is not on the hour")));
        }
        let slot = wall.ordinal0() as usize * HOURS_PER_DAY + wall.hour() as usize;
        if filled[slot] {
            return Err(bad(format!("hour {wall} appears twice")));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .map_err(|e| bad(format!("bad {what} `{s}`: {e}")))
        };
        temperature[slot] = num(&record[1], "temperature")?;
        ssrd[slot] = num(&record[2], "ssrd")?;
        filled[slot] = true;
        rows += 1;
    }
    if let Some(gap) = filled.iter().position(|f| !f) {
        return Err(Error::WeatherLength {
            expected: n,
            found: rows,
            first_missing: Some(date_of_day(year, gap / HOURS_PER_DAY)),
        });
    }
    WeatherSeries::new(year, temperature, ssrd)
}

pub fn write_weather_csv(w: &WeatherSeries, path: &Path) -> Result<()> {
    use std::io::Write;
    crate::profile_store::write_text_file(path, |out| {
        writeln!(out, "timestamp,temperature_c,ssrd_kw_m2")?;
        for h in 0..w.temperature_c.len() {
            let t = date_of_day(w.year, h / HOURS_PER_DAY)
                .and_hms_opt((h % HOURS_PER_DAY) as u32, 0, 0)
                .expect("valid hour");
            writeln!(
                out,
                "{},{},{}",
                t.format("%Y-%m-%dT%H:%M:%S"),
                w.temperature_c[h],
                w.ssrd_kw_m2[h]
            )?;
        }
        Ok(())
    })
}

fn daily(values: &[f64], reduce: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    values.chunks_exact(HOURS_PER_DAY).map(reduce).collect()
}

pub fn daily_mean_temperature(w: &WeatherSeries) -> Vec<f64> {
    daily(&w.temperature_c, |d| d.iter().sum::<f64>() / d.len() as f64)
}

pub fn daily_max_ssrd(w: &WeatherSeries) -> Vec<f64> {
    daily(&w.ssrd_kw_m2, |d| {
        d.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Repeats every hourly value for the four quarter-hours of that hour.
pub fn expand_to_quarter_hours(hourly: &[f64]) -> Vec<f64> {
    hourly
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, QUARTERS_PER_HOUR))
        .collect()
}
