//! Local wall-clock calendar shared by profiles, weather and timing.
//!
//! A year is laid out as `days_in_year * 96` quarter-hour slots in local
//! time. Slot `q` belongs to day `q / 96`, hour `(q % 96) / 4`.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, LocalResult, NaiveDate, NaiveDateTime, TimeZone, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QUARTERS_PER_DAY: usize = 96;
pub const QUARTERS_PER_HOUR: usize = 4;
pub const HOURS_PER_DAY: usize = 24;
/// Energy of one quarter-hour at 1 kW mean power, in kWh.
pub const QUARTER_HOUR_H: f64 = 0.25;

pub const DEFAULT_TIMEZONE: Tz = chrono_tz::Europe::Brussels;

pub fn days_in_year(year: i32) -> usize {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

pub fn quarters_in_year(year: i32) -> usize {
    days_in_year(year) * QUARTERS_PER_DAY
}

pub fn hours_in_year(year: i32) -> usize {
    days_in_year(year) * HOURS_PER_DAY
}

pub fn day_of_quarter(q: usize) -> usize {
    q / QUARTERS_PER_DAY
}

pub fn hour_of_quarter(q: usize) -> usize {
    (q % QUARTERS_PER_DAY) / QUARTERS_PER_HOUR
}

/// Calendar date of a zero-based day of the year.
pub fn date_of_day(year: i32, day: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year") + Duration::days(day as i64)
}

/// Wall-clock start time of slot `q`.
pub fn slot_start(year: i32, q: usize) -> NaiveDateTime {
    let minutes = (q % QUARTERS_PER_DAY) * 15;
    date_of_day(year, day_of_quarter(q))
        .and_hms_opt((minutes / 60) as u32, (minutes % 60) as u32, 0)
        .expect("valid wall-clock time")
}

/// Slot index of a wall-clock time, or an error if it is not on a
/// quarter-hour boundary or falls outside `year`.
pub fn slot_of(year: i32, t: &NaiveDateTime) -> Result<usize> {
    if t.year() != year {
        return Err(Error::YearMismatch {
            expected: year,
            found: t.year(),
        });
    }
    if !t.minute().is_multiple_of(15) || t.second() != 0 || t.nanosecond() != 0 {
        return Err(Error::UnalignedTimestamp(t.to_string()));
    }
    let day = t.ordinal0() as usize;
    Ok(day * QUARTERS_PER_DAY + t.hour() as usize * QUARTERS_PER_HOUR + t.minute() as usize / 15)
}

/// Slots whose wall-clock start does not exist in `tz` (spring-forward).
pub fn nonexistent_slots(year: i32, tz: Tz) -> Vec<usize> {
    slots_matching(year, tz, |r| matches!(r, LocalResult::None))
}

/// Slots whose wall-clock start occurs twice in `tz` (fall-back).
pub fn ambiguous_slots(year: i32, tz: Tz) -> Vec<usize> {
    slots_matching(year, tz, |r| matches!(r, LocalResult::Ambiguous(..)))
}

fn slots_matching(
    year: i32,
    tz: Tz,
    pred: impl Fn(&LocalResult<chrono::DateTime<Tz>>) -> bool,
) -> Vec<usize> {
    (0..quarters_in_year(year))
        .filter(|&q| pred(&tz.from_local_datetime(&slot_start(year, q))))
        .collect()
}

/// Half-open range of zero-based days of the year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: usize,
    pub end: usize,
}

impl DayRange {
    pub fn new(start: usize, end: usize) -> Self {
        DayRange { start, end }
    }

    pub fn full_year(year: i32) -> Self {
        DayRange::new(0, days_in_year(year))
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn days(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }

    pub fn quarters(&self) -> std::ops::Range<usize> {
        self.start * QUARTERS_PER_DAY..self.end * QUARTERS_PER_DAY
    }

    pub fn validate(&self, year: i32) -> Result<()> {
        let days = days_in_year(year);
        if self.start >= self.end || self.end > days {
            return Err(Error::DayRange {
                start: self.start,
                end: self.end,
                days,
            });
        }
        Ok(())
    }
}

impl fmt::Display for DayRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Parses `start..end` (half-open, zero-based days).
impl FromStr for DayRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected START..END, got `{s}`"))?;
        let start = a
            .trim()
            .parse()
            .map_err(|e| format!("bad start `{a}`: {e}"))?;
        let end = b
            .trim()
            .parse()
            .map_err(|e| format!("bad end `{b}`: {e}"))?;
        Ok(DayRange { start, end })
    }
}
