use chrono::{DateTime, FixedOffset, NaiveDateTime};
use chrono_tz::Tz;

use crate::calendar::{
    ambiguous_slots, nonexistent_slots, quarters_in_year, slot_of, QUARTERS_PER_HOUR,
};
use crate::error::Result;

/// Timestamp of a reading: either local wall-clock time, or an instant with
/// an explicit UTC offset that is converted to wall-clock time in the
/// profile's zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimestamp {
    Naive(NaiveDateTime),
    Zoned(DateTime<FixedOffset>),
}

impl LocalTimestamp {
    pub fn parse(s: &str) -> Option<LocalTimestamp> {
        let s = s.trim();
        if let Ok(t) = DateTime::parse_from_rfc3339(s) {
            return Some(LocalTimestamp::Zoned(t));
        }
        [
            "%Y-%m-%dT%H:%M:%S",
            "%Y-%m-%d %H:%M:%S",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(LocalTimestamp::Naive)
    }

    pub fn wall_clock(&self, tz: Tz) -> NaiveDateTime {
        match self {
            LocalTimestamp::Naive(t) => *t,
            LocalTimestamp::Zoned(t) => t.with_timezone(&tz).naive_local(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub timestamp: LocalTimestamp,
    pub power_kw: f64,
}

/// Readings laid onto the fixed local-time grid of one year.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedReadings {
    /// One entry per quarter-hour; `None` where no reading exists.
    pub slots: Vec<Option<f64>>,
    /// Spring-forward slots filled from the previous hour.
    pub imputed: usize,
    /// Second occurrences of the fall-back hour that were dropped.
    pub dropped_repeats: usize,
    /// Other repeated timestamps (dropped, first occurrence kept).
    pub dropped_duplicates: usize,
}

/// Places readings on the `days * 96` local-time grid of `year`.
///
/// The hour skipped at the spring-forward transition is filled with the
/// four values of the preceding hour; the hour repeated at the fall-back
/// transition keeps its first occurrence only. Readings with explicit
/// offsets are ordered by instant before placement, naive ones keep file
/// order. Any reading outside `year` is an error.
pub fn normalize_dst(readings: &[Reading], tz: Tz, year: i32) -> Result<NormalizedReadings> {
    let mut order: Vec<usize> = (0..readings.len()).collect();
    if readings
        .iter()
        .all(|r| matches!(r.timestamp, LocalTimestamp::Zoned(_)))
    {
        order.sort_by_key(|&i| match readings[i].timestamp {
            LocalTimestamp::Zoned(t) => t.timestamp(),
            LocalTimestamp::Naive(_) => unreachable!(),
        });
    }

    let ambiguous = ambiguous_slots(year, tz);
    let mut out = NormalizedReadings {
        slots: vec![None; quarters_in_year(year)],
        imputed: 0,
        dropped_repeats: 0,
        dropped_duplicates: 0,
    };
    for i in order {
        let r = &readings[i];
        let slot = slot_of(year, &r.timestamp.wall_clock(tz))?;
        if out.slots[slot].is_some() {
            if ambiguous.binary_search(&slot).is_ok() {
                out.dropped_repeats += 1;
            } else {
                out.dropped_duplicates += 1;
            }
        } else {
            out.slots[slot] = Some(r.power_kw);
        }
    }

    for slot in nonexistent_slots(year, tz) {
        if out.slots[slot].is_none() && slot >= QUARTERS_PER_HOUR {
            if let Some(v) = out.slots[slot - QUARTERS_PER_HOUR] {
                out.slots[slot] = Some(v);
                out.imputed += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use chrono::{Duration, NaiveDate, TimeZone};

    use super::*;
    use crate::calendar::{slot_start, DEFAULT_TIMEZONE};
    use crate::error::Error;

    const SPRING_DAY: usize = 85; // 2022-03-27
    const AUTUMN_DAY: usize = 302; // 2022-10-30

    /// Readings as a meter in local time would report them: the skipped hour
    /// is absent and the repeated hour appears twice. Value = slot index,
    /// plus 0.5 for the second pass through the repeated hour.
    fn meter_readings(tz: Tz, zoned: bool) -> Vec<Reading> {
        let start = tz.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let end = tz.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let mut out = Vec::new();
        let mut t = start;
        let mut seen = std::collections::HashSet::new();
        while t < end {
            let wall = t.naive_local();
            let slot = slot_of(2022, &wall).unwrap();
            let value = slot as f64 + if seen.insert(slot) { 0.0 } else { 0.5 };
            let timestamp = if zoned {
                LocalTimestamp::Zoned(t.fixed_offset())
            } else {
                LocalTimestamp::Naive(wall)
            };
            out.push(Reading {
                timestamp,
                power_kw: value,
            });
            t += Duration::minutes(15);
        }
        out
    }

    fn day_count(readings: &[Reading], day: usize) -> usize {
        let date = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap() + Duration::days(day as i64);
        readings
            .iter()
            .filter(|r| r.timestamp.wall_clock(DEFAULT_TIMEZONE).date() == date)
            .count()
    }

    #[test]
    fn spring_gap_copies_previous_hour_and_autumn_repeat_is_dropped() {
        for zoned in [false, true] {
            let readings = meter_readings(DEFAULT_TIMEZONE, zoned);
            assert_eq!(day_count(&readings, SPRING_DAY), 92);
            assert_eq!(day_count(&readings, AUTUMN_DAY), 100);

            let n = normalize_dst(&readings, DEFAULT_TIMEZONE, 2022).unwrap();
            assert_eq!(n.slots.len(), 35_040);
            assert!(n.slots.iter().all(Option::is_some));
            assert_eq!(
                (n.imputed, n.dropped_repeats, n.dropped_duplicates),
                (4, 4, 0)
            );

            let values: Vec<f64> = n.slots.iter().map(|v| v.unwrap()).collect();
            // 02:00-02:45 on the spring day take the 01:00-01:45 values.
            let gap = SPRING_DAY * 96 + 8;
            for k in 0..4 {
                assert_eq!(values[gap + k], (gap - 4 + k) as f64);
            }
            // Every other slot, including the kept first pass of the repeated
            // hour, holds its own index: nothing else changed.
            for (q, v) in values.iter().enumerate() {
                if !(gap..gap + 4).contains(&q) {
                    assert_eq!(*v, q as f64, "slot {q}");
                }
            }
        }
    }

    #[test]
    fn ordinary_day_is_unchanged() {
        let readings: Vec<Reading> = (0..96)
            .map(|k| Reading {
                timestamp: LocalTimestamp::Naive(slot_start(2022, 10 * 96 + k)),
                power_kw: k as f64 * 0.1,
            })
            .collect();
        let n = normalize_dst(&readings, DEFAULT_TIMEZONE, 2022).unwrap();
        for k in 0..96 {
            assert_eq!(n.slots[10 * 96 + k], Some(k as f64 * 0.1));
        }
        assert_eq!(n.slots.iter().filter(|s| s.is_some()).count(), 96);
    }

    #[test]
    fn readings_from_two_years_are_rejected() {
        let readings = [
            Reading {
                timestamp: LocalTimestamp::Naive(slot_start(2022, 35_039)),
                power_kw: 1.0,
            },
            Reading {
                timestamp: LocalTimestamp::parse("2023-01-01T00:00:00").unwrap(),
                power_kw: 1.0,
            },
        ];
        assert!(matches!(
            normalize_dst(&readings, DEFAULT_TIMEZONE, 2022),
            Err(Error::YearMismatch { found: 2023, .. })
        ));
    }

    #[test]
    fn parses_naive_and_offset_timestamps() {
        assert!(matches!(
            LocalTimestamp::parse("2022-03-27T01:45:00+01:00"),
            Some(LocalTimestamp::Zoned(_))
        ));
        assert!(matches!(
            LocalTimestamp::parse("2022-03-27 01:45"),
            Some(LocalTimestamp::Naive(_))
        ));
        assert!(LocalTimestamp::parse("27/03/2022").is_none());
    }
}
