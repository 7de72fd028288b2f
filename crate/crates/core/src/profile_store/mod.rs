//! Year-long quarter-hour profiles: the population every feeder is drawn from.
//!
//! Power is mean kW over each quarter-hour on a single signed channel,
//! offtake positive and injection negative.

mod dst;
mod export;
mod ingest;
mod panels;
mod store;

use std::collections::HashSet;
use std::sync::Arc;

use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::calendar::{quarters_in_year, QUARTER_HOUR_H};
use crate::error::{Error, Result};

pub use dst::{normalize_dst, LocalTimestamp, Reading};
pub use export::{write_labels_csv, write_profiles_csv};
pub use ingest::{
    fill_gaps, ingest_profiles, read_labels, Diagnostic, DiagnosticKind, IngestConfig,
    IngestOutcome,
};
pub(crate) use panels::write_file as write_text_file;
pub use panels::{profile_panels, write_panels, PanelData, QuarterEnvelope, DEFAULT_PANEL_BIN_KW};
pub use store::{load_store, save_store, StoreMeta};

/// Which extreme of a load series is of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Power drawn from the grid; the extreme is the maximum.
    Offtake,
    /// Power fed into the grid; the extreme is the (signed) minimum.
    Injection,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Offtake, Direction::Injection];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Offtake => "offtake",
            Direction::Injection => "injection",
        }
    }

    /// True if `a` is strictly more extreme than `b` in this direction.
    #[inline]
    pub fn exceeds(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Offtake => a > b,
            Direction::Injection => a < b,
        }
    }

    /// Worst possible starting value for a running extreme.
    pub fn neutral(self) -> f64 {
        match self {
            Direction::Offtake => f64::NEG_INFINITY,
            Direction::Injection => f64::INFINITY,
        }
    }

    /// Part of a per-profile extreme that counts towards the simultaneity
    /// denominator: profiles that never reach this direction contribute 0.
    #[inline]
    pub fn clip(self, v: f64) -> f64 {
        match self {
            Direction::Offtake => v.max(0.0),
            Direction::Injection => v.min(0.0),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "offtake" => Ok(Direction::Offtake),
            "injection" => Ok(Direction::Injection),
            _ => Err(format!("unknown direction `{s}`")),
        }
    }
}

/// Extreme value of a series and the first index attaining it.
pub fn extreme(values: &[f64], direction: Direction) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((b, _)) if !direction.exceeds(v, b) => {}
            _ => best = Some((v, i)),
        }
    }
    best
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileLabels {
    pub has_hp: bool,
    pub has_ev: bool,
    pub pv_inverter_kva: Option<f64>,
    pub connection_power_kva: Option<f64>,
    /// Derived from the profile itself for EV connections.
    pub ev_max_charge_kw: Option<f64>,
}

impl ProfileLabels {
    pub fn has_pv(&self) -> bool {
        self.pv_inverter_kva.is_some_and(|k| k > 0.0)
    }

    fn validate(&self, id: &str) -> Result<()> {
        let fields = [
            ("pv_inverter_kva", self.pv_inverter_kva),
            ("connection_power_kva", self.connection_power_kva),
            ("ev_max_charge_kw", self.ev_max_charge_kw),
        ];
        for (name, value) in fields {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidProfile {
                        id: id.to_string(),
                        reason: format!("{name} must be non-negative, got {v}"),
                    });
                }
            }
        }
        if self.connection_power_kva == Some(0.0) {
            return Err(Error::InvalidProfile {
                id: id.to_string(),
                reason: "connection_power_kva must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One connection's year of quarter-hour mean power (kW).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    id: String,
    power: Arc<[f64]>,
    labels: ProfileLabels,
}

impl Profile {
    pub fn new(
        id: impl Into<String>,
        power: Vec<f64>,
        mut labels: ProfileLabels,
    ) -> Result<Profile> {
        let id = id.into();
        if let Some(i) = power.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile {
                id,
                reason: format!("non-finite power at quarter {i}"),
            });
        }
        if labels.has_ev && labels.ev_max_charge_kw.is_none() {
            let max = extreme(&power, Direction::Offtake).map_or(0.0, |(v, _)| v);
            labels.ev_max_charge_kw = Some(max.max(0.0));
        }
        labels.validate(&id)?;
        Ok(Profile {
            id,
            power: power.into(),
            labels,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn labels(&self) -> &ProfileLabels {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Net energy over the profile, kWh (negative for net injection).
    pub fn yearly_consumption(&self) -> f64 {
        self.power.iter().sum::<f64>() * QUARTER_HOUR_H
    }

    /// `(value, first index)` of the extreme in `direction`.
    pub fn peak(&self, direction: Direction) -> (f64, usize) {
        extreme(&self.power, direction).unwrap_or((0.0, 0))
    }
}

pub fn yearly_consumption(p: &Profile) -> f64 {
    p.yearly_consumption()
}

pub fn profile_peak(p: &Profile, direction: Direction) -> (f64, usize) {
    p.peak(direction)
}

/// Immutable population of profiles sharing one year and time zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: Vec<Profile>,
    year: i32,
    timezone: Tz,
}

impl ProfileSet {
    pub fn new(year: i32, timezone: Tz, profiles: Vec<Profile>) -> Result<ProfileSet> {
        let expected = quarters_in_year(year);
        let mut seen = HashSet::with_capacity(profiles.len());
        for p in &profiles {
            if p.len() != expected {
                return Err(Error::InvalidProfile {
                    id: p.id.clone(),
                    reason: format!("{} quarter-hours, expected {expected}", p.len()),
                });
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(ProfileSet {
            profiles,
            year,
            timezone,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn quarters(&self) -> usize {
        quarters_in_year(self.year)
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Profile> {
        self.profiles.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Profile> {
        self.profiles.get(index)
    }

    pub fn find(&self, id: &str) -> Option<&Profile> {
        self.profiles.iter().find(|p| p.id == id)
    }

    /// New set holding the profiles that satisfy `keep`; profile data is shared.
    pub fn filter(&self, mut keep: impl FnMut(&Profile) -> bool) -> ProfileSet {
        ProfileSet {
            profiles: self.profiles.iter().filter(|p| keep(p)).cloned().collect(),
            year: self.year,
            timezone: self.timezone,
        }
    }

    /// Union of two sets ingested separately.
    pub fn merge(&self, other: &ProfileSet) -> Result<ProfileSet> {
        if self.year != other.year {
            return Err(Error::YearMismatch {
                expected: self.year,
                found: other.year,
            });
        }
        let mut profiles = self.profiles.clone();
        profiles.extend(other.profiles.iter().cloned());
        ProfileSet::new(self.year, self.timezone, profiles)
    }
}

impl<'a> IntoIterator for &'a ProfileSet {
    type Item = &'a Profile;
    type IntoIter = std::slice::Iter<'a, Profile>;

    fn into_iter(self) -> Self::IntoIter {
        self.profiles.iter()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::calendar::DEFAULT_TIMEZONE;

    fn constant(id: &str, kw: f64) -> Profile {
        Profile::new(id, vec![kw; 35_040], ProfileLabels::default()).unwrap()
    }

    #[test]
    fn consumption_of_constant_load() {
        assert_eq!(constant("a", 1.0).yearly_consumption(), 8_760.0);
        assert_eq!(constant("b", -1.0).yearly_consumption(), -8_760.0);
        assert_eq!(constant("z", 0.0).yearly_consumption(), 0.0);
    }

    #[test]
    fn peak_tie_breaks_on_first_index() {
        let p = Profile::new("p", vec![1.0, 3.0, 2.0, 3.0], ProfileLabels::default()).unwrap();
        assert_eq!(p.peak(Direction::Offtake), (3.0, 1));
        let q = Profile::new("q", vec![-2.0, 0.0, -5.0], ProfileLabels::default()).unwrap();
        assert_eq!(q.peak(Direction::Injection), (-5.0, 2));
    }

    #[test]
    fn rejects_non_finite_and_negative_labels() {
        assert!(Profile::new("x", vec![f64::NAN], ProfileLabels::default()).is_err());
        let labels = ProfileLabels {
            pv_inverter_kva: Some(-1.0),
            ..Default::default()
        };
        assert!(Profile::new("x", vec![0.0], labels).is_err());
    }

    #[test]
    fn ev_max_charge_is_derived_from_power() {
        let labels = ProfileLabels {
            has_ev: true,
            ..Default::default()
        };
        let p = Profile::new("ev", vec![0.5, 22.0, 3.0], labels).unwrap();
        assert_eq!(p.labels().ev_max_charge_kw, Some(22.0));
    }

    #[test]
    fn set_enforces_length_and_unique_ids() {
        let short = Profile::new("s", vec![0.0; 100], ProfileLabels::default()).unwrap();
        assert!(ProfileSet::new(2022, DEFAULT_TIMEZONE, vec![short]).is_err());
        let dup = ProfileSet::new(
            2022,
            DEFAULT_TIMEZONE,
            vec![constant("a", 1.0), constant("a", 2.0)],
        );
        assert!(matches!(dup, Err(Error::DuplicateId(id)) if id == "a"));
        let a = ProfileSet::new(2022, DEFAULT_TIMEZONE, vec![constant("a", 1.0)]).unwrap();
        let b = ProfileSet::new(2022, DEFAULT_TIMEZONE, vec![constant("b", 1.0)]).unwrap();
        assert_eq!(a.merge(&b).unwrap().len(), 2);
        assert!(a.merge(&a).is_err());
    }

    proptest! {
        #[test]
        fn consumption_is_quarter_of_sum(power in proptest::collection::vec(-30.0f64..30.0, 1..500)) {
            let p = Profile::new("p", power.clone(), ProfileLabels::default()).unwrap();
            let direct = 0.25 * power.iter().sum::<f64>();
            let c = p.yearly_consumption();
            prop_assert!((c - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        }

        #[test]
        fn peaks_bound_every_element(power in proptest::collection::vec(-30.0f64..30.0, 1..500)) {
            let p = Profile::new("p", power.clone(), ProfileLabels::default()).unwrap();
            let (hi, i) = p.peak(Direction::Offtake);
            let (lo, j) = p.peak(Direction::Injection);
            prop_assert!(power.iter().all(|&v| v <= hi && v >= lo));
            prop_assert_eq!(power[i], hi);
            prop_assert_eq!(power[j], lo);
        }
    }
}
