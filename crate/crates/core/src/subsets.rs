//! Labelled populations and their descriptive statistics.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::profile_store::{write_text_file, Direction, Profile, ProfileSet};
use crate::stats::{Histogram, MeanSd};

pub const EV_HIGH_POWER_THRESHOLD_KW: f64 = 6.5;
pub const DEFAULT_PEAK_BIN_KW: f64 = 0.5;

/// Predicate selecting a population from the labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsetSpec {
    All,
    /// Neither a heat pump nor an EV charging point.
    NoHpNoEv,
    Hp,
    Ev,
    /// EV connections whose maximum charging power exceeds `threshold_kw`.
    EvHighPower {
        threshold_kw: f64,
    },
}

impl SubsetSpec {
    pub const NO_HP_NO_EV: SubsetSpec = SubsetSpec::NoHpNoEv;
    pub const HP: SubsetSpec = SubsetSpec::Hp;
    pub const EV: SubsetSpec = SubsetSpec::Ev;
    pub const EV_HIGH_POWER: SubsetSpec = SubsetSpec::EvHighPower {
        threshold_kw: EV_HIGH_POWER_THRESHOLD_KW,
    };

    /// The four analysed populations, in reporting order.
    pub fn builtins() -> [SubsetSpec; 4] {
        [Self::NO_HP_NO_EV, Self::HP, Self::EV, Self::EV_HIGH_POWER]
    }

    /// Display name as used in tables.
    pub fn name(&self) -> &'static str {
        match self {
            SubsetSpec::All => "all",
            SubsetSpec::NoHpNoEv => "no HP, no EV",
            SubsetSpec::Hp => "HP",
            SubsetSpec::Ev => "EV",
            SubsetSpec::EvHighPower { .. } => "EV, high power",
        }
    }

    pub fn matches(&self, p: &Profile) -> bool {
        let l = p.labels();
        match *self {
            SubsetSpec::All => true,
            SubsetSpec::NoHpNoEv => !l.has_hp && !l.has_ev,
            SubsetSpec::Hp => l.has_hp,
            SubsetSpec::Ev => l.has_ev,
            SubsetSpec::EvHighPower { threshold_kw } => {
                l.has_ev && l.ev_max_charge_kw.is_some_and(|kw| kw > threshold_kw)
            }
        }
    }
}

/// Slug form: `all`, `no-hp-no-ev`, `hp`, `ev`, `ev-high` or `ev-high:<kW>`.
impl fmt::Display for SubsetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SubsetSpec::All => f.write_str("all"),
            SubsetSpec::NoHpNoEv => f.write_str("no-hp-no-ev"),
            SubsetSpec::Hp => f.write_str("hp"),
            SubsetSpec::Ev => f.write_str("ev"),
            SubsetSpec::EvHighPower { threshold_kw }
                if threshold_kw == EV_HIGH_POWER_THRESHOLD_KW =>
            {
                f.write_str("ev-high")
            }
            SubsetSpec::EvHighPower { threshold_kw } => write!(f, "ev-high:{threshold_kw}"),
        }
    }
}

impl FromStr for SubsetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "all" => SubsetSpec::All,
            "no-hp-no-ev" | "no hp, no ev" => SubsetSpec::NoHpNoEv,
            "hp" => SubsetSpec::Hp,
            "ev" => SubsetSpec::Ev,
            "ev-high" | "ev, high power" => SubsetSpec::EV_HIGH_POWER,
            other => match other.strip_prefix("ev-high:") {
                Some(kw) => SubsetSpec::EvHighPower {
                    threshold_kw: kw
                        .parse()
                        .map_err(|e| format!("bad threshold `{kw}`: {e}"))?,
                },
                None => return Err(format!("unknown subset `{s}`")),
            },
        })
    }
}

impl Serialize for SubsetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubsetSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether an EV connection charges above `threshold_kw`. The charging
/// power is taken as the profile's maximum net offtake, the only
/// observable on a net meter; the comparison is strict.
pub fn classify_ev_high_power(p: &Profile, threshold_kw: f64) -> Result<bool> {
    let l = p.labels();
    if !l.has_ev {
        return Err(Error::NotAnEv(p.id().to_string()));
    }
    let max = l
        .ev_max_charge_kw
        .unwrap_or_else(|| p.peak(Direction::Offtake).0);
    Ok(max > threshold_kw)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub set: ProfileSet,
    /// No profile matched.
    pub empty: bool,
}

pub fn apply_subset(set: &ProfileSet, spec: &SubsetSpec) -> Selection {
    let set = set.filter(|p| spec.matches(p));
    Selection {
        empty: set.is_empty(),
        set,
    }
}

/// Population statistics in the layout of the dataset-properties table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub count: usize,
    /// Share of connections with a PV inverter, percent.
    pub pct_pv: f64,
    /// Inverter size over PV owners only, kVA.
    pub pv_kva: Option<MeanSd>,
    pub connection_power_kva: Option<MeanSd>,
    /// Net yearly consumption, kWh.
    pub consumption_kwh: MeanSd,
}

pub fn summarize(set: &ProfileSet) -> Result<SubsetSummary> {
    if set.is_empty() {
        return Err(Error::Empty("profile set"));
    }
    let pv: Vec<f64> = set
        .iter()
        .filter(|p| p.labels().has_pv())
        .filter_map(|p| p.labels().pv_inverter_kva)
        .collect();
    let conn: Vec<f64> = set
        .iter()
        .filter_map(|p| p.labels().connection_power_kva)
        .collect();
    let consumption: Vec<f64> = set.iter().map(Profile::yearly_consumption).collect();
    Ok(SubsetSummary {
        count: set.len(),
        pct_pv: 100.0 * pv.len() as f64 / set.len() as f64,
        pv_kva: MeanSd::of(&pv),
        connection_power_kva: MeanSd::of(&conn),
        consumption_kwh: MeanSd::of(&consumption).expect("non-empty"),
    })
}

/// Histogram of each profile's own yearly extreme.
pub fn peak_histogram(set: &ProfileSet, direction: Direction, bin_width: f64) -> Result<Histogram> {
    if set.is_empty() {
        return Err(Error::Empty("profile set"));
    }
    let peaks: Vec<f64> = set.iter().map(|p| p.peak(direction).0).collect();
    Histogram::build(&peaks, bin_width)
}

pub const SUMMARY_HEADER: &str = "subset,number,pct_pv,pv_kva_mean,pv_kva_sd,\
connection_kva_mean,connection_kva_sd,consumption_kwh_mean,consumption_kwh_sd";

/// One row per population, columns in table order; undefined statistics
/// are left empty.
pub fn write_summary_table(rows: &[(String, SubsetSummary)], path: &Path) -> Result<()> {
    let ms = |m: &Option<MeanSd>| match m {
        Some(m) => format!("{:.3},{:.3}", m.mean, m.sd),
        None => ",".to_string(),
    };
    write_text_file(path, |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for (name, s) in rows {
            writeln!(
                w,
                "\"{}\",{},{:.3},{},{},{:.3},{:.3}",
                name.replace('"', "\"\""),
                s.count,
                s.pct_pv,
                ms(&s.pv_kva),
                ms(&s.connection_power_kva),
                s.consumption_kwh.mean,
                s.consumption_kwh.sd
            )?;
        }
        Ok(())
    })
}
