//! Deterministic synthetic populations.
//!
//! A connection's net load is the sum of a household base load, heat pump,
//! EV charging and PV injection, optionally passed through a home battery.
//! Heat pumps follow the lagged outdoor temperature and PV follows
//! irradiation, so feeder peaks respond to the weather the way measured
//! ones do. The generator is a test oracle with controllable ground truth,
//! not a fitted model of any real population.

mod components;
mod weather;

use std::path::Path;

use chrono::Datelike;
use rand::distributions::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{date_of_day, DEFAULT_TIMEZONE};
use crate::error::{Error, Result};
use crate::profile_store::{Profile, ProfileLabels, ProfileSet};
use crate::rng;
use crate::weather::{expand_to_quarter_hours, WeatherSeries};

pub use components::{
    activity_shape, battery_dispatch, ev_charging, generate_component, place_session,
    BaseLoadParams, BatteryParams, ComponentKind, ComponentParams, EvParams, EvSession, HpParams,
    NormalParams, ProfileParams, PvParams, StartMode, SynthContext,
};
pub use weather::{generate_weather, ColdSpell, SyntheticWeatherConfig};

const DOMAIN_PARAMS: u64 = 0x5041_5241;
const DOMAIN_COMPONENT: u64 = 0x434F_4D50;

/// Connections sharing one label combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub count: usize,
    #[serde(default)]
    pub has_hp: bool,
    #[serde(default)]
    pub has_ev: bool,
    pub pv_share: f64,
    pub pv_kva: NormalParams,
    pub connection_kva: NormalParams,
    #[serde(default)]
    pub battery_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub year: i32,
    pub groups: Vec<GroupConfig>,
    pub components: ComponentParams,
    pub weather: SyntheticWeatherConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let group =
            |name: &str, count, has_hp, has_ev, pv_share, pv: (f64, f64), conn: (f64, f64)| {
                GroupConfig {
                    name: name.to_string(),
                    count,
                    has_hp,
                    has_ev,
                    pv_share,
                    pv_kva: NormalParams::new(pv.0, pv.1, 1.0),
                    connection_kva: NormalParams::new(conn.0, conn.1, 6.0),
                    battery_share: if !has_hp && !has_ev { 0.05 } else { 0.0 },
                }
            };
        GeneratorConfig {
            seed: 1,
            year: 2022,
            groups: vec![
                group("none", 900, false, false, 0.75, (4.3, 1.7), (14.6, 6.3)),
                group("hp", 350, true, false, 0.94, (5.6, 2.1), (19.9, 5.5)),
                group("ev", 650, false, true, 0.86, (5.4, 2.1), (18.6, 6.8)),
                group("hp-ev", 100, true, true, 0.9, (5.6, 2.2), (20.6, 6.4)),
            ],
            components: ComponentParams::default(),
            weather: SyntheticWeatherConfig::default(),
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v >= 0.0, || {
        format!("{name} must be non-negative, got {v}")
    })
}

fn probability(name: &str, v: f64) -> Result<()> {
    check((0.0..=1.0).contains(&v), || {
        format!("{name} must lie in [0, 1], got {v}")
    })
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<GeneratorConfig> {
        let config: GeneratorConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<GeneratorConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn population(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        check(names.windows(2).all(|w| w[0] != w[1]), || {
            "group names must be distinct".into()
        })?;
        for g in &self.groups {
            probability("pv_share", g.pv_share)?;
            probability("battery_share", g.battery_share)?;
            for (name, n) in [("pv_kva", g.pv_kva), ("connection_kva", g.connection_kva)] {
                non_negative(name, n.mean)?;
                non_negative(name, n.sd)?;
                non_negative(name, n.min)?;
            }
            check(g.connection_kva.min > 0.0, || {
                "connection_kva.min must be positive".into()
            })?;
        }
        let c = &self.components;
        for (name, v) in [
            ("base.daily_energy_kwh", c.base.daily_energy_kwh),
            ("base.daily_energy_cv", c.base.daily_energy_cv),
            ("base.night_weight", c.base.night_weight),
            ("base.morning_weight", c.base.morning_weight),
            ("base.midday_weight", c.base.midday_weight),
            ("base.evening_weight", c.base.evening_weight),
            ("base.noise", c.base.noise),
            ("base.spikes_per_day", c.base.spikes_per_day),
            ("base.spike_kw", c.base.spike_kw),
            ("pv.performance_ratio", c.pv.performance_ratio),
            ("pv.noise_sd", c.pv.noise_sd),
            ("hp.operating_kw.mean", c.hp.operating_kw.mean),
            ("hp.operating_kw.min", c.hp.operating_kw.min),
            ("hp.thermal_lag_h", c.hp.thermal_lag_h),
            ("ev.sessions_per_week", c.ev.sessions_per_week),
            ("ev.session_energy_kwh.min", c.ev.session_energy_kwh.min),
            ("battery.capacity_kwh", c.battery.capacity_kwh),
            ("battery.power_kw", c.battery.power_kw),
            ("battery.timed_kw", c.battery.timed_kw),
        ] {
            non_negative(name, v)?;
        }
        check(c.base.seasonal_amplitude.abs() < 1.0, || {
            "base.seasonal_amplitude must lie in (-1, 1)".into()
        })?;
        check(
            [
                c.base.night_weight,
                c.base.morning_weight,
                c.base.midday_weight,
                c.base.evening_weight,
            ]
            .iter()
            .sum::<f64>()
                > 0.0,
            || "base activity weights must not all be zero".into(),
        )?;
        check(c.pv.undersizing > 0.0, || {
            "pv.undersizing must be positive".into()
        })?;
        check(
            c.hp.balance_temperature_c > c.hp.design_temperature_c,
            || "hp.balance_temperature_c must exceed hp.design_temperature_c".into(),
        )?;
        probability("ev.night_share", c.ev.night_share)?;
        probability(
            "battery.round_trip_efficiency",
            c.battery.round_trip_efficiency,
        )?;
        check(
            !c.ev.charger_kw.is_empty() && c.ev.charger_kw.len() == c.ev.charger_weights.len(),
            || "ev.charger_kw and ev.charger_weights must be non-empty and of equal length".into(),
        )?;
        for &kw in &c.ev.charger_kw {
            check(kw > 0.0, || {
                format!("charger power must be positive, got {kw}")
            })?;
        }
        for &w in &c.ev.charger_weights {
            non_negative("ev.charger_weights", w)?;
        }
        let total: f64 = c.ev.charger_weights.iter().sum();
        check((total - 1.0).abs() < 1e-9, || {
            format!("ev.charger_weights must sum to 1, got {total}")
        })?;
        self.weather.validate(self.year)
    }
}

/// Weather, calendar and derived quarter-hour series for a population.
pub fn context(weather: &WeatherSeries) -> SynthContext {
    let year = weather.year();
    SynthContext {
        days: weather.days(),
        temperature_c: expand_to_quarter_hours(weather.temperature_c()),
        ssrd_kw_m2: expand_to_quarter_hours(weather.ssrd_kw_m2()),
        weekday: (0..weather.days())
            .map(|d| date_of_day(year, d).weekday().num_days_from_monday() as usize)
            .collect(),
    }
}

fn draw_params<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    group: &GroupConfig,
    rng: &mut R,
) -> (ProfileParams, ProfileLabels) {
    let c = &config.components;
    let cv = c.base.daily_energy_cv;
    let base_daily_kwh = if cv > 0.0 {
        let sigma = (1.0 + cv * cv).ln().sqrt();
        let ln = rand_distr::LogNormal::new(-0.5 * sigma * sigma, sigma).expect("valid sd");
        c.base.daily_energy_kwh * ln.sample(rng)
    } else {
        c.base.daily_energy_kwh
    };
    let pv_kva = rng
        .gen_bool(group.pv_share)
        .then(|| group.pv_kva.sample(rng));
    let hp_kw = group.has_hp.then(|| c.hp.operating_kw.sample(rng));
    let ev_charger_kw = group.has_ev.then(|| {
        let pick = WeightedIndex::new(&c.ev.charger_weights).expect("validated weights");
        c.ev.charger_kw[pick.sample(rng)]
    });
    let params = ProfileParams {
        base_daily_kwh,
        rhythm_shift_h: rng.gen_range(-1.0..1.0),
        pv_kva,
        hp_kw,
        hp_phase: rng.gen_range(0..c.hp.modulation_period_quarters.max(1)),
        ev_charger_kw,
        battery: rng.gen_bool(group.battery_share),
    };
    let labels = ProfileLabels {
        has_hp: group.has_hp,
        has_ev: group.has_ev,
        pv_inverter_kva: pv_kva,
        connection_power_kva: Some(group.connection_kva.sample(rng)),
        ev_max_charge_kw: None,
    };
    (params, labels)
}

/// Net load of connection `index` (its position in the population).
pub fn generate_profile(
    config: &GeneratorConfig,
    group: &GroupConfig,
    index: usize,
    ctx: &SynthContext,
) -> Result<Profile> {
    let (params, labels) = draw_params(
        config,
        group,
        &mut rng::stream(config.seed, DOMAIN_PARAMS, index as u64),
    );
    let mut net = vec![0.0; ctx.quarters()];
    let mut timed = None;
    for (k, kind) in ComponentKind::ALL.into_iter().enumerate() {
        let mut rng = rng::stream(config.seed, DOMAIN_COMPONENT + k as u64, index as u64);
        let part = generate_component(kind, &config.components, &params, ctx, &mut rng);
        if kind == ComponentKind::Battery {
            timed = Some(part);
        } else {
            for (n, v) in net.iter_mut().zip(&part) {
                *n += v;
            }
        }
    }
    if params.battery {
        battery_dispatch(&mut net, &config.components.battery);
        for (n, v) in net.iter_mut().zip(timed.iter().flatten()) {
            *n += v;
        }
    }
    Profile::new(format!("{}-{index:05}", group.name), net, labels)
}

/// Every group's connections in order, generated in parallel.
pub fn generate_population(
    config: &GeneratorConfig,
    weather: &WeatherSeries,
) -> Result<ProfileSet> {
    config.validate()?;
    if weather.year() != config.year {
        return Err(Error::YearMismatch {
            expected: config.year,
            found: weather.year(),
        });
    }
    let ctx = context(weather);
    let jobs: Vec<(&GroupConfig, usize)> = config
        .groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(g, g.count))
        .enumerate()
        .map(|(i, g)| (g, i))
        .collect();
    let profiles = jobs
        .par_iter()
        .map(|&(g, i)| generate_profile(config, g, i, &ctx))
        .collect::<Result<Vec<_>>>()?;
    ProfileSet::new(config.year, DEFAULT_TIMEZONE, profiles)
}

/// Synthetic weather for the config's year and seed.
pub fn config_weather(config: &GeneratorConfig) -> Result<WeatherSeries> {
    generate_weather(&config.weather, config.year, DEFAULT_TIMEZONE, config.seed)
}
