use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Offset, TimeZone};
use chrono_tz::Tz;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{date_of_day, days_in_year, HOURS_PER_DAY};
use crate::error::{Error, Result};
use crate::rng;
use crate::weather::WeatherSeries;

const DOMAIN_WEATHER: u64 = 0x5745_4154;

/// A run of cold days; the temperature drop deepens towards the last day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColdSpell {
    pub start_day: usize,
    pub days: usize,
    pub depth_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticWeatherConfig {
    pub latitude_deg: f64,
    /// Solar noon in standard (winter) time, hours.
    pub solar_noon_h: f64,
    pub mean_temperature_c: f64,
    /// Half the difference between the warmest and coldest day of a mean year.
    pub seasonal_amplitude_c: f64,
    pub coldest_day: usize,
    pub diurnal_amplitude_c: f64,
    /// Day-to-day anomaly: AR(1) coefficient and stationary sd.
    pub anomaly_ar: f64,
    pub anomaly_sd_c: f64,
    pub cold_spells: Vec<ColdSpell>,
    /// Clearness during cold spells (overcast, little PV).
    pub cold_spell_clearness: f64,
}

impl Default for SyntheticWeatherConfig {
    fn default() -> Self {
        SyntheticWeatherConfig {
            latitude_deg: 51.0,
            solar_noon_h: 12.5,
            mean_temperature_c: 11.0,
            seasonal_amplitude_c: 7.5,
            coldest_day: 15,
            diurnal_amplitude_c: 3.5,
            anomaly_ar: 0.8,
            anomaly_sd_c: 2.5,
            cold_spells: vec![ColdSpell {
                start_day: 343,
                days: 7,
                depth_c: 9.0,
            }],
            cold_spell_clearness: 0.2,
        }
    }
}

impl SyntheticWeatherConfig {
    pub fn validate(&self, year: i32) -> Result<()> {
        let days = days_in_year(year);
        for s in &self.cold_spells {
            if s.days == 0 || s.start_day + s.days > days || s.depth_c < 0.0 {
                return Err(Error::Config(format!("invalid cold spell {s:?}")));
            }
        }
        if !(0.0..1.0).contains(&self.anomaly_ar) || self.anomaly_sd_c < 0.0 {
            return Err(Error::Config(
                "anomaly_ar must lie in [0, 1) and anomaly_sd_c be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cold_spell_clearness) {
            return Err(Error::Config(
                "cold_spell_clearness must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn spell_depth(&self, day: usize) -> Option<f64> {
        self.cold_spells.iter().find_map(|s| {
            (s.start_day..s.start_day + s.days).contains(&day).then(|| {
                let k = (day - s.start_day + 1) as f64 / s.days as f64;
                s.depth_c * (0.6 + 0.4 * k)
            })
        })
    }
}

fn utc_offset_s(tz: Tz, local: NaiveDateTime) -> i32 {
    tz.from_local_datetime(&local)
        .earliest()
        .map_or(0, |t| t.offset().fix().local_minus_utc())
}

/// Clear-sky irradiation on a horizontal plane, kW/m², at solar time `h`.
fn clear_sky(latitude_deg: f64, day: usize, solar_h: f64) -> f64 {
    let lat = latitude_deg.to_radians();
    let decl = 23.44f64.to_radians() * (2.0 * PI * (284.0 + day as f64 + 1.0) / 365.0).sin();
    let omega = (15.0 * (solar_h - 12.0)).to_radians();
    let sin_el = lat.sin() * decl.sin() + lat.cos() * decl.cos() * omega.cos();
    if sin_el <= 0.0 {
        0.0
    } else {
        1.05 * sin_el.powf(1.15)
    }
}

/// An hourly wall-clock weather year: a seasonal sinusoid with persistent
/// anomalies and cold spells for temperature, clear-sky irradiation scaled
/// by a daily clearness for ssrd.
pub fn generate_weather(
    config: &SyntheticWeatherConfig,
    year: i32,
    tz: Tz,
    seed: u64,
) -> Result<WeatherSeries> {
    config.validate(year)?;
    let days = days_in_year(year);
    let mut rng = rng::stream(seed, DOMAIN_WEATHER, 0);
    let clearness = Beta::new(2.2, 1.6).expect("valid shape");
    let mut temperature = Vec::with_capacity(days * HOURS_PER_DAY);
    let mut ssrd = Vec::with_capacity(days * HOURS_PER_DAY);
    let innovation_sd = config.anomaly_sd_c * (1.0 - config.anomaly_ar * config.anomaly_ar).sqrt();
    let mut anomaly = 0.0;
    let standard = [1, 7]
        .into_iter()
        .map(|m| {
            utc_offset_s(
                tz,
                date_of_day(year, 0)
                    .with_month(m)
                    .expect("valid month")
                    .and_hms_opt(12, 0, 0)
                    .expect("valid time"),
            )
        })
        .min()
        .expect("two offsets");
    for day in 0..days {
        let e: f64 = rng.sample(StandardNormal);
        anomaly = config.anomaly_ar * anomaly + innovation_sd * e;
        let spell = config.spell_depth(day);
        let seasonal = config.mean_temperature_c
            - config.seasonal_amplitude_c
                * (2.0 * PI * (day as f64 - config.coldest_day as f64) / days as f64).cos();
        let mean = seasonal + anomaly - spell.unwrap_or(0.0);
        let clear: f64 = match spell {
            Some(_) => config.cold_spell_clearness,
            None => 0.12 + 0.88 * clearness.sample(&mut rng),
        };
        // Clear days swing more between night and afternoon.
        let swing = config.diurnal_amplitude_c * (0.5 + clear);
        let noon = date_of_day(year, day)
            .and_hms_opt(12, 0, 0)
            .expect("valid time");
        let dst_shift = f64::from(utc_offset_s(tz, noon) - standard) / 3600.0;
        for h in 0..HOURS_PER_DAY {
            let mid = h as f64 + 0.5;
            temperature.push(mean - swing * (2.0 * PI * (mid - 15.0) / 24.0).cos());
            let solar = mid - dst_shift - (config.solar_noon_h - 12.0);
            let noise: f64 = rng.sample(StandardNormal);
            let k = (clear * (1.0 + 0.12 * noise)).clamp(0.0, 1.0);
            ssrd.push(clear_sky(config.latitude_deg, day, solar) * k);
        }
    }
    WeatherSeries::new(year, temperature, ssrd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::DEFAULT_TIMEZONE;
    use crate::weather::{daily_max_ssrd, daily_mean_temperature};

    #[test]
    fn reproducible_and_physical() {
        let c = SyntheticWeatherConfig::default();
        let a = generate_weather(&c, 2022, DEFAULT_TIMEZONE, 3).unwrap();
        assert_eq!(a, generate_weather(&c, 2022, DEFAULT_TIMEZONE, 3).unwrap());
        assert!(a.ssrd_kw_m2().iter().all(|&v| (0.0..=1.1).contains(&v)));
        // Night hours are dark.
        assert!((0..365).all(|d| a.ssrd_kw_m2()[d * 24 + 1] == 0.0));
        let summer: f64 = daily_max_ssrd(&a)[150..240].iter().sum::<f64>() / 90.0;
        let winter: f64 = daily_max_ssrd(&a)[0..40].iter().sum::<f64>() / 40.0;
        assert!(summer > 2.0 * winter);
    }

    #[test]
    fn cold_spell_holds_the_coldest_days() {
        let c = SyntheticWeatherConfig {
            anomaly_sd_c: 1.0,
            ..SyntheticWeatherConfig::default()
        };
        let w = generate_weather(&c, 2022, DEFAULT_TIMEZONE, 9).unwrap();
        let t = daily_mean_temperature(&w);
        let mut days: Vec<usize> = (0..365).collect();
        days.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
        let spell = 343..350;
        assert!(
            days[..5].iter().all(|d| spell.contains(d)),
            "{:?}",
            &days[..10]
        );
    }

    #[test]
    fn summer_noon_follows_daylight_saving() {
        let c = SyntheticWeatherConfig {
            cold_spells: vec![],
            ..SyntheticWeatherConfig::default()
        };
        let w = generate_weather(&c, 2022, DEFAULT_TIMEZONE, 1).unwrap();
        let argmax = |day: usize| {
            let hours = &w.ssrd_kw_m2()[day * 24..day * 24 + 24];
            (0..24)
                .max_by(|&a, &b| hours[a].total_cmp(&hours[b]))
                .unwrap()
        };
        let mean_hour = |days: std::ops::Range<usize>| {
            let n = days.len() as f64;
            days.map(argmax).sum::<usize>() as f64 / n
        };
        assert!(mean_hour(160..200) > mean_hour(0..40) + 0.5);
    }
}
