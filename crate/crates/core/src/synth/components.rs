//! Additive load components of a synthetic connection.

use std::f64::consts::PI;

use rand::distributions::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{QUARTERS_PER_DAY, QUARTERS_PER_HOUR, QUARTER_HOUR_H};

/// Mean and sd of a normal distribution truncated below at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub min: f64,
}

impl NormalParams {
    pub const fn new(mean: f64, sd: f64, min: f64) -> Self {
        NormalParams { mean, sd, min }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mean + self.sd * z).max(self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseLoadParams {
    pub daily_energy_kwh: f64,
    /// Coefficient of variation of a connection's mean daily energy.
    pub daily_energy_cv: f64,
    pub night_weight: f64,
    pub morning_weight: f64,
    pub midday_weight: f64,
    pub evening_weight: f64,
    /// Relative extra energy on the coldest day of the year.
    pub seasonal_amplitude: f64,
    /// Log-scale sd of quarter-hour noise.
    pub noise: f64,
    pub spikes_per_day: f64,
    pub spike_kw: f64,
}

impl Default for BaseLoadParams {
    fn default() -> Self {
        BaseLoadParams {
            daily_energy_kwh: 8.5,
            daily_energy_cv: 0.35,
            night_weight: 0.35,
            morning_weight: 0.55,
            midday_weight: 0.35,
            evening_weight: 1.0,
            seasonal_amplitude: 0.2,
            noise: 0.3,
            spikes_per_day: 1.5,
            spike_kw: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvParams {
    /// Inverter rating relative to panel peak power; below 1 the inverter
    /// clips on clear days.
    pub undersizing: f64,
    pub performance_ratio: f64,
    /// Relative sd of quarter-hour variations around the hourly irradiation.
    pub noise_sd: f64,
}

impl Default for PvParams {
    fn default() -> Self {
        PvParams {
            undersizing: 0.8,
            performance_ratio: 0.85,
            noise_sd: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpParams {
    pub operating_kw: NormalParams,
    /// The heat pump runs only below this (lagged) outdoor temperature.
    pub balance_temperature_c: f64,
    /// Full load at and below this temperature.
    pub design_temperature_c: f64,
    /// Time constant of the building's response to outdoor temperature.
    pub thermal_lag_h: f64,
    /// On/off cycling with this period; continuous modulation when false.
    pub modulation: bool,
    pub modulation_period_quarters: usize,
    pub night_setback: bool,
    pub setback_factor: f64,
    pub boost_factor: f64,
}

impl Default for HpParams {
    fn default() -> Self {
        HpParams {
            operating_kw: NormalParams::new(2.5, 0.6, 1.0),
            balance_temperature_c: 15.0,
            design_temperature_c: -8.0,
            thermal_lag_h: 10.0,
            modulation: true,
            modulation_period_quarters: 8,
            night_setback: true,
            setback_factor: 0.6,
            boost_factor: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Most sessions start at the night-tariff hour.
    NightTariff,
    /// Sessions start uniformly in the evening.
    UniformEvening,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvParams {
    /// Charger power options, kW.
    pub charger_kw: Vec<f64>,
    /// Probability of each charger option.
    pub charger_weights: Vec<f64>,
    pub sessions_per_week: f64,
    pub session_energy_kwh: NormalParams,
    pub start_mode: StartMode,
    /// Share of sessions that follow the night tariff in that mode.
    pub night_share: f64,
    pub night_start_hour: f64,
    pub start_jitter_h: f64,
    pub evening_start_hour: f64,
    pub evening_end_hour: f64,
}

impl Default for EvParams {
    fn default() -> Self {
        EvParams {
            charger_kw: vec![2.3, 3.7, 7.4, 11.0, 22.0],
            charger_weights: vec![0.2, 0.41, 0.2, 0.14, 0.05],
            sessions_per_week: 3.0,
            session_energy_kwh: NormalParams::new(14.0, 6.0, 2.0),
            start_mode: StartMode::NightTariff,
            night_share: 0.8,
            night_start_hour: 22.0,
            start_jitter_h: 1.0,
            evening_start_hour: 17.0,
            evening_end_hour: 21.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub power_kw: f64,
    pub round_trip_efficiency: f64,
    /// Timer-driven loads outside battery control.
    pub timed_kw: f64,
    pub timed_hours: Vec<usize>,
    pub timed_quarters: usize,
}

impl Default for BatteryParams {
    fn default() -> Self {
        BatteryParams {
            capacity_kwh: 10.0,
            power_kw: 5.0,
            round_trip_efficiency: 0.9,
            timed_kw: 2.0,
            timed_hours: vec![12, 22],
            timed_quarters: 3,
        }
    }
}

/// Calendar and weather shared by every profile of a population, on the
/// quarter-hour grid.
#[derive(Debug, Clone)]
pub struct SynthContext {
    pub days: usize,
    pub temperature_c: Vec<f64>,
    pub ssrd_kw_m2: Vec<f64>,
    /// 0 = Monday.
    pub weekday: Vec<usize>,
}

impl SynthContext {
    pub fn quarters(&self) -> usize {
        self.days * QUARTERS_PER_DAY
    }
}

/// Randomly drawn characteristics of one connection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileParams {
    pub base_daily_kwh: f64,
    /// Shift of the household's daily rhythm, hours.
    pub rhythm_shift_h: f64,
    pub pv_kva: Option<f64>,
    pub hp_kw: Option<f64>,
    /// Phase of the on/off cycle, quarters.
    pub hp_phase: usize,
    pub ev_charger_kw: Option<f64>,
    pub battery: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Base,
    Pv,
    Hp,
    Ev,
    Battery,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::Base,
        ComponentKind::Pv,
        ComponentKind::Hp,
        ComponentKind::Ev,
        ComponentKind::Battery,
    ];
}

/// All component parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComponentParams {
    pub base: BaseLoadParams,
    pub pv: PvParams,
    pub hp: HpParams,
    pub ev: EvParams,
    pub battery: BatteryParams,
}

/// One additive component of a connection's load, kW per quarter-hour.
/// The battery component holds only its timer-driven loads; the effect of
/// dispatch depends on the other components, see [`battery_dispatch`].
pub fn generate_component<R: Rng + ?Sized>(
    kind: ComponentKind,
    params: &ComponentParams,
    profile: &ProfileParams,
    ctx: &SynthContext,
    rng: &mut R,
) -> Vec<f64> {
    match kind {
        ComponentKind::Base => base_load(&params.base, profile, ctx, rng),
        ComponentKind::Pv => match profile.pv_kva {
            Some(kva) => pv(&params.pv, kva, ctx, rng),
            None => vec![0.0; ctx.quarters()],
        },
        ComponentKind::Hp => match profile.hp_kw {
            Some(kw) => heat_pump(&params.hp, kw, profile.hp_phase, ctx),
            None => vec![0.0; ctx.quarters()],
        },
        ComponentKind::Ev => match profile.ev_charger_kw {
            Some(kw) => ev_charging(&params.ev, kw, ctx, rng).0,
            None => vec![0.0; ctx.quarters()],
        },
        ComponentKind::Battery => {
            if profile.battery {
                timed_loads(&params.battery, ctx)
            } else {
                vec![0.0; ctx.quarters()]
            }
        }
    }
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    let mut d = (h - centre).abs();
    d = d.min(24.0 - d);
    (-0.5 * (d / width).powi(2)).exp()
}

/// Relative activity of a household over the quarter-hours of a day.
pub fn activity_shape(p: &BaseLoadParams, shift_h: f64) -> [f64; QUARTERS_PER_DAY] {
    let mut w = [0.0; QUARTERS_PER_DAY];
    for (k, v) in w.iter_mut().enumerate() {
        let h = (k as f64 + 0.5) / QUARTERS_PER_HOUR as f64 - shift_h;
        *v = p.night_weight
            + p.morning_weight * bump(h, 7.5, 1.0)
            + p.midday_weight * bump(h, 12.5, 1.8)
            + p.evening_weight * bump(h, 19.5, 1.6);
    }
    w
}

fn base_load<R: Rng + ?Sized>(
    p: &BaseLoadParams,
    profile: &ProfileParams,
    ctx: &SynthContext,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; ctx.quarters()];
    let shape = activity_shape(p, profile.rhythm_shift_h);
    let shape_energy: f64 = shape.iter().sum::<f64>() * QUARTER_HOUR_H;
    let spike_times = WeightedIndex::new(shape.iter()).expect("positive weights");
    let noise = LogNormal::new(-0.5 * p.noise * p.noise, p.noise).expect("valid sd");
    let day_noise = LogNormal::new(-0.5 * 0.15f64.powi(2), 0.15).expect("valid sd");
    let spikes =
        (p.spikes_per_day > 0.0).then(|| Poisson::new(p.spikes_per_day).expect("positive rate"));
    for d in 0..ctx.days {
        let season =
            1.0 + p.seasonal_amplitude * (2.0 * PI * (d as f64 - 15.0) / ctx.days as f64).cos();
        let weekend = if ctx.weekday[d] >= 5 { 1.1 } else { 1.0 };
        let energy = profile.base_daily_kwh * season * weekend * day_noise.sample(rng);
        let day = &mut out[d * QUARTERS_PER_DAY..(d + 1) * QUARTERS_PER_DAY];
        for (v, w) in day.iter_mut().zip(&shape) {
            *v = energy * w / shape_energy * noise.sample(rng);
        }
        if let Some(spikes) = &spikes {
            let count = spikes.sample(rng) as usize;
            for _ in 0..count {
                let start = spike_times.sample(rng);
                let len = rng.gen_range(1..=3);
                let kw = p.spike_kw * rng.gen_range(0.5..1.5);
                for v in day.iter_mut().skip(start).take(len) {
                    *v += kw;
                }
            }
        }
    }
    out
}

/// Negative injection, capped at the inverter rating.
fn pv<R: Rng + ?Sized>(p: &PvParams, kva: f64, ctx: &SynthContext, rng: &mut R) -> Vec<f64> {
    let kwp = kva / p.undersizing;
    ctx.ssrd_kw_m2
        .iter()
        .map(|&g| {
            if g <= 0.0 {
                return 0.0;
            }
            let z: f64 = rng.sample(StandardNormal);
            let factor = (1.0 + p.noise_sd * z).max(0.0);
            -(kwp * p.performance_ratio * g * factor).min(kva)
        })
        .collect()
}

fn heat_pump(p: &HpParams, kw: f64, phase: usize, ctx: &SynthContext) -> Vec<f64> {
    let alpha = 1.0 - (-QUARTER_HOUR_H / p.thermal_lag_h.max(QUARTER_HOUR_H)).exp();
    let span = (p.balance_temperature_c - p.design_temperature_c).max(1e-9);
    let mut lagged = ctx.temperature_c.first().copied().unwrap_or(0.0);
    let load: Vec<f64> = ctx
        .temperature_c
        .iter()
        .enumerate()
        .map(|(q, &t)| {
            lagged += alpha * (t - lagged);
            if lagged >= p.balance_temperature_c {
                return 0.0;
            }
            let mut f = (p.balance_temperature_c - lagged) / span;
            if p.night_setback {
                let h = (q % QUARTERS_PER_DAY) / QUARTERS_PER_HOUR;
                if !(5..23).contains(&h) {
                    f *= p.setback_factor;
                } else if (5..8).contains(&h) {
                    f *= p.boost_factor;
                }
            }
            f.clamp(0.0, 1.0)
        })
        .collect();
    if !p.modulation {
        return load.iter().map(|f| f * kw).collect();
    }
    // Run full power for the share of each cycle that matches the load,
    // carrying rounding over to the next cycle.
    let period = p.modulation_period_quarters.max(1);
    let mut out = vec![0.0; load.len()];
    let mut carry = 0.0;
    let mut start = 0;
    let first = phase % period;
    while start < load.len() {
        let end = if start == 0 && first > 0 {
            first
        } else {
            (start + period).min(load.len())
        };
        let demand: f64 = load[start..end].iter().sum::<f64>() + carry;
        let on = (demand.round().max(0.0) as usize).min(end - start);
        carry = demand - on as f64;
        for v in &mut out[start..start + on] {
            *v = kw;
        }
        start = end;
    }
    out
}

/// One charging session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvSession {
    pub start_quarter: usize,
    pub energy_kwh: f64,
    pub power_kw: f64,
}

/// Places `session` on `out`: full power until the energy is delivered,
/// the last quarter carrying the remainder. Returns the first free quarter.
pub fn place_session(out: &mut [f64], session: &EvSession) -> usize {
    let full = session.power_kw * QUARTER_HOUR_H;
    let mut remaining = session.energy_kwh;
    let mut q = session.start_quarter;
    while remaining > 0.0 && q < out.len() {
        let e = remaining.min(full);
        out[q] += e / QUARTER_HOUR_H;
        remaining -= e;
        q += 1;
    }
    q
}

/// Charging sessions of one EV and the resulting load. Sessions never
/// overlap and never run past the end of the year.
pub fn ev_charging<R: Rng + ?Sized>(
    p: &EvParams,
    kw: f64,
    ctx: &SynthContext,
    rng: &mut R,
) -> (Vec<f64>, Vec<EvSession>) {
    let quarters = ctx.quarters();
    let mut out = vec![0.0; quarters];
    let mut sessions = Vec::new();
    let daily = (p.sessions_per_week / 7.0).clamp(0.0, 1.0);
    let mut busy_until = 0;
    for d in 0..ctx.days {
        if !rng.gen_bool(daily) {
            continue;
        }
        let night =
            p.start_mode == StartMode::NightTariff && rng.gen_bool(p.night_share.clamp(0.0, 1.0));
        let hour = if night {
            p.night_start_hour + rng.gen_range(0.0..=p.start_jitter_h.max(0.0))
        } else {
            rng.gen_range(p.evening_start_hour..=p.evening_end_hour.max(p.evening_start_hour))
        };
        let energy = p.session_energy_kwh.sample(rng);
        let start = d * QUARTERS_PER_DAY + (hour * QUARTERS_PER_HOUR as f64).floor() as usize;
        let duration = (energy / (kw * QUARTER_HOUR_H)).ceil() as usize;
        if start < busy_until || start + duration > quarters || energy <= 0.0 {
            continue;
        }
        let session = EvSession {
            start_quarter: start,
            energy_kwh: energy,
            power_kw: kw,
        };
        busy_until = place_session(&mut out, &session);
        sessions.push(session);
    }
    (out, sessions)
}

fn timed_loads(p: &BatteryParams, ctx: &SynthContext) -> Vec<f64> {
    let mut out = vec![0.0; ctx.quarters()];
    for d in 0..ctx.days {
        for &h in &p.timed_hours {
            let start = d * QUARTERS_PER_DAY + h.min(23) * QUARTERS_PER_HOUR;
            for v in out.iter_mut().skip(start).take(p.timed_quarters) {
                *v += p.timed_kw;
            }
        }
    }
    out
}

/// Adds a home battery that stores surplus injection and covers offtake,
/// within its power and energy limits.
pub fn battery_dispatch(net: &mut [f64], p: &BatteryParams) {
    let eff = p.round_trip_efficiency.clamp(0.0, 1.0).sqrt();
    let mut stored = 0.0;
    for v in net.iter_mut() {
        if *v < 0.0 {
            let room = (p.capacity_kwh - stored) / eff / QUARTER_HOUR_H;
            let charge = (-*v).min(p.power_kw).min(room.max(0.0));
            stored += charge * QUARTER_HOUR_H * eff;
            *v += charge;
        } else if *v > 0.0 {
            let available = stored * eff / QUARTER_HOUR_H;
            let discharge = v.min(p.power_kw).min(available);
            stored -= discharge * QUARTER_HOUR_H / eff;
            *v -= discharge;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ctx(temperature: impl Fn(usize) -> f64, ssrd: impl Fn(usize) -> f64) -> SynthContext {
        SynthContext {
            days: 365,
            temperature_c: (0..35_040).map(temperature).collect(),
            ssrd_kw_m2: (0..35_040).map(ssrd).collect(),
            weekday: (0..365).map(|d| (d + 5) % 7).collect(),
        }
    }

    fn profile() -> ProfileParams {
        ProfileParams {
            base_daily_kwh: 8.0,
            rhythm_shift_h: 0.0,
            pv_kva: Some(4.0),
            hp_kw: Some(3.0),
            hp_phase: 0,
            ev_charger_kw: Some(22.0),
            battery: false,
        }
    }

    #[test]
    fn pv_is_capped_at_the_inverter_rating() {
        let sunny = ctx(
            |_| 20.0,
            |q| {
                if (44..56).contains(&(q % 96)) {
                    1.0
                } else {
                    0.0
                }
            },
        );
        let mut r = rng::stream(1, 1, 1);
        let p = pv(&PvParams::default(), 4.0, &sunny, &mut r);
        let floor = p.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(floor, -4.0);
        assert!(p.iter().all(|&v| (-4.0..=0.0).contains(&v)));

        let dark = ctx(|_| 20.0, |_| 0.0);
        assert!(pv(&PvParams::default(), 4.0, &dark, &mut r)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn heat_pump_is_off_above_balance_temperature() {
        // Cold until mid-May, warm afterwards.
        let warm_from = 135 * 96;
        let c = ctx(|q| if q < warm_from { 2.0 } else { 18.0 }, |_| 0.0);
        let hp = heat_pump(&HpParams::default(), 3.0, 0, &c);
        let summer = 151 * 96..243 * 96;
        assert!(hp[summer].iter().all(|&v| v == 0.0));
        assert!(hp[..warm_from].iter().sum::<f64>() > 0.0);
        assert!(hp.iter().all(|&v| v == 0.0 || v == 3.0));
    }

    #[test]
    fn heat_pump_without_modulation_runs_flat_below_design() {
        let c = ctx(|_| -10.0, |_| 0.0);
        let params = HpParams {
            modulation: false,
            night_setback: false,
            ..HpParams::default()
        };
        assert!(heat_pump(&params, 2.5, 0, &c).iter().all(|&v| v == 2.5));
    }

    #[test]
    fn modulated_heat_pump_keeps_the_energy() {
        let c = ctx(
            |q| 5.0 + 4.0 * ((q % 96) as f64 / 96.0 * std::f64::consts::TAU).sin(),
            |_| 0.0,
        );
        let on = heat_pump(
            &HpParams {
                night_setback: false,
                ..HpParams::default()
            },
            2.0,
            3,
            &c,
        );
        let flat = heat_pump(
            &HpParams {
                night_setback: false,
                modulation: false,
                ..HpParams::default()
            },
            2.0,
            3,
            &c,
        );
        let (a, b): (f64, f64) = (on.iter().sum(), flat.iter().sum());
        assert!((a - b).abs() <= 2.0, "{a} vs {b}");
    }

    #[test]
    fn eleven_kwh_at_twenty_two_kw_takes_half_an_hour() {
        let mut out = vec![0.0; 10];
        let next = place_session(
            &mut out,
            &EvSession {
                start_quarter: 2,
                energy_kwh: 11.0,
                power_kw: 22.0,
            },
        );
        assert_eq!(
            out,
            vec![0.0, 0.0, 22.0, 22.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(next, 4);
        let mut out = vec![0.0; 4];
        place_session(
            &mut out,
            &EvSession {
                start_quarter: 0,
                energy_kwh: 1.5,
                power_kw: 4.0,
            },
        );
        assert_eq!(out, vec![4.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn ev_sessions_do_not_overlap_and_keep_their_energy() {
        let c = ctx(|_| 10.0, |_| 0.0);
        let params = EvParams {
            sessions_per_week: 7.0,
            ..EvParams::default()
        };
        let (power, sessions) = ev_charging(&params, 3.7, &c, &mut rng::stream(4, 4, 4));
        assert!(!sessions.is_empty());
        let energy: f64 = power.iter().sum::<f64>() * QUARTER_HOUR_H;
        let expected: f64 = sessions.iter().map(|s| s.energy_kwh).sum();
        assert!((energy - expected).abs() < 1e-9 * expected);
        for w in sessions.windows(2) {
            let end =
                w[0].start_quarter + (w[0].energy_kwh / (w[0].power_kw * 0.25)).ceil() as usize;
            assert!(end <= w[1].start_quarter);
        }
        assert!(power.iter().all(|&v| (0.0..=3.7).contains(&v)));
    }

    #[test]
    fn zero_parameters_give_zero_components() {
        let c = ctx(|_| -5.0, |_| 0.8);
        let params = ComponentParams {
            base: BaseLoadParams {
                daily_energy_kwh: 0.0,
                spikes_per_day: 0.0,
                ..BaseLoadParams::default()
            },
            ..ComponentParams::default()
        };
        let none = ProfileParams {
            base_daily_kwh: 0.0,
            pv_kva: None,
            hp_kw: None,
            ev_charger_kw: None,
            ..profile()
        };
        for kind in ComponentKind::ALL {
            let v = generate_component(kind, &params, &none, &c, &mut rng::stream(0, 0, 0));
            assert!(v.iter().all(|&x| x == 0.0), "{kind:?}");
        }
    }

    #[test]
    fn battery_removes_night_offtake_after_sunny_days() {
        let mut net: Vec<f64> = (0..96 * 3)
            .map(|q| {
                if (40..64).contains(&(q % 96)) {
                    -3.0
                } else {
                    0.3
                }
            })
            .collect();
        battery_dispatch(&mut net, &BatteryParams::default());
        // From the first evening on, offtake is covered by stored surplus.
        assert!(net[64..96 + 40].iter().all(|&v| v.abs() < 1e-12));
        assert!(net.iter().any(|&v| v < 0.0));
    }
}
