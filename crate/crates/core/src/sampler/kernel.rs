//! Feeder aggregation.
//!
//! [`feeder_metrics`] is the direct form: sum the drawn profiles and scan
//! the whole year. [`FeederKernel`] produces bit-identical results while
//! reading far less data. For every profile it keeps the maximum and
//! minimum of each hour and of each day, rounded outwards to `f32`; summed
//! over the drawn profiles in draw order these bound every summed
//! quarter-hour of that hour or day, because rounded addition is monotone.
//! Day bounds decide which days need hour bounds at all; only hours whose
//! bound can still reach the best value found are summed exactly.

use crate::calendar::{QUARTERS_PER_DAY, QUARTERS_PER_HOUR};
use crate::error::{Error, Result};
use crate::profile_store::{extreme, Direction, Profile, ProfileSet};

/// Extreme of a summed feeder and its simultaneity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeederExtreme {
    pub peak_kw: f64,
    pub peak_quarter_index: usize,
    pub simultaneity: Option<f64>,
}

/// Metrics of one drawn feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederMetrics {
    /// Signed: the maximum of the sum for offtake, the minimum for injection.
    pub peak_kw: f64,
    pub peak_quarter_index: usize,
    /// `|feeder extreme| / Σ |individual extremes|`, with only extremes on
    /// the requested side of zero counted; absent when that sum is zero.
    pub simultaneity: Option<f64>,
    pub peak_per_connection_kw: f64,
    pub drawn_ids: Vec<String>,
}

fn simultaneity(direction: Direction, peak: f64, individual_sum: f64) -> Option<f64> {
    if individual_sum == 0.0 {
        None
    } else {
        Some(direction.clip(peak) / individual_sum)
    }
}

/// Sums `profiles` element-wise and reports the extreme in `direction`
/// (first occurrence on ties).
pub fn feeder_metrics(profiles: &[&Profile], direction: Direction) -> Result<FeederMetrics> {
    let first = profiles.first().ok_or(Error::Empty("feeder"))?;
    let len = first.len();
    if let Some(p) = profiles.iter().find(|p| p.len() != len) {
        return Err(Error::InvalidProfile {
            id: p.id().to_string(),
            reason: format!("length {} differs from {len}", p.len()),
        });
    }
    let mut sum = vec![0.0; len];
    let mut individual = 0.0;
    for p in profiles {
        for (s, v) in sum.iter_mut().zip(p.power()) {
            *s += v;
        }
        individual += direction.clip(p.peak(direction).0);
    }
    let (peak_kw, peak_quarter_index) = extreme(&sum, direction).ok_or(Error::Empty("profile"))?;
    Ok(FeederMetrics {
        peak_kw,
        peak_quarter_index,
        simultaneity: simultaneity(direction, peak_kw, individual),
        peak_per_connection_kw: peak_kw / profiles.len() as f64,
        drawn_ids: profiles.iter().map(|p| p.id().to_string()).collect(),
    })
}

/// Per-hour and per-day extremes of every profile in a set.
#[derive(Debug, Clone)]
pub struct FeederKernel<'a> {
    set: &'a ProfileSet,
    days: usize,
    /// Profile-major, `days * 24` entries per profile, rounded outwards.
    hour_max: Vec<f32>,
    hour_min: Vec<f32>,
    /// Profile-major, extremes of the hourly bounds of each day.
    day_max: Vec<f32>,
    day_min: Vec<f32>,
    /// Hour-major copy of the readings, `[hour][profile][quarter]`, so that
    /// one hour of a drawn feeder lies in one block.
    by_hour: Vec<f64>,
    /// Individual extremes clipped to their side of zero.
    peak_offtake: Vec<f64>,
    peak_injection: Vec<f64>,
}

/// Per-worker buffers.
#[derive(Debug, Clone)]
pub struct Scratch {
    day_bounds: Vec<f64>,
    hour_bounds: Vec<f64>,
    days: Vec<u16>,
    hours: Vec<u16>,
}

impl Scratch {
    pub fn new(days: usize) -> Scratch {
        Scratch {
            day_bounds: vec![0.0; days],
            hour_bounds: vec![0.0; days * HOURS_PER_DAY],
            days: Vec::new(),
            hours: Vec::new(),
        }
    }
}

/// Smallest `f32` not below `v`.
fn f32_at_least(v: f64) -> f32 {
    let x = v as f32;
    if f64::from(x) >= v {
        x
    } else {
        x.next_up()
    }
}

/// Largest `f32` not above `v`.
fn f32_at_most(v: f64) -> f32 {
    let x = v as f32;
    if f64::from(x) <= v {
        x
    } else {
        x.next_down()
    }
}

const HOURS_PER_DAY: usize = QUARTERS_PER_DAY / QUARTERS_PER_HOUR;

/// Feeder size from which candidate hours are visited best-first.
const SORT_FROM: usize = 8;

/// Indices of `bounds` ordered most promising first.
fn sort_by_bound<T: Copy + Into<usize>>(order: &mut [T], bounds: &[f64], direction: Direction) {
    match direction {
        Direction::Offtake => {
            order.sort_unstable_by(|&a, &b| bounds[b.into()].total_cmp(&bounds[a.into()]))
        }
        Direction::Injection => {
            order.sort_unstable_by(|&a, &b| bounds[a.into()].total_cmp(&bounds[b.into()]))
        }
    }
}

/// Index of the most promising bound.
fn top(bounds: &[f64], direction: Direction) -> usize {
    (0..bounds.len())
        .reduce(|a, b| {
            if direction.exceeds(bounds[b], bounds[a]) {
                b
            } else {
                a
            }
        })
        .expect("non-empty bounds")
}

/// Running extreme, earliest quarter on ties.
struct Best {
    direction: Direction,
    value: f64,
    quarter: usize,
}

impl Best {
    /// False once `bound` can no longer reach the running extreme. Ties
    /// with the bound may still hold an earlier first occurrence.
    fn reachable(&self, bound: f64) -> bool {
        !self.direction.exceeds(self.value, bound)
    }
}

impl<'a> FeederKernel<'a> {
    pub fn new(set: &'a ProfileSet) -> FeederKernel<'a> {
        let hours = set.quarters() / QUARTERS_PER_HOUR;
        let mut hour_max = Vec::with_capacity(set.len() * hours);
        let mut hour_min = Vec::with_capacity(set.len() * hours);
        for p in set.iter() {
            for hour in p.power().chunks_exact(QUARTERS_PER_HOUR) {
                let (lo, hi) = hour
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                hour_max.push(f32_at_least(hi));
                hour_min.push(f32_at_most(lo));
            }
        }
        let fold_days = |hourly: &[f32], pick: fn(f32, f32) -> f32| -> Vec<f32> {
            hourly
                .chunks_exact(HOURS_PER_DAY)
                .map(|day| day.iter().copied().reduce(pick).expect("24 hours"))
                .collect()
        };
        let mut by_hour = vec![0.0; set.len() * set.quarters()];
        for (i, p) in set.iter().enumerate() {
            for (h, hour) in p.power().chunks_exact(QUARTERS_PER_HOUR).enumerate() {
                let at = (h * set.len() + i) * QUARTERS_PER_HOUR;
                by_hour[at..at + QUARTERS_PER_HOUR].copy_from_slice(hour);
            }
        }
        FeederKernel {
            set,
            days: hours / HOURS_PER_DAY,
            by_hour,
            day_max: fold_days(&hour_max, f32::max),
            day_min: fold_days(&hour_min, f32::min),
            hour_max,
            hour_min,
            peak_offtake: set
                .iter()
                .map(|p| Direction::Offtake.clip(p.peak(Direction::Offtake).0))
                .collect(),
            peak_injection: set
                .iter()
                .map(|p| Direction::Injection.clip(p.peak(Direction::Injection).0))
                .collect(),
        }
    }

    pub fn set(&self) -> &'a ProfileSet {
        self.set
    }

    pub fn scratch(&self) -> Scratch {
        Scratch::new(self.days)
    }

    /// Sums the quarter-hours of `hour` exactly and updates `best`.
    fn visit_hour(&self, drawn: &[usize], hour: usize, best: &mut Best) {
        let start = hour * QUARTERS_PER_HOUR;
        let block =
            &self.by_hour[start * self.set.len()..(start + QUARTERS_PER_HOUR) * self.set.len()];
        let mut acc = [0.0; QUARTERS_PER_HOUR];
        for &i in drawn {
            let slice = &block[i * QUARTERS_PER_HOUR..(i + 1) * QUARTERS_PER_HOUR];
            for (a, v) in acc.iter_mut().zip(slice) {
                *a += v;
            }
        }
        for (k, v) in acc.into_iter().enumerate() {
            let q = start + k;
            if best.direction.exceeds(v, best.value) || (v == best.value && q < best.quarter) {
                best.value = v;
                best.quarter = q;
            }
        }
    }

    /// Visits the most promising hour of `day`, seeding `best`.
    fn seed(&self, drawn: &[usize], day: usize, best: &mut Best) {
        let hours = self.days * HOURS_PER_DAY;
        let hourly = self.hourly(best.direction);
        let first = day * HOURS_PER_DAY;
        let mut bounds = [0.0; HOURS_PER_DAY];
        for &i in drawn {
            let row = &hourly[i * hours + first..i * hours + first + HOURS_PER_DAY];
            for (b, &v) in bounds.iter_mut().zip(row) {
                *b += f64::from(v);
            }
        }
        self.visit_hour(drawn, first + top(&bounds, best.direction), best);
    }

    fn hourly(&self, direction: Direction) -> &[f32] {
        match direction {
            Direction::Offtake => &self.hour_max,
            Direction::Injection => &self.hour_min,
        }
    }

    /// Extreme of the feeder made of `drawn` (indices into the set), summed
    /// in the given order. Equal to [`feeder_metrics`] bit for bit.
    pub fn evaluate(
        &self,
        drawn: &[usize],
        direction: Direction,
        s: &mut Scratch,
    ) -> FeederExtreme {
        assert!(!drawn.is_empty(), "empty feeder");
        let days = self.days;
        let hours = days * HOURS_PER_DAY;
        let daily = match direction {
            Direction::Offtake => &self.day_max,
            Direction::Injection => &self.day_min,
        };
        s.day_bounds.clear();
        s.day_bounds.resize(days, 0.0);
        for &i in drawn {
            for (b, &v) in s
                .day_bounds
                .iter_mut()
                .zip(&daily[i * days..(i + 1) * days])
            {
                *b += f64::from(v);
            }
        }

        // Seed with the best hour of the most promising day, then bound
        // every hour of the days that can still reach it.
        let mut best = Best {
            direction,
            value: direction.neutral(),
            quarter: usize::MAX,
        };
        self.seed(drawn, top(&s.day_bounds, direction), &mut best);
        s.days.clear();
        s.days
            .extend((0..days as u16).filter(|&d| best.reachable(s.day_bounds[usize::from(d)])));
        for &d in &s.days {
            let d = usize::from(d) * HOURS_PER_DAY;
            s.hour_bounds[d..d + HOURS_PER_DAY].fill(0.0);
        }
        let hourly = self.hourly(direction);
        for &i in drawn {
            let row = &hourly[i * hours..(i + 1) * hours];
            for &d in &s.days {
                let d = usize::from(d) * HOURS_PER_DAY;
                for (b, &v) in s.hour_bounds[d..d + HOURS_PER_DAY]
                    .iter_mut()
                    .zip(&row[d..d + HOURS_PER_DAY])
                {
                    *b += f64::from(v);
                }
            }
        }
        s.hours.clear();
        for &d in &s.days {
            let d = usize::from(d) * HOURS_PER_DAY;
            s.hours.extend(
                (d..d + HOURS_PER_DAY)
                    .filter(|&h| best.reachable(s.hour_bounds[h]))
                    .map(|h| h as u16),
            );
        }
        // Ordering pays off once exact hour sums are expensive.
        if drawn.len() >= SORT_FROM {
            sort_by_bound(&mut s.hours, &s.hour_bounds, direction);
        }
        for &h in &s.hours {
            let h = usize::from(h);
            if best.reachable(s.hour_bounds[h]) {
                self.visit_hour(drawn, h, &mut best);
            } else if drawn.len() >= SORT_FROM {
                break;
            }
        }

        let individual = match direction {
            Direction::Offtake => &self.peak_offtake,
            Direction::Injection => &self.peak_injection,
        };
        let individual_sum = drawn.iter().fold(0.0, |acc, &i| acc + individual[i]);
        FeederExtreme {
            peak_kw: best.value,
            peak_quarter_index: best.quarter,
            simultaneity: simultaneity(direction, best.value, individual_sum),
        }
    }

    /// Year-long summed series of a feeder, in draw order.
    pub fn summed_series(&self, drawn: &[usize], out: &mut Vec<f64>) {
        self.summed_range(drawn, 0..self.set.quarters(), out);
    }

    /// Summed series over the quarter-hours in `range`, in draw order.
    pub fn summed_range(&self, drawn: &[usize], range: std::ops::Range<usize>, out: &mut Vec<f64>) {
        out.clear();
        out.resize(range.len(), 0.0);
        for &i in drawn {
            for (s, v) in out
                .iter_mut()
                .zip(&self.set.profiles()[i].power()[range.clone()])
            {
                *s += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::calendar::DEFAULT_TIMEZONE;
    use crate::profile_store::ProfileLabels;

    fn short(id: &str, power: Vec<f64>) -> Profile {
        Profile::new(id, power, ProfileLabels::default()).unwrap()
    }

    #[test]
    fn hand_computed_offtake() {
        let (a, b) = (short("a", vec![1.0, 2.0]), short("b", vec![2.0, 1.0]));
        let m = feeder_metrics(&[&a, &b], Direction::Offtake).unwrap();
        assert_eq!(m.peak_kw, 3.0);
        assert_eq!(m.peak_quarter_index, 0);
        assert_eq!(m.simultaneity, Some(0.75));
        assert_eq!(m.peak_per_connection_kw, 1.5);
        assert_eq!(m.drawn_ids, vec!["a", "b"]);
    }

    #[test]
    fn hand_computed_injection() {
        let (a, b) = (short("a", vec![-2.0, 0.0]), short("b", vec![0.0, -2.0]));
        let m = feeder_metrics(&[&a, &b], Direction::Injection).unwrap();
        assert_eq!(m.peak_kw, -2.0);
        assert_eq!(m.peak_quarter_index, 0);
        assert_eq!(m.simultaneity, Some(0.5));
    }

    #[test]
    fn zero_profiles_have_no_simultaneity() {
        let (a, b) = (short("a", vec![0.0; 4]), short("b", vec![0.0; 4]));
        let m = feeder_metrics(&[&a, &b], Direction::Offtake).unwrap();
        assert_eq!(m.peak_kw, 0.0);
        assert_eq!(m.simultaneity, None);
        // Pure consumers have nothing to inject.
        let c = short("c", vec![1.0, 2.0]);
        assert_eq!(
            feeder_metrics(&[&c], Direction::Injection)
                .unwrap()
                .simultaneity,
            None
        );
        assert!(feeder_metrics(&[], Direction::Offtake).is_err());
    }

    #[test]
    fn single_profile_is_fully_simultaneous() {
        let a = short("a", vec![0.3, -1.0, 2.7, 2.7]);
        for dir in Direction::BOTH {
            assert_eq!(feeder_metrics(&[&a], dir).unwrap().simultaneity, Some(1.0));
        }
    }

    fn year_set(values: &[Vec<f64>]) -> ProfileSet {
        let profiles = values
            .iter()
            .enumerate()
            .map(|(i, v)| short(&format!("p{i}"), v.clone()))
            .collect();
        ProfileSet::new(2022, DEFAULT_TIMEZONE, profiles).unwrap()
    }

    /// Year-long profiles from a compact generator: a few coarse levels make
    /// ties between quarters and between days common.
    fn year_profiles() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..6, any::<u64>()).prop_map(|(n, seed)| {
            use rand::Rng;
            let mut rng = crate::rng::stream(seed, 0, 0);
            (0..n)
                .map(|_| {
                    let scale = rng.gen_range(0.1..3.0);
                    (0..35_040)
                        .map(|_| match rng.gen_range(0..4) {
                            0 => 0.0,
                            1 => scale,
                            2 => -scale,
                            _ => rng.gen_range(-1.0..1.0) * scale,
                        })
                        .collect()
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernel_matches_direct_sum(values in year_profiles(), rot in 0usize..6) {
            let set = year_set(&values);
            let kernel = FeederKernel::new(&set);
            let mut scratch = kernel.scratch();
            let mut drawn: Vec<usize> = (0..set.len()).collect();
            drawn.rotate_left(rot % set.len());
            for take in 1..=drawn.len() {
                let feeder = &drawn[..take];
                let profiles: Vec<&Profile> = feeder.iter().map(|&i| set.get(i).unwrap()).collect();
                for dir in Direction::BOTH {
                    let direct = feeder_metrics(&profiles, dir).unwrap();
                    let fast = kernel.evaluate(feeder, dir, &mut scratch);
                    prop_assert_eq!(fast.peak_kw.to_bits(), direct.peak_kw.to_bits());
                    prop_assert_eq!(fast.peak_quarter_index, direct.peak_quarter_index);
                    prop_assert_eq!(
                        fast.simultaneity.map(f64::to_bits),
                        direct.simultaneity.map(f64::to_bits)
                    );
                }
            }
        }

        #[test]
        fn feeder_peak_bounds(values in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 8), 1..6)) {
            let profiles: Vec<Profile> = values.iter().enumerate().map(|(i, v)| short(&i.to_string(), v.clone())).collect();
            let refs: Vec<&Profile> = profiles.iter().collect();
            let m = feeder_metrics(&refs, Direction::Offtake).unwrap();
            let individual: f64 = refs.iter().map(|p| p.peak(Direction::Offtake).0).sum();
            prop_assert!(m.peak_kw <= individual * (1.0 + 1e-12));
            for p in &refs {
                prop_assert!(p.power()[m.peak_quarter_index] <= m.peak_kw);
            }
            if let Some(s) = m.simultaneity {
                prop_assert!(s > 0.0 && s <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn outward_rounding_brackets_the_value() {
        for v in [0.1, -0.1, 1.0 / 3.0, 0.0, 1e-300, -1e-300, 22.0, 1e39] {
            assert!(f64::from(f32_at_least(v)) >= v, "{v}");
            assert!(f64::from(f32_at_most(v)) <= v, "{v}");
        }
    }

    #[test]
    fn constant_profiles_tie_on_the_first_quarter() {
        let set = year_set(&[vec![1.0; 35_040], vec![2.0; 35_040]]);
        let kernel = FeederKernel::new(&set);
        let e = kernel.evaluate(&[1, 0], Direction::Offtake, &mut kernel.scratch());
        assert_eq!((e.peak_kw, e.peak_quarter_index), (3.0, 0));
        let e = kernel.evaluate(&[0], Direction::Injection, &mut kernel.scratch());
        assert_eq!(
            (e.peak_kw, e.peak_quarter_index, e.simultaneity),
            (1.0, 0, None)
        );
    }
}
