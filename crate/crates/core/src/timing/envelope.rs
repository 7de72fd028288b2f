use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{DayRange, HOURS_PER_DAY, QUARTERS_PER_DAY};
use crate::error::{Error, Result};
use crate::profile_store::{extreme, Direction, ProfileSet};
use crate::sampler::{draw_for_sample, FeederKernel, SamplingConfig};
use crate::stats::{quantile_sorted, sort_values};
use crate::subsets::{apply_subset, SubsetSpec};
use crate::weather::{expand_to_quarter_hours, WeatherSeries};

/// Summed values held in memory at once while building bands.
const BLOCK_VALUES: usize = 1 << 24;

/// Per-quarter-hour distribution of the summed feeder load across samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBands {
    pub min: Vec<f64>,
    pub p5: Vec<f64>,
    pub p25: Vec<f64>,
    pub median: Vec<f64>,
    pub p75: Vec<f64>,
    pub p95: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
}

impl EnvelopeBands {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        EnvelopeBands {
            min: v(),
            p5: v(),
            p25: v(),
            median: v(),
            p75: v(),
            p95: v(),
            max: v(),
            mean: v(),
        }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Quantile bands from the lowest to the highest level.
    pub fn quantiles(&self) -> [(&'static str, &[f64]); 7] {
        [
            ("min", &self.min),
            ("p5", &self.p5),
            ("p25", &self.p25),
            ("median", &self.median),
            ("p75", &self.p75),
            ("p95", &self.p95),
            ("max", &self.max),
        ]
    }

    pub fn is_ordered(&self) -> bool {
        let q = self.quantiles();
        (0..self.len()).all(|k| q.windows(2).all(|w| w[0].1[k] <= w[1].1[k]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederEnvelope {
    pub subset: SubsetSpec,
    pub direction: Direction,
    pub n_connections: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub year: i32,
    pub day_range: DayRange,
    /// One entry per quarter-hour of `day_range`.
    pub bands: EnvelopeBands,
    /// Hourly weather repeated over each hour's quarters.
    pub temperature_c: Option<Vec<f64>>,
    pub ssrd_kw_m2: Option<Vec<f64>>,
    /// Per day of the range: fraction of samples whose year extreme falls
    /// on that day.
    pub day_peak_probability: Vec<f64>,
    /// Per day of the range: most frequent quarter-of-day (0..96) of the
    /// samples' day-local extremes, the earliest on ties.
    pub modal_peak_quarter: Vec<usize>,
}

impl FeederEnvelope {
    pub fn modal_peak_hour(&self, day_offset: usize) -> usize {
        self.modal_peak_quarter[day_offset] * HOURS_PER_DAY / QUARTERS_PER_DAY
    }
}

/// Replays the draws of `config` for one feeder size and summarizes the
/// summed load over `day_range`.
pub fn feeder_envelope(
    set: &ProfileSet,
    config: &SamplingConfig,
    n_connections: usize,
    direction: Direction,
    day_range: DayRange,
    weather: Option<&WeatherSeries>,
) -> Result<FeederEnvelope> {
    day_range.validate(set.year())?;
    if config.n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    if n_connections == 0 {
        return Err(Error::Config("feeder size must be at least 1".into()));
    }
    if let Some(w) = weather {
        if w.year() != set.year() {
            return Err(Error::YearMismatch {
                expected: set.year(),
                found: w.year(),
            });
        }
    }
    let selection = apply_subset(set, &config.subset);
    let population = selection.set.len();
    let kernel = FeederKernel::new(&selection.set);
    let draws: Vec<(Vec<usize>, usize)> = (0..config.n_samples)
        .into_par_iter()
        .map_init(
            || kernel.scratch(),
            |scratch, i| {
                let drawn = draw_for_sample(config.seed, n_connections, i, population)?;
                let year_peak = kernel
                    .evaluate(&drawn, direction, scratch)
                    .peak_quarter_index;
                Ok((drawn, year_peak))
            },
        )
        .collect::<Result<_>>()?;

    let mut peak_days = vec![0u64; day_range.len()];
    for &(_, q) in &draws {
        let day = q / QUARTERS_PER_DAY;
        if day_range.days().contains(&day) {
            peak_days[day - day_range.start] += 1;
        }
    }
    let n = draws.len() as f64;
    let day_peak_probability = peak_days.into_iter().map(|c| c as f64 / n).collect();

    let block_days = (BLOCK_VALUES / (draws.len() * QUARTERS_PER_DAY)).max(1);
    let mut bands = EnvelopeBands::with_capacity(day_range.len() * QUARTERS_PER_DAY);
    let mut modal_peak_quarter = Vec::with_capacity(day_range.len());
    let mut start = day_range.start;
    while start < day_range.end {
        let end = (start + block_days).min(day_range.end);
        let quarters = start * QUARTERS_PER_DAY..end * QUARTERS_PER_DAY;
        let rows: Vec<Vec<f64>> = draws
            .par_iter()
            .map(|(drawn, _)| {
                let mut out = Vec::new();
                kernel.summed_range(drawn, quarters.clone(), &mut out);
                out
            })
            .collect();

        for d in 0..end - start {
            let mut counts = [0u64; QUARTERS_PER_DAY];
            for row in &rows {
                let day = &row[d * QUARTERS_PER_DAY..(d + 1) * QUARTERS_PER_DAY];
                let (_, k) = extreme(day, direction).expect("full day");
                counts[k] += 1;
            }
            let modal = (0..QUARTERS_PER_DAY)
                .reduce(|a, b| if counts[b] > counts[a] { b } else { a })
                .expect("non-empty day");
            modal_peak_quarter.push(modal);
        }

        let columns: Vec<[f64; 8]> = (0..quarters.len())
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(rows.len()),
                |column: &mut Vec<f64>, k| {
                    column.clear();
                    column.extend(rows.iter().map(|r| r[k]));
                    let mean = column.iter().sum::<f64>() / n;
                    sort_values(column);
                    let q = |p: f64| quantile_sorted(column, p);
                    [
                        q(0.0),
                        q(0.05),
                        q(0.25),
                        q(0.5),
                        q(0.75),
                        q(0.95),
                        q(1.0),
                        mean,
                    ]
                },
            )
            .collect();
        for c in columns {
            bands.min.push(c[0]);
            bands.p5.push(c[1]);
            bands.p25.push(c[2]);
            bands.median.push(c[3]);
            bands.p75.push(c[4]);
            bands.p95.push(c[5]);
            bands.max.push(c[6]);
            bands.mean.push(c[7]);
        }
        start = end;
    }

    let hours = day_range.start * HOURS_PER_DAY..day_range.end * HOURS_PER_DAY;
    Ok(FeederEnvelope {
        subset: config.subset,
        direction,
        n_connections,
        n_samples: config.n_samples,
        seed: config.seed,
        year: set.year(),
        day_range,
        bands,
        temperature_c: weather.map(|w| expand_to_quarter_hours(&w.temperature_c()[hours.clone()])),
        ssrd_kw_m2: weather.map(|w| expand_to_quarter_hours(&w.ssrd_kw_m2()[hours])),
        day_peak_probability,
        modal_peak_quarter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::DEFAULT_TIMEZONE;
    use crate::profile_store::{Profile, ProfileLabels};
    use crate::sampler::FeederKernel;

    fn set_of(profiles: Vec<Vec<f64>>) -> ProfileSet {
        let profiles = profiles
            .into_iter()
            .enumerate()
            .map(|(i, p)| Profile::new(format!("p{i}"), p, ProfileLabels::default()).unwrap())
            .collect();
        ProfileSet::new(2022, DEFAULT_TIMEZONE, profiles).unwrap()
    }

    fn varied(k: usize) -> Vec<f64> {
        (0..35_040)
            .map(|q| {
                ((q * (k + 3)) % 97) as f64 / 10.0 - 2.0 + if q % 96 == 40 + k { 5.0 } else { 0.0 }
            })
            .collect()
    }

    fn config(n_samples: usize) -> SamplingConfig {
        SamplingConfig {
            connections: vec![2],
            n_samples,
            seed: 5,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn one_sample_bands_equal_the_summed_series() {
        let set = set_of((0..4).map(varied).collect());
        let range = DayRange::new(30, 33);
        let e = feeder_envelope(&set, &config(1), 2, Direction::Offtake, range, None).unwrap();
        let drawn = draw_for_sample(5, 2, 0, 4).unwrap();
        let mut series = Vec::new();
        FeederKernel::new(&set).summed_range(&drawn, range.quarters(), &mut series);
        for (_, band) in e.bands.quantiles() {
            assert_eq!(band, &series[..]);
        }
        assert_eq!(e.bands.mean, series);
        assert_eq!(e.modal_peak_quarter.len(), 3);
        for (d, &k) in e.modal_peak_quarter.iter().enumerate() {
            let day = &series[d * 96..(d + 1) * 96];
            assert_eq!(extreme(day, Direction::Offtake).unwrap().1, k);
        }
    }

    #[test]
    fn identical_profiles_give_zero_width() {
        let set = set_of(vec![varied(1); 5]);
        let e = feeder_envelope(
            &set,
            &config(40),
            2,
            Direction::Injection,
            DayRange::new(0, 2),
            None,
        )
        .unwrap();
        assert_eq!(e.bands.min, e.bands.max);
        assert!(e.bands.is_ordered());
    }

    #[test]
    fn peak_probability_counts_year_extremes_in_range() {
        // Each profile peaks on its own day; a 2-of-3 feeder peaks on the
        // later of its two days because that spike is larger.
        let profiles = (0..3)
            .map(|k| {
                let mut p = vec![0.0; 35_040];
                p[(10 + k) * 96 + 50] = 1.0 + k as f64;
                p
            })
            .collect();
        let set = set_of(profiles);
        let e = feeder_envelope(
            &set,
            &config(300),
            2,
            Direction::Offtake,
            DayRange::new(10, 13),
            None,
        )
        .unwrap();
        assert_eq!(e.day_peak_probability[0], 0.0);
        let total: f64 = e.day_peak_probability.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let outside = feeder_envelope(
            &set,
            &config(50),
            2,
            Direction::Offtake,
            DayRange::new(0, 5),
            None,
        )
        .unwrap();
        assert_eq!(outside.day_peak_probability, vec![0.0; 5]);
        assert!(e.modal_peak_quarter.iter().skip(1).all(|&k| k == 50));
    }

    #[test]
    fn weather_overlay_is_aligned() {
        let set = set_of(vec![varied(0), varied(2)]);
        let t: Vec<f64> = (0..8760).map(|h| h as f64).collect();
        let w = WeatherSeries::new(2022, t, vec![0.0; 8760]).unwrap();
        let e = feeder_envelope(
            &set,
            &config(3),
            2,
            Direction::Offtake,
            DayRange::new(1, 2),
            Some(&w),
        )
        .unwrap();
        let temperature = e.temperature_c.unwrap();
        assert_eq!(temperature.len(), 96);
        assert_eq!(temperature[0], 24.0);
        assert_eq!(temperature[95], 47.0);

        let other = WeatherSeries::new(2021, vec![0.0; 8760], vec![0.0; 8760]).unwrap();
        let r = feeder_envelope(
            &set,
            &config(3),
            2,
            Direction::Offtake,
            DayRange::new(1, 2),
            Some(&other),
        );
        assert!(matches!(r, Err(Error::YearMismatch { .. })));
    }

    #[test]
    fn rejects_bad_ranges_and_sizes() {
        let set = set_of(vec![varied(0), varied(2)]);
        assert!(feeder_envelope(
            &set,
            &config(3),
            2,
            Direction::Offtake,
            DayRange::new(5, 5),
            None
        )
        .is_err());
        assert!(feeder_envelope(
            &set,
            &config(3),
            2,
            Direction::Offtake,
            DayRange::new(300, 366),
            None
        )
        .is_err());
        assert!(feeder_envelope(
            &set,
            &config(3),
            3,
            Direction::Offtake,
            DayRange::new(0, 1),
            None
        )
        .is_err());
    }
}
