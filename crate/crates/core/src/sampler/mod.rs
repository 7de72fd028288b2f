//! Monte Carlo feeder construction.
//!
//! A sample draws `n` distinct connections uniformly from the population,
//! sums their profiles and records the extreme of the sum, when it occurs
//! and the simultaneity factor. Sample `i` for feeder size `n` uses its
//! own random stream keyed by `(seed, n, i)`, so reports are bit-identical
//! whatever the number of worker threads.

mod kernel;
mod report;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile_store::ProfileSet;
use crate::rng;
use crate::stats::DistributionSummary;
use crate::subsets::{apply_subset, SubsetSpec};

pub use crate::profile_store::Direction;
pub use crate::stats::percentiles;
pub use kernel::{feeder_metrics, FeederExtreme, FeederKernel, FeederMetrics, Scratch};
pub use report::{
    lct_contribution, read_samples_csv, write_contribution_csv, ContributionRow, DirectionResult,
    MetricDelta, SampleRecord, SampleRow, SamplingReport, SizeReport,
};

/// Feeder sizes swept by default, from a small feeder to a large one.
pub const DEFAULT_CONNECTIONS: [usize; 7] = [10, 20, 40, 70, 100, 150, 250];
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionSelection {
    Offtake,
    Injection,
    Both,
}

impl DirectionSelection {
    pub fn directions(self) -> &'static [Direction] {
        match self {
            DirectionSelection::Offtake => &[Direction::Offtake],
            DirectionSelection::Injection => &[Direction::Injection],
            DirectionSelection::Both => &Direction::BOTH,
        }
    }
}

impl fmt::Display for DirectionSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DirectionSelection::Offtake => "offtake",
            DirectionSelection::Injection => "injection",
            DirectionSelection::Both => "both",
        })
    }
}

impl FromStr for DirectionSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "offtake" => Ok(DirectionSelection::Offtake),
            "injection" => Ok(DirectionSelection::Injection),
            "both" => Ok(DirectionSelection::Both),
            _ => Err(format!(
                "unknown direction `{s}` (offtake, injection or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Feeder sizes; each is sampled independently.
    pub connections: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub direction: DirectionSelection,
    pub subset: SubsetSpec,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            connections: DEFAULT_CONNECTIONS.to_vec(),
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            direction: DirectionSelection::Offtake,
            subset: SubsetSpec::All,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self, population: usize) -> Result<()> {
        if self.connections.is_empty() {
            return Err(Error::Config("no feeder sizes given".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.connections.contains(&0) {
            return Err(Error::Config("feeder sizes must be at least 1".into()));
        }
        let mut sorted = self.connections.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.connections.len() {
            return Err(Error::Config("feeder sizes must be distinct".into()));
        }
        if let Some(&n) = self.connections.iter().find(|&&n| n > population) {
            return Err(Error::PopulationTooSmall {
                requested: n,
                available: population,
            });
        }
        Ok(())
    }
}

/// Draws `n_connections` distinct indices out of `population`.
pub fn sample_feeder<R: Rng + ?Sized>(
    population: usize,
    n_connections: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_connections > population {
        return Err(Error::PopulationTooSmall {
            requested: n_connections,
            available: population,
        });
    }
    Ok(index::sample(rng, population, n_connections).into_vec())
}

/// The feeder drawn for sample `sample_index` of size `n_connections`.
pub fn draw_for_sample(
    seed: u64,
    n_connections: usize,
    sample_index: usize,
    population: usize,
) -> Result<Vec<usize>> {
    let mut rng = rng::stream(seed, n_connections as u64, sample_index as u64);
    sample_feeder(population, n_connections, &mut rng)
}

/// Raw samples of one feeder size: per sample, one result per direction in
/// the order of `directions`.
pub fn sample_size(
    kernel: &FeederKernel<'_>,
    seed: u64,
    n_connections: usize,
    n_samples: usize,
    directions: &[Direction],
) -> Result<Vec<Vec<SampleRecord>>> {
    let population = kernel.set().len();
    let per_sample: Vec<Vec<FeederExtreme>> = (0..n_samples)
        .into_par_iter()
        .map_init(
            || kernel.scratch(),
            |scratch, i| {
                let drawn = draw_for_sample(seed, n_connections, i, population)?;
                Ok(directions
                    .iter()
                    .map(|&d| kernel.evaluate(&drawn, d, scratch))
                    .collect())
            },
        )
        .collect::<Result<_>>()?;
    Ok((0..directions.len())
        .map(|k| {
            per_sample
                .iter()
                .enumerate()
                .map(|(i, r)| SampleRecord {
                    sample_id: i,
                    peak_kw: r[k].peak_kw,
                    peak_quarter_index: r[k].peak_quarter_index,
                    simultaneity: r[k].simultaneity,
                })
                .collect()
        })
        .collect())
}

/// Runs the Monte Carlo sweep on the subset of `set` selected by the
/// config.
pub fn run_sampling(set: &ProfileSet, config: &SamplingConfig) -> Result<SamplingReport> {
    let selection = apply_subset(set, &config.subset);
    config.validate(selection.set.len())?;
    let kernel = FeederKernel::new(&selection.set);
    let directions = config.direction.directions();
    let mut sizes = Vec::with_capacity(config.connections.len());
    for &n in &config.connections {
        let raw = sample_size(&kernel, config.seed, n, config.n_samples, directions)?;
        let results = directions
            .iter()
            .zip(raw)
            .map(|(&direction, samples)| DirectionResult::from_samples(direction, n, samples))
            .collect::<Result<_>>()?;
        sizes.push(SizeReport {
            n_connections: n,
            results,
        });
    }
    Ok(SamplingReport {
        config: config.clone(),
        population: selection.set.len(),
        year: set.year(),
        timezone: set.timezone().name().to_string(),
        sizes,
    })
}

impl DirectionResult {
    fn from_samples(
        direction: Direction,
        n: usize,
        samples: Vec<SampleRecord>,
    ) -> Result<DirectionResult> {
        let peaks: Vec<f64> = samples.iter().map(|s| s.peak_kw).collect();
        let per_connection: Vec<f64> = peaks.iter().map(|p| p / n as f64).collect();
        let simultaneity: Vec<f64> = samples.iter().filter_map(|s| s.simultaneity).collect();
        Ok(DirectionResult {
            direction,
            peak_kw: DistributionSummary::of(&peaks)?,
            peak_per_connection_kw: DistributionSummary::of(&per_connection)?,
            simultaneity: if simultaneity.is_empty() {
                None
            } else {
                Some(DistributionSummary::of(&simultaneity)?)
            },
            undefined_simultaneity: samples.len() - simultaneity.len(),
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use statrs::distribution::{Binomial, DiscreteCDF};

    use super::*;
    use crate::calendar::DEFAULT_TIMEZONE;
    use crate::profile_store::{Profile, ProfileLabels};

    fn flat_set(levels: &[f64]) -> ProfileSet {
        let profiles = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut p = vec![0.0; 35_040];
                p[i * 1000] = l;
                p[20_000 + i] = -l / 2.0;
                Profile::new(format!("p{i}"), p, ProfileLabels::default()).unwrap()
            })
            .collect();
        ProfileSet::new(2022, DEFAULT_TIMEZONE, profiles).unwrap()
    }

    #[test]
    fn whole_population_draw_uses_every_index() {
        let mut rng = rng::stream(1, 2, 3);
        let mut d = sample_feeder(7, 7, &mut rng).unwrap();
        d.sort_unstable();
        assert_eq!(d, (0..7).collect::<Vec<_>>());
        assert!(matches!(
            sample_feeder(3, 4, &mut rng),
            Err(Error::PopulationTooSmall {
                requested: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn draws_are_reproducible() {
        let a: Vec<_> = (0..50)
            .map(|i| draw_for_sample(9, 3, i, 20).unwrap())
            .collect();
        let b: Vec<_> = (0..50)
            .map(|i| draw_for_sample(9, 3, i, 20).unwrap())
            .collect();
        assert_eq!(a, b);
        let c: Vec<_> = (0..50)
            .map(|i| draw_for_sample(10, 3, i, 20).unwrap())
            .collect();
        assert_ne!(a, c);
    }

    #[test]
    fn single_draw_frequencies_are_binomial() {
        let n = 10_000;
        let mut counts = [0u64; 4];
        for i in 0..n {
            counts[draw_for_sample(77, 1, i, 4).unwrap()[0]] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        let b = Binomial::new(0.25, n as u64).unwrap();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 3.0 * sigma, "{counts:?}");
            // Two-sided tail at alpha = 0.001.
            let tail = if c >= 2500 { b.sf(c - 1) } else { b.cdf(c) };
            assert!(2.0 * tail > 0.001, "{counts:?}");
        }
    }

    #[test]
    fn one_sample_of_everything_equals_direct_metrics() {
        let set = flat_set(&[1.0, 2.0, 3.0, 4.0]);
        let config = SamplingConfig {
            connections: vec![4],
            n_samples: 1,
            seed: 5,
            direction: DirectionSelection::Both,
            subset: SubsetSpec::All,
        };
        let report = run_sampling(&set, &config).unwrap();
        let drawn = draw_for_sample(5, 4, 0, 4).unwrap();
        let profiles: Vec<&Profile> = drawn.iter().map(|&i| set.get(i).unwrap()).collect();
        for r in &report.sizes[0].results {
            let m = feeder_metrics(&profiles, r.direction).unwrap();
            assert_eq!(r.samples[0].peak_kw, m.peak_kw);
            assert_eq!(r.samples[0].peak_quarter_index, m.peak_quarter_index);
            assert_eq!(r.samples[0].simultaneity, m.simultaneity);
            assert_eq!(r.peak_per_connection_kw.mean, m.peak_per_connection_kw);
            assert!(r.peak_per_connection_kw.is_ordered());
        }
    }

    #[test]
    fn enumeration_oracle_four_choose_two() {
        let levels = [1.0, 2.0, 3.0, 4.0];
        let set = flat_set(&levels);
        // Peaks never coincide, so every feeder peaks at its larger member.
        let mut exact = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                exact += f64::max(levels[i], levels[j]) / 2.0;
            }
        }
        exact /= 6.0;
        let config = SamplingConfig {
            connections: vec![2],
            n_samples: 20_000,
            seed: 11,
            direction: DirectionSelection::Offtake,
            subset: SubsetSpec::All,
        };
        let r = &run_sampling(&set, &config).unwrap().sizes[0].results[0];
        let ppc = &r.peak_per_connection_kw;
        assert!(
            (ppc.mean - exact).abs() < 3.0 * ppc.standard_error(),
            "{} vs {exact}",
            ppc.mean
        );
    }

    #[test]
    fn identity_feeder_size_one() {
        let set = flat_set(&[1.0, 2.0, 3.0]);
        let config = SamplingConfig {
            connections: vec![1],
            n_samples: 200,
            seed: 1,
            direction: DirectionSelection::Both,
            subset: SubsetSpec::All,
        };
        let report = run_sampling(&set, &config).unwrap();
        for r in &report.sizes[0].results {
            assert!(r.samples.iter().all(|s| s.simultaneity == Some(1.0)));
        }
    }

    #[test]
    fn report_does_not_depend_on_thread_count() {
        let set = flat_set(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let config = SamplingConfig {
            connections: vec![2, 3, 5],
            n_samples: 300,
            seed: 3,
            direction: DirectionSelection::Both,
            subset: SubsetSpec::All,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sampling(&set, &config).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let c = SamplingConfig {
            connections: vec![5],
            ..SamplingConfig::default()
        };
        assert!(matches!(
            c.validate(4),
            Err(Error::PopulationTooSmall { .. })
        ));
        assert!(c.validate(5).is_ok());
        assert!(SamplingConfig {
            n_samples: 0,
            ..c.clone()
        }
        .validate(9)
        .is_err());
        assert!(SamplingConfig {
            connections: vec![2, 2],
            ..c
        }
        .validate(9)
        .is_err());
        assert_eq!(
            "both"
                .parse::<DirectionSelection>()
                .unwrap()
                .directions()
                .len(),
            2
        );
    }
}
