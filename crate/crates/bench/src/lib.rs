//! Benchmarks of the feeder kernel and the per-size sampling loop, on a
//! synthetic population scaled down so that setup stays short.

use std::hint::black_box;
use std::sync::OnceLock;

use criterion::{BenchmarkId, Criterion, Throughput};
use feedersim_core::sampler::{draw_for_sample, feeder_metrics, sample_size, FeederKernel};
use feedersim_core::synth::{config_weather, generate_population, GeneratorConfig};
use feedersim_core::{Direction, ProfileSet};

/// Profiles per label group, in the order of the default generator groups.
const GROUP_COUNTS: [usize; 4] = [150, 60, 80, 20];

pub fn population() -> &'static ProfileSet {
    static SET: OnceLock<ProfileSet> = OnceLock::new();
    SET.get_or_init(|| {
        let mut config = GeneratorConfig::default();
        for (g, n) in config.groups.iter_mut().zip(GROUP_COUNTS) {
            g.count = n;
        }
        let weather = config_weather(&config).expect("weather");
        generate_population(&config, &weather).expect("population")
    })
}

/// Bound-pruned kernel against the plain year-long sum.
pub fn kernel(c: &mut Criterion) {
    let set = population();
    let kernel = FeederKernel::new(set);
    let mut group = c.benchmark_group("feeder_peak");
    for n in [10, 100, 250] {
        let drawn = draw_for_sample(7, n, 0, set.len()).expect("draw");
        let profiles: Vec<_> = drawn.iter().map(|&i| &set.profiles()[i]).collect();
        group.throughput(Throughput::Elements(n as u64));
        for direction in Direction::BOTH {
            let mut scratch = kernel.scratch();
            group.bench_with_input(
                BenchmarkId::new(format!("kernel_{direction}"), n),
                &drawn,
                |b, drawn| b.iter(|| kernel.evaluate(black_box(drawn), direction, &mut scratch)),
            );
            group.bench_with_input(
                BenchmarkId::new(format!("direct_{direction}"), n),
                &profiles,
                |b, profiles| b.iter(|| feeder_metrics(black_box(profiles), direction)),
            );
        }
    }
    group.finish();
}

/// One feeder size, both directions, as the sweep runs it.
pub fn sweep(c: &mut Criterion) {
    let set = population();
    let kernel = FeederKernel::new(set);
    let mut group = c.benchmark_group("sample_size");
    group.sample_size(10);
    let n_samples = 200;
    for n in [10, 100, 250] {
        group.throughput(Throughput::Elements(n_samples as u64));
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| sample_size(&kernel, 1, n, n_samples, &Direction::BOTH).expect("samples"))
        });
    }
    group.finish();
}
