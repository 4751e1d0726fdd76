use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use entlink_core::sim::simulate;
use entlink_core::tagproc::{count_coincidences_with, cross_correlate_with, CoincidenceOptions};
use entlink_core::{Execution, ExperimentConfig, TagStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATHS: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn streams(n: usize) -> (TagStream, TagStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut t = 0u64;
    for _ in 0..n {
        t += rng.random_range(1..20_000);
        a.push(t);
        b.push(t + rng.random_range(0..400));
    }
    b.sort_unstable();
    (
        TagStream::from_timestamps(a, 0).unwrap(),
        TagStream::from_timestamps(b, 1).unwrap(),
    )
}

fn coincidences(c: &mut Criterion) {
    let n = 2_000_000;
    let (a, b) = streams(n);
    let mut g = c.benchmark_group("count_coincidences");
    g.throughput(Throughput::Elements(2 * n as u64));
    for (name, exec) in PATHS {
        let opts = CoincidenceOptions {
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| count_coincidences_with(&a, &b, 200, 200, &opts).unwrap())
        });
    }
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let n = 500_000;
    let (a, b) = streams(n);
    let mut g = c.benchmark_group("cross_correlate");
    g.throughput(Throughput::Elements(2 * n as u64));
    for (name, exec) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| cross_correlate_with(&a, &b, 0, 50_000, 10, exec).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::preset("local-460k").unwrap();
    cfg.duration_s = 0.2;
    cfg.shard_s = 0.02;
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    for (name, exec) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| simulate(&cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, coincidences, correlation, simulation);
criterion_main!(benches);
