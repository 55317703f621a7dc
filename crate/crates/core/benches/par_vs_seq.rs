//! Parallel-vs-sequential comparison of the two dominant workloads: fBm path
//! batch sampling and the Monte Carlo S-transform estimate. "seq" runs the
//! identical code inside a single-threaded rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fbm_current::frac_ops::HurstParam;
use fbm_current::gaussian::sample_fbm_paths;
use fbm_current::stransform::{mc_donsker_s, DonskerSpec, TestFunction};

fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
}

fn bench_fbm_sampling(c: &mut Criterion) {
    let h = HurstParam::new(0.3).unwrap();
    let mut group = c.benchmark_group("fbm_sample_2048paths_256steps");
    let run = || sample_fbm_paths(h, 1.0, 256, 2048, 2, 7).unwrap();
    group.bench_function(BenchmarkId::from_parameter("par"), |b| b.iter(run));
    let pool = single_thread_pool();
    group.bench_function(BenchmarkId::from_parameter("seq"), |b| {
        b.iter(|| pool.install(run))
    });
    group.finish();
}

fn bench_mc_stransform(c: &mut Criterion) {
    let spec = DonskerSpec::new(vec![0.5], HurstParam::new(0.3).unwrap(), 1.0).unwrap();
    let phi = TestFunction::from_hermite(vec![vec![0.3]]).unwrap();
    let mut group = c.benchmark_group("mc_donsker_100k");
    group.sample_size(20);
    let run = || mc_donsker_s(&spec, 1.0, &phi, 100_000, 42).unwrap();
    group.bench_function(BenchmarkId::from_parameter("par"), |b| b.iter(run));
    let pool = single_thread_pool();
    group.bench_function(BenchmarkId::from_parameter("seq"), |b| {
        b.iter(|| pool.install(run))
    });
    group.finish();
}

criterion_group!(benches, bench_fbm_sampling, bench_mc_stransform);
criterion_main!(benches);
