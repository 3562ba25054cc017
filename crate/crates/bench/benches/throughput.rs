use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use collider_core::batch::u_statistic;
use collider_core::private_estimator::run_mechanism;
use collider_core::rng::rng_from_seed;
use collider_core::{
    DiscreteDistribution, HashChannel, MechanismPlan, PrivacyParams, SeqTestState,
};

fn hashing(c: &mut Criterion) {
    let params = PrivacyParams::new(1.0, 1e-5).unwrap();
    let channel = HashChannel::new(params, [7; 16]).unwrap();
    let mut group = c.benchmark_group("hash");
    group.throughput(Throughput::Elements(1));
    group.bench_function("grouped", |b| {
        let mut x = 0u64;
        b.iter(|| {
            x = x.wrapping_add(1);
            black_box(channel.hash_grouped(3, x % 363, x))
        })
    });
    group.bench_function("privatize", |b| {
        let mut rng = rng_from_seed(1);
        b.iter(|| black_box(channel.privatize(3, 17, &mut rng)))
    });
    group.finish();
}

fn sequential_update(c: &mut Criterion) {
    let d = DiscreteDistribution::uniform(1000).unwrap();
    let samples = d.sample_n(100_000, &mut rng_from_seed(2));
    let mut group = c.benchmark_group("seqtest");
    group.throughput(Throughput::Elements(samples.len() as u64));
    group.bench_function("update_100k", |b| {
        b.iter(|| {
            // c₀ = 1/k keeps the test running through every sample.
            let mut state = SeqTestState::new(0.001, 0.1).unwrap();
            for &x in &samples {
                state.update(x).unwrap();
            }
            black_box(state.collisions())
        })
    });
    group.finish();
}

fn u_statistic_bench(c: &mut Criterion) {
    let d = DiscreteDistribution::power_law(1000).unwrap();
    let mut group = c.benchmark_group("u_statistic");
    for n in [1_000usize, 100_000] {
        let samples = d.sample_n(n, &mut rng_from_seed(3));
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &samples, |b, s| {
            b.iter(|| black_box(u_statistic(s).unwrap()))
        });
    }
    group.finish();
}

fn mechanism(c: &mut Criterion) {
    let params = PrivacyParams::new(2.0, 0.01).unwrap();
    let plan = MechanismPlan::new(200_000, 1.0, 0.1, params).unwrap();
    let channel = HashChannel::new(params, [9; 16]).unwrap();
    let d = DiscreteDistribution::uniform(100).unwrap();
    let mut group = c.benchmark_group("mechanism");
    group.sample_size(10);
    group.throughput(Throughput::Elements(plan.n));
    group.bench_function("n_200k", |b| {
        let mut rng = rng_from_seed(4);
        b.iter(|| black_box(run_mechanism(&plan, &channel, &d, &mut rng).unwrap().c_hat))
    });
    group.finish();
}

criterion_group!(
    benches,
    hashing,
    sequential_update,
    u_statistic_bench,
    mechanism
);
criterion_main!(benches);
