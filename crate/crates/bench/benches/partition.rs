use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splitsan_bench::random_units;
use splitsan_core::{oracle_partition, plan_partition};
use std::hint::black_box;

fn greedy(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_partition");
    for count in [16, 256, 4096] {
        let units = random_units(count, 1000, 7);
        group.bench_with_input(BenchmarkId::from_parameter(count), &units, |b, units| {
            b.iter(|| plan_partition(black_box(units), 4, None).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_partition");
    group.sample_size(10);
    for count in [8, 12] {
        let units = random_units(count, 100, 11);
        group.bench_with_input(BenchmarkId::from_parameter(count), &units, |b, units| {
            b.iter(|| oracle_partition(black_box(units), 3, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, greedy, oracle);
criterion_main!(benches);
