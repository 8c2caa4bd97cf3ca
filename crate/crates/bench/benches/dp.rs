use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hopfid_bench::shipped_registry;
use hopfid_core::{
    all_in_success, min_copy_search, PathSpec, ProtocolRegistry, ScheduleConfig, SearchSpace, WernerParameter,
};

fn all_in_dp(c: &mut Criterion) {
    let mut group = c.benchmark_group("all_in_success");
    for &n0 in &[216usize, 1324, 5000] {
        group.bench_with_input(BenchmarkId::new("r4_k2", n0), &n0, |b, &n0| {
            b.iter(|| all_in_success(ScheduleConfig::new(4, black_box(n0)), &[0.2318, 0.4188]))
        });
        group.bench_with_input(BenchmarkId::new("r2_k6", n0), &n0, |b, &n0| {
            b.iter(|| all_in_success(ScheduleConfig::new(2, black_box(n0)), &[0.56, 0.6, 0.66, 0.75, 0.85, 0.93]))
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let jansen = SearchSpace::new(shipped_registry());
    let bbpssw = SearchSpace::new(ProtocolRegistry::builtin());
    let w0 = WernerParameter::new(0.9327).unwrap();
    let path = PathSpec::new(9).unwrap();
    c.bench_function("min_copy_search/worked_example", |b| {
        b.iter(|| min_copy_search(black_box(w0), path, 0.75, &jansen).unwrap())
    });
    c.bench_function("min_copy_search/bbpssw_l9", |b| {
        b.iter(|| min_copy_search(black_box(w0), path, 0.75, &bbpssw).unwrap())
    });
}

criterion_group!(benches, all_in_dp, search);
criterion_main!(benches);
