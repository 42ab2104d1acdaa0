use clusterflow::{AdvectionMode, EllipticSettings, Monitor, MonitorConfig};
use clusterflow_bench::stepper;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(20);
    for n in [32, 64] {
        for (name, mode) in [("upwind", AdvectionMode::Upwind), ("energy", AdvectionMode::Energy)] {
            let (s, state) = stepper(n, mode, EllipticSettings::default());
            let dt = s.stable_dt(&state, 0.2).min(1e-2);
            group.bench_with_input(BenchmarkId::new(name, n), &state, |b, st| {
                b.iter(|| s.step(black_box(st), dt).unwrap())
            });
        }
        let parallel = EllipticSettings { parallel: true, ..EllipticSettings::default() };
        let (s, state) = stepper(n, AdvectionMode::Upwind, parallel);
        let dt = s.stable_dt(&state, 0.2).min(1e-2);
        group.bench_with_input(BenchmarkId::new("upwind-parallel", n), &state, |b, st| {
            b.iter(|| s.step(black_box(st), dt).unwrap())
        });
    }
    group.finish();
}

fn monitor(c: &mut Criterion) {
    let mut group = c.benchmark_group("monitor");
    for n in [32, 64] {
        let (s, state) = stepper(n, AdvectionMode::Upwind, EllipticSettings::default());
        let next = s.step(&state, 1e-3).unwrap();
        group.bench_with_input(BenchmarkId::new("record", n), &(state, next), |b, (st, nx)| {
            b.iter(|| {
                let mut m = Monitor::new(*s.grid(), *s.params(), AdvectionMode::Upwind, MonitorConfig::default()).unwrap();
                m.record(black_box(st)).unwrap();
                m.record(black_box(nx)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, step, monitor);
criterion_main!(benches);
