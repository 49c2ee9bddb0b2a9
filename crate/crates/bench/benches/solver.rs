use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use frontspeed_bench::{example_one, example_two, fisher};
use frontspeed_core::shooting::Shooter;
use frontspeed_core::{bounds, critical_speed, reconstruct};

fn shooting(c: &mut Criterion) {
    let spec = fisher();
    let shooter = Shooter::new(&spec).unwrap();
    c.bench_function("shoot fisher c=2.5", |b| {
        b.iter(|| shooter.shoot(black_box(2.5)).unwrap())
    });
    let traj = shooter.shoot(5.0 / 6f64.sqrt()).unwrap();
    c.bench_function("profile fisher", |b| {
        b.iter(|| reconstruct(black_box(&traj), &spec).unwrap())
    });
}

fn speeds(c: &mut Criterion) {
    let one = example_one();
    c.bench_function("bounds example 1", |b| {
        b.iter(|| bounds::estimate(black_box(&one)).unwrap())
    });
    let two = example_two();
    let mut group = c.benchmark_group("critical speed");
    group.sample_size(10);
    group.bench_function("example 2 tol 1e-6", |b| {
        b.iter(|| critical_speed(black_box(&two), 1e-6).unwrap())
    });
    group.finish();
}

criterion_group!(benches, shooting, speeds);
criterion_main!(benches);
