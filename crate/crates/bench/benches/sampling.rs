use anderson_core::dim::Dim;
use anderson_core::groundstate::{solve_ground_state, GroundStateOptions};
use anderson_core::lattice::{mollify_noise, sample_white_noise, LatticeGrid, MollifierSpec};
use anderson_core::renorm::lattice_green_diagonal;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_white_noise(c: &mut Criterion) {
    let grid = LatticeGrid::centered(Dim::One, 1000.0, 100).unwrap();
    c.bench_function("white_noise_100k_sites", |b| {
        b.iter(|| black_box(sample_white_noise(&grid, 1.0, 7).unwrap()))
    });
}

fn bench_mollify(c: &mut Criterion) {
    let grid = LatticeGrid::centered(Dim::Two, 8.0, 16).unwrap();
    let field = sample_white_noise(&grid, 1.0, 3).unwrap();
    let moll = MollifierSpec::new(Dim::Two, 8.0 * grid.spacing()).unwrap();
    c.bench_function("mollify_d2_16k_sites", |b| {
        b.iter(|| black_box(mollify_noise(&field, &moll).unwrap()))
    });
}

fn bench_green_diagonal(c: &mut Criterion) {
    c.bench_function("green_diagonal_d2_a2e-8", |b| {
        b.iter(|| black_box(lattice_green_diagonal(Dim::Two, 2f64.powi(-8), 1.0).unwrap()))
    });
}

fn bench_ground_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state");
    group.sample_size(10);
    group.bench_function("d1_default", |b| {
        b.iter(|| black_box(solve_ground_state(Dim::One, &GroundStateOptions::default()).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_white_noise,
    bench_mollify,
    bench_green_diagonal,
    bench_ground_state
);
criterion_main!(benches);
