use anderson_core::dim::Dim;
use anderson_core::eigensolver::{smallest_eigenpairs_with, SolverOptions};
use anderson_core::hamiltonian::assemble;
use anderson_core::lattice::{sample_white_noise, LatticeGrid, PotentialField};
use anderson_core::renorm::RenormConstant;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn bench_matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec");
    for (dim, side, ppu) in [(Dim::One, 256.0, 16), (Dim::Two, 16.0, 16), (Dim::Three, 6.0, 4)] {
        let grid = LatticeGrid::centered(dim, side, ppu).unwrap();
        let field = sample_white_noise(&grid, 1.0, 1).unwrap();
        let h = assemble(&grid, &field, &RenormConstant::zero(dim)).unwrap();
        let u: Vec<f64> = (0..grid.site_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; grid.site_count()];
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{}_n{}", dim.value(), grid.site_count())),
            &h,
            |b, h| {
                b.iter(|| {
                    h.matvec_into(black_box(&u), &mut out).unwrap();
                    black_box(&out);
                })
            },
        );
    }
    group.finish();
}

fn bench_smallest_pair(c: &mut Criterion) {
    let mut group = c.benchmark_group("lanczos_smallest");
    group.sample_size(10);
    for (dim, side, ppu) in [(Dim::One, 512.0, 4), (Dim::Two, 8.0, 8)] {
        let grid = LatticeGrid::centered(dim, side, ppu).unwrap();
        let field = sample_white_noise(&grid, 1.0, 2).unwrap();
        let h = assemble(&grid, &field, &RenormConstant::zero(dim)).unwrap();
        let opts = SolverOptions {
            tol: 1e-8,
            ..SolverOptions::default()
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("d{}_n{}", dim.value(), grid.site_count())),
            &h,
            |b, h| b.iter(|| black_box(smallest_eigenpairs_with(h, 1, &opts).unwrap())),
        );
    }
    group.finish();
}

fn bench_dense_small(c: &mut Criterion) {
    // Small dense materialisation used by the oracle paths.
    let grid = LatticeGrid::centered(Dim::Two, 2.0, 8).unwrap();
    let h = assemble(
        &grid,
        &PotentialField::zero(grid.clone()),
        &RenormConstant::zero(Dim::Two),
    )
    .unwrap();
    c.bench_function("dense_materialise_225", |b| {
        b.iter(|| black_box(h.to_dense().unwrap()))
    });
}

criterion_group!(benches, bench_matvec, bench_smallest_pair, bench_dense_small);
criterion_main!(benches);
