use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use parabolic_bench::{mean_value_1d, unit_square};
use parabolic_core::{assemble, CoefficientField, GridFunction, Problem, SolveConfig};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_2d");
    let coeffs = CoefficientField::constant(2, vec![1.0, 0.3, 0.3, 0.8]);
    for n in [32usize, 64] {
        let d = unit_square(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &d, |b, d| {
            b.iter(|| assemble(&coeffs, black_box(d.clone())).unwrap())
        });
    }
    group.finish();
}

fn evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_1d");
    for n in [64usize, 256] {
        let f = mean_value_1d(n, 0.01);
        let x0 = GridFunction::from_fn(f.domain.clone(), 2.0, |x| x[0].sin()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &x0, |b, x0| {
            b.iter(|| f.propagator.evolve(&f.rhs, black_box(x0), 0.0, 1.0).unwrap())
        });
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let f = mean_value_1d(64, 0.01);
    let problem = Problem::new(&f.propagator, &f.rhs, &f.condition, 0.0, 1.0, 2.0);
    let cfg = SolveConfig {
        tol: 1e-10,
        ..Default::default()
    };
    let zero = GridFunction::zeros(f.domain.clone(), 2.0).unwrap();
    c.bench_function("picard_mean_value_1d", |b| {
        b.iter(|| problem.picard_solve(&cfg, black_box(&zero)).unwrap())
    });
}

criterion_group!(benches, assembly, evolve, picard);
criterion_main!(benches);
