//! Sequential vs rayon execution on the two hot paths: building a one-step
//! matrix and sweeping duality pairs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vertex_duality::duality::{DualityVariant, IdentityChecker, IdentityKind};
use vertex_duality::evolve::{build_step_matrix, BoundarySpec, Direction, StepSpec};
use vertex_duality::state::LatticeWindow;
use vertex_duality::{Exec, Rational};

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn step_matrix(c: &mut Criterion) {
    let window = LatticeWindow::uniform(-3, 0, 2).unwrap();
    let z = vec![Rational::new(1, 3); window.len()];
    let spec = StepSpec::new(2, Rational::new(2, 1), window, z, Direction::Forward, BoundarySpec::FORWARD_EXIT);
    let mut g = c.benchmark_group("step_matrix n2 m2 L4");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| build_step_matrix(&spec, e).unwrap())
        });
    }
    g.finish();
}

fn duality_sweep(c: &mut Criterion) {
    let window = LatticeWindow::uniform(-4, -1, 1).unwrap();
    let z: Vec<Rational> = [3, 5, 7, 9].iter().map(|&d| Rational::new(1, d)).collect();
    let checker = IdentityChecker::new(
        IdentityKind::Theorem1,
        DualityVariant::Normalized,
        2,
        &Rational::new(3, 2),
        &window,
        &z,
    )
    .unwrap();
    let mut g = c.benchmark_group("theorem1 n2 L4");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| checker.check(e, 0).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, step_matrix, duality_sweep);
criterion_main!(benches);
