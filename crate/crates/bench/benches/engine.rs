use std::hint::black_box;

use casimir_bench::short_scenario;
use casimir_core::cavity::{coupling_matrix, solve_modes, CavityGeometry, DEFAULT_DF_STEP};
use casimir_core::dynamics::krylov::expv;
use casimir_core::dynamics::{Method, Propagator, Tolerances};
use casimir_core::scenario::{run, RunOptions};
use casimir_core::{product_ensemble, C64};
use criterion::{criterion_group, criterion_main, Criterion};

fn hamiltonian(c: &mut Criterion) {
    let s = short_scenario("fig5-scaled", 2);
    c.bench_function("build_hamiltonian four-mode", |b| b.iter(|| black_box(s.build_model().unwrap())));
}

fn ensemble(c: &mut Criterion) {
    let s = short_scenario("fig5-scaled", 2);
    c.bench_function("product_ensemble four-mode", |b| {
        b.iter(|| black_box(product_ensemble(&s.modes, s.engine.epsilon_tail).unwrap()))
    });
}

fn evolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolution");
    group.sample_size(10);
    let two = short_scenario("fig2-scaled", 100);
    group.bench_function("fig2-scaled eig, 100 points", |b| {
        b.iter(|| black_box(run(&two, &RunOptions::default()).unwrap()))
    });
    let four = short_scenario("fig5-scaled", 100);
    group.bench_function("fig5-scaled eig, 100 points", |b| {
        b.iter(|| black_box(run(&four, &RunOptions::default()).unwrap()))
    });
    group.finish();
}

fn krylov(c: &mut Criterion) {
    let s = short_scenario("fig2-scaled", 2);
    let model = s.build_model().unwrap();
    let csr = model.hamiltonian().to_csr();
    let dim = model.layout().total_dim();
    let v: Vec<C64> = (0..dim).map(|i| C64::new(((i % 7) as f64).sin(), 0.0)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<C64> = v.iter().map(|z| z / norm).collect();
    c.bench_function("expv full space, dt = 1", |b| b.iter(|| black_box(expv(&csr, &v, 1.0, 30, 1e-12).unwrap())));
    let prop = Propagator::new(&model, Method::Krylov, Tolerances::default()).unwrap();
    let psi = casimir_core::StateVector::basis(model.layout().clone(), &[1, 3, 2]).unwrap();
    let times = casimir_core::dynamics::uniform_times(20.0, 21);
    c.bench_function("krylov evolve_state, 21 points", |b| {
        b.iter(|| black_box(prop.evolve_state(&psi, &times).unwrap()))
    });
}

fn cavity(c: &mut Criterion) {
    let g = CavityGeometry::new(0.01, 50.0, 0.0, 0.4);
    c.bench_function("solve_modes 8", |b| b.iter(|| black_box(solve_modes(&g, 8).unwrap())));
    let modes = solve_modes(&g, 8).unwrap();
    c.bench_function("coupling_matrix 8", |b| {
        b.iter(|| black_box(coupling_matrix(&modes, &g, DEFAULT_DF_STEP).unwrap()))
    });
}

criterion_group!(benches, hamiltonian, ensemble, evolution, krylov, cavity);
criterion_main!(benches);
