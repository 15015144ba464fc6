//! Benchmarks for the hot computational kernels: superoperator
//! exponentials and application, steady states, a full interval with
//! its thermodynamic ledger, Monte Carlo unraveling, and the discrete
//! engine's fixed-point iteration.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use repint_bench::{interval_scenario, poisson_spec};
use repint_core::effective_me::{poisson_generator, trajectory_sampler};
use repint_core::generators::{propagate, steady_state};
use repint_core::models::{mj_run, MandalJarzynskiSpec};
use repint_core::repeated_interaction::{run_interval, stroboscopic_fixed_point};

fn bench_superoperator(c: &mut Criterion) {
    let (spec, rho0) = poisson_spec();
    let l = poisson_generator(&spec).unwrap();
    c.bench_function("superoperator_exp_4d", |b| {
        b.iter(|| black_box(l.exp(black_box(0.5))))
    });
    let e = l.exp(0.05);
    c.bench_function("superoperator_apply_4d", |b| {
        b.iter(|| black_box(e.apply(black_box(&rho0))))
    });
    c.bench_function("propagate_4d", |b| {
        b.iter(|| black_box(propagate(&l, black_box(&rho0), 10.0).unwrap()))
    });
    c.bench_function("steady_state_4d", |b| {
        b.iter(|| black_box(steady_state(&l).unwrap()))
    });
}

fn bench_interval(c: &mut Criterion) {
    let (scenario, rho_s) = interval_scenario();
    c.bench_function("run_interval_qubit", |b| {
        b.iter(|| black_box(run_interval(black_box(&rho_s), &scenario).unwrap()))
    });
    c.bench_function("stroboscopic_fixed_point_qubit", |b| {
        b.iter(|| black_box(stroboscopic_fixed_point(&scenario, black_box(&rho_s)).unwrap()))
    });
}

fn bench_trajectories(c: &mut Criterion) {
    let (spec, rho0) = poisson_spec();
    c.bench_function("trajectory_sampler_100", |b| {
        b.iter(|| {
            black_box(trajectory_sampler(&spec, &rho0, 5.0, 11, 100, black_box(42)).unwrap())
        })
    });
}

fn bench_models(c: &mut Criterion) {
    let spec = MandalJarzynskiSpec {
        eps_bias: 0.5,
        delta_in: 0.8,
        tau: 10.0,
        beta: 1.0,
    };
    c.bench_function("mj_run", |b| {
        b.iter(|| black_box(mj_run(black_box(&spec)).unwrap()))
    });
}

criterion_group!(
    kernels,
    bench_superoperator,
    bench_interval,
    bench_trajectories,
    bench_models
);
criterion_main!(kernels);
