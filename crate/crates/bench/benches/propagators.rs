use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quasichaos::classical::pair_ensemble;
use quasichaos::quantum::{linear_schedule, otoc_series, Propagator, QuantumState};
use quasichaos::superop::{build_coefficients, initial_moments, integrate_moments};
use quasichaos_bench::{kicks, pairs, rotor};

fn propagator_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagator_step");
    for size in [1 << 10, 1 << 12, 1 << 14] {
        let spec = rotor(size);
        let mut prop = Propagator::new(&spec);
        let mut psi = QuantumState::basis(spec.lattice, spec.n0).unwrap().amplitudes;
        g.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, _| b.iter(|| prop.step(&mut psi, 0.3)));
    }
    g.finish();
}

fn otoc(c: &mut Criterion) {
    let spec = rotor(1024);
    let k = kicks(&spec, 200);
    let schedule = linear_schedule(200, 20);
    c.bench_function("otoc_series_1024x200", |b| b.iter(|| otoc_series(&spec, &k, &schedule).unwrap()));
}

fn moments(c: &mut Criterion) {
    let spec = rotor(1024);
    let coeff = build_coefficients(&spec, 16, 32).unwrap();
    let init = initial_moments(&coeff);
    let dt = 0.02 / coeff.max_abs_j();
    c.bench_function("integrate_moments_b16_w32", |b| {
        b.iter(|| integrate_moments(&coeff, &init, spec.eps_tilde, 200.0 * dt, dt, 10).unwrap())
    });
}

fn classical(c: &mut Criterion) {
    let cfg = pairs(200, 1000);
    c.bench_function("pair_ensemble_200x1000", |b| b.iter(|| pair_ensemble(&cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = propagator_step, otoc, moments, classical
}
criterion_main!(benches);
