use criterion::{black_box, criterion_group, criterion_main, Criterion};
use std::f64::consts::TAU;
use std::sync::Arc;
use synthesol_core::curvature::{check_condition, curvature_operator, SamplingDensity};
use synthesol_core::grassmann::{stable_unstable_split, SplitOptions};
use synthesol_core::oracle::{action_gradient, discrete_action, DiscretePath};
use synthesol_core::synthesis::{solve_shooting, ShootingOptions, Spline};
use synthesol_core::*;

fn pendulum() -> Flow {
    Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap()), 3.0)
}

fn sphere() -> Hamiltonian {
    let p = PotentialSpec { sphere: vec![(SphereBasis::Z, 1.0), (SphereBasis::Xy, 0.5)], ..PotentialSpec::default() };
    Hamiltonian::new(ManifoldSpec::sphere(), p).unwrap()
}

fn flow_kernels(c: &mut Criterion) {
    let flow = pendulum();
    let z = CotangentState::new([0.5, 0.0], [0.2, 0.0]);
    c.bench_function("integrate pendulum span 2", |b| b.iter(|| flow.integrate(black_box(&z), 0.0, 2.0).unwrap()));
    let traj = flow.integrate(&z, 0.0, 2.0).unwrap();
    c.bench_function("energy law residual", |b| b.iter(|| flow.energy_law_residual(black_box(&traj))));
}

fn curvature_kernels(c: &mut Criterion) {
    let ham = sphere();
    let z = CotangentState::new([1.0, 2.0], [0.3, -0.4]);
    c.bench_function("curvature operator on the sphere", |b| b.iter(|| curvature_operator(&ham, black_box(&z)).unwrap()));
    let pendulum = pendulum();
    c.bench_function("check condition pendulum", |b| {
        b.iter(|| check_condition(&pendulum.ham, black_box(3.0), SamplingDensity::default(), 1e-6))
    });
}

fn synthesis_kernels(c: &mut Criterion) {
    let flow = pendulum();
    let mut group = c.benchmark_group("synthesis");
    group.sample_size(20);
    group.bench_function("shooting at tau 8", |b| {
        b.iter(|| solve_shooting(&flow, black_box([1.0, 0.0]), ChartId::Main, 8.0, None, ShootingOptions::default()).unwrap())
    });
    group.bench_function("stable split at a locus point", |b| {
        let z = CotangentState::new([0.0, 0.0], [0.0, 0.0]);
        b.iter(|| stable_unstable_split(&flow, black_box(&z), SplitOptions::default()).unwrap())
    });
    group.finish();
    let values: Vec<f64> = (0..256).map(|k| (TAU * k as f64 / 256.0).sin()).collect();
    c.bench_function("periodic spline 256", |b| {
        b.iter(|| {
            let s = Spline::periodic(0.0, TAU / 256.0, black_box(values.clone()));
            s.eval(1.2345)
        })
    });
}

fn oracle_kernels(c: &mut Criterion) {
    let flow = pendulum();
    let mut path = DiscretePath::constant([0.3, 0.0], ChartId::Main, 10.0, 2000);
    for (k, p) in path.points.iter_mut().enumerate() {
        p[0] += 0.3 * (k as f64 / 2000.0 * 3.0).sin();
    }
    c.bench_function("discrete action 2000 knots", |b| b.iter(|| discrete_action(&flow, black_box(&path)).unwrap()));
    c.bench_function("action gradient 2000 knots", |b| b.iter(|| action_gradient(&flow, black_box(&path)).unwrap()));
}

criterion_group!(benches, flow_kernels, curvature_kernels, synthesis_kernels, oracle_kernels);
criterion_main!(benches);
