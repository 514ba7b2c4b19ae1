use super::*;
use crate::flow::Hamiltonian;
use crate::geometry::{ManifoldSpec, PotentialSpec, TrigTerm};
use approx::assert_relative_eq;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

fn pendulum(alpha: f64) -> Flow {
    Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap()), alpha)
}

fn converged_pendulum() -> &'static SynthesisField {
    static FIELD: OnceLock<SynthesisField> = OnceLock::new();
    FIELD.get_or_init(|| converge_horizon(&pendulum(3.0), &SynthesisOptions::default()).unwrap())
}

fn node_at(field: &SynthesisField, q: f64) -> usize {
    field.grid.nearest([q, 0.0], ChartId::Main)
}

#[test]
fn pendulum_converges_by_sixteen() {
    let f = converged_pendulum();
    assert!(f.converged && f.guaranteed && !f.is_partial());
    assert!(f.tau_final <= 16.0, "{:?}", f.history);
    assert!(f.history.last().unwrap().sup_change < 1e-6);
    let r = f.residuals;
    assert!(r.exactness < 1e-5, "{r:?}");
    assert!(r.invariance < 1e-5, "{r:?}");
    assert!(r.hj_spread < 1e-5, "{r:?}");
    assert!(f.multi_basin.is_empty());
}

#[test]
fn horizon_changes_shrink_geometrically() {
    let f = converged_pendulum();
    let changes: Vec<f64> = f.history.iter().skip(1).map(|h| h.sup_change).collect();
    assert!(changes.len() >= 2);
    for w in changes.windows(2) {
        assert!(w[1] < 0.1 * w[0], "{changes:?}");
    }
}

#[test]
fn value_at_equilibria() {
    let f = converged_pendulum();
    let (i0, ipi) = (node_at(f, 0.0), node_at(f, PI));
    assert_eq!(f.grid.nodes[ipi].q[0], PI);
    assert_relative_eq!(f.u[i0], 1.0 / 3.0, epsilon = 1e-6);
    assert_relative_eq!(f.u[ipi], -1.0 / 3.0, epsilon = 1e-6);
    assert!(f.psi[i0][0].abs() < 1e-12 && f.psi[ipi][0].abs() < 1e-12);
}

#[test]
fn feedback_points_toward_the_saddle() {
    let f = converged_pendulum();
    for (node, v) in f.grid.nodes.iter().zip(&f.v) {
        let s = node.q[0].sin();
        if s.abs() > 1e-9 {
            assert_eq!(v[0].signum(), -s.signum(), "q = {}", node.q[0]);
        } else {
            assert!(v[0].abs() < 1e-12);
        }
    }
    // Following the feedback from any node other than the node at pi ends at 0.
    let interp = Interpolant::new(&f.grid, &f.v.iter().map(|v| v[0]).collect::<Vec<_>>());
    let rhs = |q: f64| interp.eval(0, [q, 0.0]).0;
    for start in [0.5, 2.0, PI - 0.05, PI + 0.05, 5.0] {
        let mut q: f64 = start;
        let h = 0.05;
        for _ in 0..4000 {
            let k1 = rhs(q);
            let k2 = rhs(q + 0.5 * h * k1);
            let k3 = rhs(q + 0.5 * h * k2);
            let k4 = rhs(q + h * k3);
            q += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        let d = (q.rem_euclid(TAU) + PI).rem_euclid(TAU) - PI;
        assert!(d.abs() < 1e-3, "{start} -> {q}");
    }
}

#[test]
fn single_horizon_field_vanishes_at_equilibria() {
    let opts = SynthesisOptions { density: 128, ..Default::default() };
    let f = build_field(&pendulum(3.0), 12.0, &opts).unwrap();
    assert!(!f.is_partial());
    assert!(f.psi[node_at(&f, 0.0)][0].abs() < 1e-12);
    assert!(f.psi[node_at(&f, PI)][0].abs() < 1e-12);
    // Refinement: the coarse section interpolated at the fine nodes.
    let fine = build_field(&pendulum(3.0), 12.0, &SynthesisOptions { density: 256, ..Default::default() }).unwrap();
    let interp = Interpolant::new(&f.grid, &f.psi_component(0));
    let worst = fine
        .grid
        .nodes
        .iter()
        .zip(&fine.psi)
        .map(|(n, p)| (interp.eval(0, n.q).0 - p[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn graph_is_tangent_to_the_stable_subspace() {
    let f = converged_pendulum();
    let ids = sample_nodes(f, 8);
    let defect = tangency_defect(&pendulum(3.0), f, &ids).unwrap();
    assert!(defect < 1e-4, "{defect}");
}

#[test]
fn perturbed_section_is_not_invariant() {
    let flow = pendulum(3.0);
    let mut f = converged_pendulum().clone();
    for p in &mut f.psi {
        p[0] += 0.01;
    }
    let ids = sample_nodes(&f, 8);
    let short = invariance_residual(&flow, &f, &ids, 0.5);
    let long = invariance_residual(&flow, &f, &ids, 2.0);
    assert!(short > 1e-2 && long > short, "{short} {long}");
}

#[test]
fn equilibrium_samples_are_invariant() {
    let f = converged_pendulum();
    let ids = [node_at(f, 0.0), node_at(f, PI)];
    assert!(invariance_residual(&pendulum(3.0), f, &ids, 5.0) < 1e-12);
}

#[test]
fn zero_potential_gives_zero_field() {
    let ham = Hamiltonian::new(ManifoldSpec::flat_torus(2), PotentialSpec::zero()).unwrap();
    let flow = Flow::new(Arc::new(ham), 1.0);
    let opts = SynthesisOptions { density: 16, ..Default::default() };
    let f = converge_horizon(&flow, &opts).unwrap();
    assert_eq!(f.history.len(), 2);
    assert_eq!(f.history[1].sup_change, 0.0);
    assert!(f.psi.iter().chain(&f.v).all(|p| p == &[0.0, 0.0]));
    assert!(f.u.iter().all(|u| *u == 0.0));
}

#[test]
fn exactness_detects_harmonic_forms() {
    let torus = Grid::new(&ManifoldSpec::flat_torus(2), 32).unwrap();
    let exact: Vec<V2> = torus.nodes.iter().map(|n| [n.q[0].cos(), 0.0]).collect();
    assert!(exactness_residual(&torus, &exact) < 1e-8);
    let circle = Grid::new(&ManifoldSpec::circle(), 64).unwrap();
    let constant = vec![[0.2, 0.0]; circle.len()];
    assert_relative_eq!(exactness_residual(&circle, &constant), 0.2 * TAU, epsilon = 1e-12);
    let curl: Vec<V2> = torus.nodes.iter().map(|n| [0.0, n.q[0].sin()]).collect();
    assert!(exactness_residual(&torus, &curl) > 0.5);
}

#[test]
fn path_integration_recovers_a_potential() {
    let torus = Grid::new(&ManifoldSpec::flat_torus(2), 128).unwrap();
    let f = |q: V2| q[0].sin() * q[1].cos() + (2.0 * q[1]).sin();
    let grad: Vec<V2> = torus
        .nodes
        .iter()
        .map(|n| [n.q[0].cos() * n.q[1].cos(), -n.q[0].sin() * n.q[1].sin() + 2.0 * (2.0 * n.q[1]).cos()])
        .collect();
    let u = path_integrated_value(&torus, &grad, 0, f([0.0, 0.0]));
    for (n, v) in torus.nodes.iter().zip(&u) {
        assert_relative_eq!(*v, f(n.q), epsilon = 1e-6);
    }
    let sphere = Grid::new(&ManifoldSpec::sphere(), 64).unwrap();
    let height = |q: V2, c: ChartId| crate::geometry::sphere::embed(q, c)[1];
    let grad: Vec<V2> = sphere
        .nodes
        .iter()
        .map(|n| {
            let jet = crate::geometry::sphere::embedding_jet(n.q, n.chart);
            [jet.d[0][1], jet.d[1][1]]
        })
        .collect();
    let base = sphere.node_id(0, [sphere.patches[0].axes[0].count / 2, 0]);
    let u = path_integrated_value(&sphere, &grad, base, height(sphere.nodes[base].q, ChartId::Main));
    for (_, (n, v)) in sphere.nodes.iter().zip(&u).enumerate().filter(|(i, _)| sphere.in_band(*i)) {
        assert_relative_eq!(*v, height(n.q, n.chart), epsilon = 1e-5);
    }
}

#[test]
fn torus_synthesis_is_separable() {
    let pot = PotentialSpec {
        trig: vec![
            TrigTerm { freq: [1, 0], cos_amp: 1.0, sin_amp: 0.0 },
            TrigTerm { freq: [0, 1], cos_amp: 1.0, sin_amp: 0.0 },
        ],
        ..Default::default()
    };
    let flow = Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::flat_torus(2), pot).unwrap()), 3.0);
    let f = converge_horizon(&flow, &SynthesisOptions { density: 32, invariance_samples: 16, ..Default::default() }).unwrap();
    assert!(f.residuals.exactness < 1e-5, "{:?}", f.residuals);
    let line = converged_pendulum();
    for (n, p) in f.grid.nodes.iter().zip(&f.psi).step_by(37) {
        for k in 0..2 {
            let i = line.grid.nearest([n.q[k], 0.0], ChartId::Main);
            assert_relative_eq!(line.grid.nodes[i].q[0], n.q[k], epsilon = 1e-12);
            assert_relative_eq!(p[k], line.psi[i][0], epsilon = 1e-7);
        }
    }
}

#[test]
fn weak_discount_is_flagged() {
    let opts = SynthesisOptions { density: 64, ..Default::default() };
    let f = run_horizon_schedule(&pendulum(1.0), &opts).unwrap();
    assert!(!f.guaranteed);
    assert!(!f.converged || !f.multi_basin.is_empty(), "{:?}", f.history);
}
