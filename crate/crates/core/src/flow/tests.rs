use super::*;
use crate::geometry::{SphereBasis, TrigTerm};
use approx::assert_relative_eq;
use std::f64::consts::{FRAC_PI_2, PI};

fn pendulum(alpha: f64) -> Flow {
    let ham = Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap();
    Flow::new(Arc::new(ham), alpha)
}

fn torus_pot() -> PotentialSpec {
    PotentialSpec {
        trig: vec![
            TrigTerm { freq: [1, 0], cos_amp: 1.0, sin_amp: 0.0 },
            TrigTerm { freq: [0, 1], cos_amp: 1.0, sin_amp: 0.0 },
        ],
        ..Default::default()
    }
}

#[test]
fn hamiltonian_values() {
    let f = pendulum(3.0);
    assert_relative_eq!(f.energy(&CotangentState::new([0.0, 0.0], [0.0, 0.0])), 1.0);
    assert_relative_eq!(f.energy(&CotangentState::new([PI, 0.0], [0.0, 0.0])), -1.0);
    assert_relative_eq!(f.energy(&CotangentState::new([FRAC_PI_2, 0.0], [2.0, 0.0])), 2.0, epsilon = 1e-15);
    assert_relative_eq!(f.ham.u_max, 1.0, epsilon = 1e-14);
    assert_relative_eq!(f.ham.u_min, -1.0, epsilon = 1e-14);
}

#[test]
fn vector_field_examples() {
    let (dq, dxi) = pendulum(1.0).vector_field(&CotangentState::new([FRAC_PI_2, 0.0], [0.0, 0.0])).unwrap();
    assert_relative_eq!(dq[0], 0.0);
    assert_relative_eq!(dxi[0], 1.0, epsilon = 1e-15);
    let ham = Hamiltonian::new(ManifoldSpec::flat_torus(2), torus_pot()).unwrap();
    let f = Flow::new(Arc::new(ham), 2.0);
    let (dq, dxi) = f.vector_field(&CotangentState::new([FRAC_PI_2, PI], [1.0, 0.0])).unwrap();
    assert_eq!(dq, [1.0, 0.0]);
    assert_relative_eq!(dxi[0], 3.0, epsilon = 1e-15);
    assert_relative_eq!(dxi[1], 0.0, epsilon = 1e-15);
}

#[test]
fn pendulum_linearization_at_saddle() {
    let a = pendulum(3.0).linearization(&CotangentState::new([0.0, 0.0], [0.0, 0.0])).unwrap();
    assert_relative_eq!(a[(0, 0)], 0.0);
    assert_relative_eq!(a[(0, 1)], 1.0);
    assert_relative_eq!(a[(1, 0)], 1.0);
    assert_relative_eq!(a[(1, 1)], 3.0);
}

fn sphere_flow(alpha: f64) -> Flow {
    let pot = PotentialSpec { sphere: vec![(SphereBasis::Z, 0.3), (SphereBasis::Xy, 0.2)], ..Default::default() };
    let ham = Hamiltonian::new(ManifoldSpec::sphere(), pot).unwrap();
    Flow::new(Arc::new(ham), alpha)
}

#[test]
fn sphere_linearization_matches_differences() {
    let f = sphere_flow(1.3);
    let s = CotangentState::in_chart([1.0, 0.7], [0.4, -0.3], ChartId::Main);
    let a = f.linearization(&s).unwrap();
    let h = 1e-6;
    for k in 0..4 {
        let mut y = [0.0; 4];
        s.pack(2, &mut y);
        let mut yp = y;
        yp[k] += h;
        let mut ym = y;
        ym[k] -= h;
        let fp = f.field_unchecked(&CotangentState::unpack(2, &yp, ChartId::Main));
        let fm = f.field_unchecked(&CotangentState::unpack(2, &ym, ChartId::Main));
        for i in 0..4 {
            assert_relative_eq!((fp[i] - fm[i]) / (2.0 * h), a[(i, k)], epsilon = 1e-7);
        }
    }
}

#[test]
fn equilibrium_start_is_constant() {
    let tr = pendulum(3.0).integrate(&CotangentState::new([0.0, 0.0], [0.0, 0.0]), 0.0, 7.0).unwrap();
    assert!(tr.states.iter().all(|s| s.q[0] == 0.0 && s.xi[0] == 0.0));
    assert_eq!(pendulum(3.0).energy_law_residual(&tr), 0.0);
}

#[test]
fn unstable_focus_spirals_out() {
    let f = pendulum(1.0);
    let (tr, stop) = f.integrate_partial(&CotangentState::new([PI + 0.01, 0.0], [0.0, 0.0]), 0.0, 10.0).unwrap();
    let escaped = stop == StopReason::Blowup || tr.energies.iter().any(|h| *h > f.ham.u_max);
    assert!(escaped);
}

#[test]
fn conservative_flow_keeps_energy() {
    let f = pendulum(0.0);
    let tr = f.integrate(&CotangentState::new([FRAC_PI_2, 0.0], [0.0, 0.0]), 0.0, 20.0).unwrap();
    let h0 = tr.energies[0];
    assert!(tr.energies.iter().all(|h| (h - h0).abs() < 1e-8));
    let r = f.energy_law_residual(&tr);
    assert!(r < 1e-8, "{r}");
}

#[test]
fn energy_law_holds_on_pendulum() {
    let f = pendulum(3.0);
    let tr = f.integrate(&CotangentState::new([0.5, 0.0], [0.0, 0.0]), 0.0, 2.0).unwrap();
    let scale = tr.energies.iter().fold(1.0f64, |a, h| a.max(h.abs()));
    let r = f.energy_law_residual(&tr);
    assert!(r < 1e-8 * scale, "{r}");
    for w in tr.energies.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn backward_integration_retraces() {
    let f = pendulum(3.0);
    let z = CotangentState::new([0.5, 0.0], [0.2, 0.0]);
    let end = f.flow_to(&z, 1.5, true).unwrap();
    let back = f.flow_to(&end, -1.5, true).unwrap();
    assert_relative_eq!(back.q[0], z.q[0], epsilon = 1e-9);
    assert_relative_eq!(back.xi[0], z.xi[0], epsilon = 1e-9);
}

#[test]
fn conjugation_reverses_friction() {
    let f = pendulum(3.0);
    let g = pendulum(-3.0);
    let z = CotangentState::new([0.5, 0.0], [0.3, 0.0]);
    let a = dissipative_conjugate(&f.flow_to(&z, 2.0, true).unwrap());
    let b = g.flow_to(&dissipative_conjugate(&z), -2.0, true).unwrap();
    assert_relative_eq!(a.q[0], b.q[0], epsilon = 1e-9);
    assert_relative_eq!(a.xi[0], b.xi[0], epsilon = 1e-9);
    assert_eq!(dissipative_conjugate(&CotangentState::new([1.0, 0.0], [0.0, 0.0])).xi, [-0.0, -0.0]);
}

#[test]
fn escape_is_immediate_outside_ball() {
    let f = pendulum(3.0);
    let b = f.classify_boundedness(&CotangentState::new([0.3, 0.0], [5.0, 0.0]), 50.0).unwrap();
    assert_eq!(b, Boundedness::Escaped);
}

#[test]
fn rest_point_is_bounded_to_itself() {
    let f = pendulum(3.0);
    let b = f.classify_boundedness(&CotangentState::new([PI, 0.0], [0.0, 0.0]), 50.0).unwrap();
    match b {
        Boundedness::BoundedTo { q, .. } => assert_relative_eq!(q[0], PI, epsilon = 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stable_branch_is_captured_by_saddle() {
    // A point on the stable manifold of the saddle, obtained by flowing
    // backward from its linear approximation.
    let f = pendulum(3.0);
    let lam = (3.0 - 13f64.sqrt()) / 2.0;
    let z0 = CotangentState::new([1e-7, 0.0], [lam * 1e-7, 0.0]);
    let z = f.flow_to(&z0, -30.0, true).unwrap();
    let b = f.classify_boundedness(&z, 50.0).unwrap();
    match b {
        Boundedness::BoundedTo { q, .. } => assert!(q[0].abs() < 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sphere_flow_crosses_charts_consistently() {
    let f = sphere_flow(0.8);
    let z = CotangentState::in_chart([0.8, 0.3], [-0.9, 0.2], ChartId::Main);
    let tr = f.integrate(&z, 0.0, 3.0).unwrap();
    assert!(!tr.switches.is_empty());
    for w in tr.energies.windows(2) {
        assert!(w[1] >= w[0] - 1e-11);
    }
    let r = f.energy_law_residual(&tr);
    let scale = tr.energies.iter().fold(1.0f64, |a, h| a.max(h.abs()));
    assert!(r < 1e-8 * scale, "{r}");
}

#[test]
fn sphere_switch_jacobian_carries_variations() {
    let f = sphere_flow(0.5);
    let z = CotangentState::in_chart([0.75, 0.3], [-0.9, 0.2], ChartId::Main);
    let frame = DMatrix::<f64>::identity(4, 4);
    let out = f.run(&z, 0.0, 1.0, Some(&frame), &RunOptions::default(), |_, _, _| false).unwrap();
    assert!(!out.trajectory.switches.is_empty());
    let w = out.frame.unwrap();
    let h = 1e-6;
    for k in 0..4 {
        let mut y = [0.0; 4];
        z.pack(2, &mut y);
        y[k] += h;
        let zp = CotangentState::unpack(2, &y, ChartId::Main);
        y[k] -= 2.0 * h;
        let zm = CotangentState::unpack(2, &y, ChartId::Main);
        let a = f.manifold().state_in_chart(&f.flow_to(&zp, 1.0, true).unwrap(), out.end.chart);
        let b = f.manifold().state_in_chart(&f.flow_to(&zm, 1.0, true).unwrap(), out.end.chart);
        let mut ya = [0.0; 4];
        let mut yb = [0.0; 4];
        a.pack(2, &mut ya);
        b.pack(2, &mut yb);
        for i in 0..4 {
            assert_relative_eq!((ya[i] - yb[i]) / (2.0 * h), w[(i, k)], epsilon = 1e-5);
        }
    }
}
