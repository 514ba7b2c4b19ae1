use crate::error::{Error, Result};
use crate::flow::{Flow, RunOptions, StopReason};
use crate::geometry::{sphere, ChartId, CotangentState, M2, V2};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Solution of the finite-horizon transversality problem at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShootingResult {
    /// Initial covector whose trajectory reaches the zero section at the horizon.
    pub p_star: V2,
    /// Point of the zero section reached at the horizon.
    pub endpoint: V2,
    pub endpoint_chart: ChartId,
    /// Tangent slope `d psi / d q` of the section at the solution.
    pub slope: M2,
    pub newton_iters: usize,
    /// Mismatch between the target point and the start of the backward
    /// trajectory from the endpoint.
    pub final_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Largest Newton step in chart coordinates.
    pub max_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iters: 40, max_step: 0.5 }
    }
}

fn frame_cols(n: usize, top: bool) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(2 * n, n);
    let off = if top { 0 } else { n };
    for i in 0..n {
        f[(off + i, i)] = 1.0;
    }
    f
}

/// Runs the flow with variational columns and returns the end state and the
/// propagated frame, both expressed in `chart` when given.
fn run_with_frame(
    flow: &Flow,
    z: &CotangentState,
    t: f64,
    frame: &DMatrix<f64>,
    chart: Option<ChartId>,
) -> Result<(CotangentState, DMatrix<f64>)> {
    let out = flow.run(z, 0.0, t, Some(frame), &RunOptions { record: false, ..Default::default() }, |_, _, _| false)?;
    if out.stop == StopReason::Blowup {
        return Err(Error::Blowup {
            time: out.t_end,
            norm: flow.manifold().co_norm_sq(out.end.q, out.end.xi).sqrt(),
        });
    }
    let mut end = out.end;
    let mut w = out.frame.expect("frame requested");
    if let Some(c) = chart {
        if end.chart != c && !flow.manifold().is_flat() {
            let (s2, jac) = sphere::switch_state(&end);
            let n2 = w.nrows();
            w = DMatrix::from_fn(n2, n2, |i, j| jac[i][j]) * w;
            end = s2;
        }
    }
    Ok((end, w))
}

/// The covector `xi(tau)` of the trajectory from `(q, p)`, in the chart where
/// the trajectory ends.
pub fn transversality_residual(flow: &Flow, q: V2, chart: ChartId, p: V2, tau: f64) -> Result<CotangentState> {
    let z = CotangentState::in_chart(q, p, chart);
    let out = flow.run(&z, 0.0, tau, None, &RunOptions { record: false, ..Default::default() }, |_, _, _| false)?;
    if out.stop == StopReason::Blowup {
        return Err(Error::Blowup {
            time: out.t_end,
            norm: flow.manifold().co_norm_sq(out.end.q, out.end.xi).sqrt(),
        });
    }
    Ok(out.end)
}

/// `xi(tau)` together with its Jacobian with respect to `p`.
pub fn transversality_jacobian(
    flow: &Flow,
    q: V2,
    chart: ChartId,
    p: V2,
    tau: f64,
) -> Result<(CotangentState, DMatrix<f64>)> {
    let n = flow.dim();
    let z = CotangentState::in_chart(q, p, chart);
    let (end, w) = run_with_frame(flow, &z, tau, &frame_cols(n, false), None)?;
    Ok((end, w.rows(n, n).into_owned()))
}

/// Start of the backward trajectory of length `tau` from the zero-section
/// point `(q_end, 0)`, in `chart`, and the Jacobian of the start state with
/// respect to `q_end`.
fn pull_back(
    flow: &Flow,
    q_end: V2,
    end_chart: ChartId,
    tau: f64,
    chart: ChartId,
) -> Result<(CotangentState, DMatrix<f64>)> {
    let n = flow.dim();
    let z = CotangentState::zero_section(q_end, end_chart);
    run_with_frame(flow, &z, -tau, &frame_cols(n, true), Some(chart))
}

fn norm(m: &crate::geometry::ManifoldSpec, v: V2) -> f64 {
    (0..m.dim).map(|i| v[i] * v[i]).sum::<f64>().sqrt()
}

/// Solves the transversality problem at `q` for horizon `tau` by Newton
/// iteration on the zero-section endpoint, starting from `guess` (or `q`).
pub fn solve_shooting(
    flow: &Flow,
    q: V2,
    chart: ChartId,
    tau: f64,
    guess: Option<(V2, ChartId)>,
    opts: ShootingOptions,
) -> Result<ShootingResult> {
    let m = flow.manifold();
    let n = m.dim;
    m.check_domain(q, chart)?;
    let (mut qe, mut ce) = guess.unwrap_or((q, chart));
    (qe, ce) = m.normalize_point(qe, ce);
    let (mut start, mut jac) = pull_back(flow, qe, ce, tau, chart)?;
    let mut r = m.displacement(start.q, q);
    let mut rn = norm(m, r);
    let mut iters = 0;
    while rn > opts.tol {
        if iters >= opts.max_iters {
            return Err(Error::NewtonDivergence { q, residual: rn });
        }
        iters += 1;
        // The Jacobian is expressed in the endpoint chart; so is the step.
        let dq = jac.rows(0, n).into_owned();
        let rhs = DVector::from_iterator(n, r[..n].iter().copied());
        let step = dq.clone().lu().solve(&rhs).or_else(|| {
            let svd = dq.clone().svd(true, true);
            svd.solve(&rhs, 1e-14).ok()
        });
        let Some(mut step) = step else {
            return Err(Error::NewtonDivergence { q, residual: rn });
        };
        let len = step.norm();
        if len > opts.max_step {
            step *= opts.max_step / len;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-3 {
            let mut trial = qe;
            for i in 0..n {
                trial[i] += lambda * step[i];
            }
            let (tq, tc) = m.normalize_point(trial, ce);
            if let Ok((s, j)) = pull_back(flow, tq, tc, tau, chart) {
                let rt = m.displacement(s.q, q);
                let rtn = norm(m, rt);
                if rtn < rn {
                    (qe, ce, start, jac, r, rn) = (tq, tc, s, j, rt, rtn);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            if rn < 10.0 * opts.tol {
                break;
            }
            return Err(Error::NewtonDivergence { q, residual: rn });
        }
    }
    // Slide along the computed section from its base point to `q`.
    let dq = jac.rows(0, n).into_owned();
    let dxi = jac.rows(n, n).into_owned();
    let slope_m = dq.try_inverse().map(|inv| dxi * inv).ok_or(Error::Degenerate(q))?;
    let mut p_star = start.xi;
    let mut slope = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            p_star[i] += slope_m[(i, j)] * r[j];
            slope[i][j] = slope_m[(i, j)];
        }
    }
    Ok(ShootingResult {
        p_star,
        slope,
        endpoint: qe,
        endpoint_chart: ce,
        newton_iters: iters,
        final_residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Hamiltonian;
    use crate::geometry::{ManifoldSpec, PotentialSpec, SphereBasis};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn pendulum(alpha: f64) -> Flow {
        Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap()), alpha)
    }

    #[test]
    fn equilibrium_stays_on_zero_section() {
        let f = pendulum(3.0);
        for q in [0.0, PI] {
            for tau in [1.0, 8.0] {
                let end = transversality_residual(&f, [q, 0.0], ChartId::Main, [0.0, 0.0], tau).unwrap();
                assert_eq!(end.xi[0], 0.0);
                let r = solve_shooting(&f, [q, 0.0], ChartId::Main, tau, None, ShootingOptions::default()).unwrap();
                assert_eq!(r.p_star[0], 0.0);
                assert_eq!(r.newton_iters, 0);
            }
        }
    }

    #[test]
    fn free_fall_violates_transversality() {
        let end = transversality_residual(&pendulum(3.0), [0.3, 0.0], ChartId::Main, [0.0, 0.0], 1.0).unwrap();
        assert!(end.xi[0].abs() > 1e-2);
    }

    #[test]
    fn residual_jacobian_matches_differences() {
        let f = pendulum(3.0);
        let (q, p, tau) = ([0.3, 0.0], [0.2, 0.0], 1.0);
        let (_, jac) = transversality_jacobian(&f, q, ChartId::Main, p, tau).unwrap();
        let h = 1e-6;
        let xi = |dp: f64| transversality_residual(&f, q, ChartId::Main, [p[0] + dp, 0.0], tau).unwrap().xi[0];
        let fd = (xi(h) - xi(-h)) / (2.0 * h);
        assert_relative_eq!(jac[(0, 0)], fd, max_relative = 1e-6);
    }

    #[test]
    fn shooting_saturates_with_horizon() {
        let f = pendulum(3.0);
        let opts = ShootingOptions::default();
        let r8 = solve_shooting(&f, [0.3, 0.0], ChartId::Main, 8.0, None, opts).unwrap();
        let r16 = solve_shooting(&f, [0.3, 0.0], ChartId::Main, 16.0, None, opts).unwrap();
        assert!(r8.final_residual < 1e-10 && r16.final_residual < 1e-10);
        assert!((r8.p_star[0] - r16.p_star[0]).abs() < 1e-6);
        // Forward integration amplifies errors like e^{3.3 t}; check a short horizon.
        let r4 = solve_shooting(&f, [0.3, 0.0], ChartId::Main, 4.0, None, opts).unwrap();
        let end = transversality_residual(&f, [0.3, 0.0], ChartId::Main, r4.p_star, 4.0).unwrap();
        assert!(end.xi[0].abs() < 1e-6);
        assert!(f.manifold().displacement(end.q, r4.endpoint)[0].abs() < 1e-6);
    }

    #[test]
    fn shooting_near_the_node() {
        let f = pendulum(3.0);
        let r = solve_shooting(&f, [PI - 0.01, 0.0], ChartId::Main, 16.0, Some(([PI, 0.0], ChartId::Main)), ShootingOptions::default())
            .unwrap();
        assert!(r.final_residual < 1e-10);
        // Moving away from the node toward the saddle at 0 means decreasing theta.
        assert!(r.p_star[0] < 0.0);
    }

    #[test]
    fn shooting_on_the_sphere() {
        let pot = PotentialSpec { sphere: vec![(SphereBasis::Z, 0.3)], ..Default::default() };
        let f = Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::sphere(), pot).unwrap()), 3.0);
        let r = solve_shooting(&f, [1.2, 0.4], ChartId::Main, 4.0, None, ShootingOptions::default()).unwrap();
        assert!(r.final_residual < 1e-10);
        let end = transversality_residual(&f, [1.2, 0.4], ChartId::Main, r.p_star, 4.0).unwrap();
        assert!(f.manifold().co_norm_sq(end.q, end.xi).sqrt() < 1e-5);
    }
}
