//! Direct minimization of the discretized finite-horizon discounted action
//! with a free right endpoint, compared against the synthesis.

use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::geometry::{sphere, ChartId, CotangentState, ManifoldKind, V2};
use crate::synthesis::{solve_shooting, Interpolant, ShootingOptions, SynthesisField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Knot positions on the uniform grid `k * dt`, all in one chart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscretePath {
    pub dt: f64,
    pub chart: ChartId,
    pub points: Vec<V2>,
}

impl DiscretePath {
    /// The path resting at `q` for time `tau` with `intervals` steps.
    pub fn constant(q: V2, chart: ChartId, tau: f64, intervals: usize) -> Self {
        Self { dt: tau / intervals as f64, chart, points: vec![q; intervals + 1] }
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn tau(&self) -> f64 {
        self.dt * self.intervals() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points.len()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Midpoint-rule discrete action of `path`.
pub fn discrete_action(flow: &Flow, path: &DiscretePath) -> Result<f64> {
    evaluate(flow, path, false).map(|(a, _)| a)
}

/// Action and its gradient with respect to every knot (the first entry is
/// the gradient with respect to the fixed start and is not used).
fn evaluate(flow: &Flow, path: &DiscretePath, with_grad: bool) -> Result<(f64, Vec<V2>)> {
    let ham = &flow.ham;
    let m = &ham.manifold;
    let n = m.dim;
    let dt = path.dt;
    let mut grad = if with_grad { vec![[0.0; 2]; path.points.len()] } else { Vec::new() };
    let mut action = 0.0;
    for k in 0..path.intervals() {
        let a = path.points[k];
        let d = m.displacement(a, path.points[k + 1]);
        let mut mid = a;
        for i in 0..n {
            mid[i] += 0.5 * d[i];
        }
        let jet = m.metric_jet(mid, path.chart)?;
        let pot = ham.potential.jet(m, mid, path.chart);
        let w = (-flow.alpha * (k as f64 + 0.5) * dt).exp();
        let mut kinetic = 0.0;
        for i in 0..n {
            for j in 0..n {
                kinetic += jet.g[i][j] * d[i] * d[j];
            }
        }
        action += w * (0.5 * kinetic / dt - pot.value * dt);
        if with_grad {
            for i in 0..n {
                let g_d: f64 = (0..n).map(|j| jet.g[i][j] * d[j]).sum();
                let mut dg_dd = 0.0;
                for j in 0..n {
                    for l in 0..n {
                        dg_dd += jet.dg[i][j][l] * d[j] * d[l];
                    }
                }
                let shared = w * (0.25 * dg_dd / dt - 0.5 * pot.grad[i] * dt);
                grad[k][i] += shared - w * g_d / dt;
                grad[k + 1][i] += shared + w * g_d / dt;
            }
        }
    }
    Ok((action, grad))
}

/// Gradient of [`discrete_action`] with respect to the knots after the start.
pub fn action_gradient(flow: &Flow, path: &DiscretePath) -> Result<Vec<V2>> {
    let (_, mut g) = evaluate(flow, path, true)?;
    g.remove(0);
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Random perturbed starts in addition to the constant path.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the sup-norm of the accepted knot update.
    pub step_tol: f64,
    /// Amplitude of the random start perturbations.
    pub perturbation: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { restarts: 2, seed: 7, max_iters: 5000, step_tol: 1e-11, perturbation: 0.5 }
    }
}

/// Where a descent run started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Constant,
    Supplied,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub path: DiscretePath,
    pub action: f64,
    pub iterations: usize,
    pub start: StartKind,
    /// Final action of every start, in the order tried.
    pub start_actions: Vec<f64>,
}

/// Solves `P x = r` for the symmetric tridiagonal `P` given by its diagonal
/// and off-diagonal.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = off[i] / m;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Descent direction `-P^{-1} grad` where `P` is the discounted kinetic
/// operator of the free knots, weighted by the metric, plus a discounted mass.
fn preconditioned_direction(flow: &Flow, path: &DiscretePath, grad: &[V2]) -> Vec<V2> {
    let m = &flow.ham.manifold;
    let dt = path.dt;
    let intervals = path.intervals();
    let mut dir = vec![[0.0; 2]; intervals];
    for c in 0..m.dim {
        // Interval k joins knots k and k+1; unknowns are knots 1..=intervals.
        let stiff: Vec<f64> = (0..intervals)
            .map(|k| {
                let d = m.displacement(path.points[k], path.points[k + 1]);
                let mut mid = path.points[k];
                mid[0] += 0.5 * d[0];
                mid[1] += 0.5 * d[1];
                let w = (-flow.alpha * (k as f64 + 0.5) * dt).exp();
                w * m.metric(mid)[c][c] / dt
            })
            .collect();
        let mass = |k: usize| stiff[k] * dt * dt;
        let mut diag = vec![0.0; intervals];
        let mut off = vec![0.0; intervals.saturating_sub(1)];
        for j in 0..intervals {
            diag[j] = stiff[j] + 0.5 * mass(j);
            if j + 1 < intervals {
                diag[j] += stiff[j + 1] + 0.5 * mass(j + 1);
                off[j] = -stiff[j + 1];
            }
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g[c]).collect();
        for (j, x) in solve_tridiagonal(&diag, &off, &rhs).into_iter().enumerate() {
            dir[j][c] = x;
        }
    }
    dir
}

fn shifted(path: &DiscretePath, dir: &[V2], s: f64) -> DiscretePath {
    let mut out = path.clone();
    for (p, d) in out.points.iter_mut().skip(1).zip(dir) {
        p[0] += s * d[0];
        p[1] += s * d[1];
    }
    out
}

/// Preconditioned steepest descent with Armijo backtracking from one start.
fn descend(flow: &Flow, start: DiscretePath, opts: &OracleOptions) -> Result<(DiscretePath, f64, usize)> {
    let mut path = start;
    let (mut action, mut grad) = evaluate(flow, &path, true)?;
    for iter in 0..opts.max_iters {
        let dir = preconditioned_direction(flow, &path, &grad[1..]);
        let slope: f64 = grad[1..].iter().zip(&dir).map(|(g, d)| g[0] * d[0] + g[1] * d[1]).sum();
        let sup = dir.iter().map(|d| d[0].abs().max(d[1].abs())).fold(0.0, f64::max);
        if sup < opts.step_tol || slope >= 0.0 {
            return Ok((path, action, iter));
        }
        let mut s = 1.0;
        let mut accepted = None;
        while s > 1e-12 {
            let trial = shifted(&path, &dir, s);
            if let Ok((a, g)) = evaluate(flow, &trial, true) {
                // Below rounding of the action the predicted decrease cannot be
                // observed; accept any non-increase there.
                let floor = 1e-15 * action.abs().max(1.0);
                if a <= action + 1e-4 * s * slope || (-slope * s < floor && a <= action + floor) {
                    accepted = Some((trial, a, g));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((trial, a, g)) = accepted else {
            return Err(Error::Convergence(format!("line search failed after {iter} iterations")));
        };
        if s * sup < opts.step_tol {
            return Ok((trial, a, iter + 1));
        }
        (path, action, grad) = (trial, a, g);
    }
    Err(Error::Convergence(format!("descent did not settle in {} iterations", opts.max_iters)))
}

/// Minimizes the discrete action over paths from `q` with free endpoint,
/// starting from the constant path, the `supplied` paths and random smooth
/// perturbations of the constant path; returns the best run.
pub fn minimize_free_endpoint(
    flow: &Flow,
    q: V2,
    chart: ChartId,
    tau: f64,
    intervals: usize,
    supplied: &[DiscretePath],
    opts: &OracleOptions,
) -> Result<OracleResult> {
    if intervals < 100 {
        return Err(Error::InvalidSpec(format!("{intervals} knots is below the minimum of 100")));
    }
    flow.manifold().check_domain(q, chart)?;
    let constant = DiscretePath::constant(q, chart, tau, intervals);
    let mut starts = vec![(StartKind::Constant, constant.clone())];
    for p in supplied {
        starts.push((StartKind::Supplied, p.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = flow.dim();
    for _ in 0..opts.restarts {
        let coeffs: Vec<[f64; 3]> =
            (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let mut p = constant.clone();
        for (k, x) in p.points.iter_mut().enumerate() {
            let s = k as f64 / intervals as f64;
            for (i, c) in coeffs.iter().enumerate() {
                let bump: f64 = (0..3).map(|m| c[m] * ((m as f64 + 0.5) * std::f64::consts::PI * s).sin()).sum();
                x[i] += opts.perturbation * bump / 3.0;
            }
        }
        starts.push((StartKind::Random, p));
    }
    let mut best: Option<OracleResult> = None;
    let mut start_actions = Vec::new();
    let mut last_err = None;
    for (kind, start) in starts {
        match descend(flow, start, opts) {
            Ok((path, action, iterations)) => {
                start_actions.push(action);
                if best.as_ref().map_or(true, |b| action < b.action) {
                    best = Some(OracleResult { path, action, iterations, start: kind, start_actions: Vec::new() });
                }
            }
            Err(e) => {
                start_actions.push(f64::NAN);
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(mut b) => {
            b.start_actions = start_actions;
            Ok(b)
        }
        None => Err(last_err.unwrap_or_else(|| Error::Convergence("no start converged".into()))),
    }
}

/// Covector field of a synthesis evaluated through its interpolants, with
/// the result expressed in the chart of the query.
struct Feedback<'a> {
    flow: &'a Flow,
    field: &'a SynthesisField,
    interps: Vec<Interpolant>,
}

impl<'a> Feedback<'a> {
    fn new(flow: &'a Flow, field: &'a SynthesisField) -> Self {
        let interps = (0..flow.dim()).map(|k| Interpolant::new(&field.grid, &field.psi_component(k))).collect();
        Self { flow, field, interps }
    }

    fn velocity(&self, q: V2, chart: ChartId) -> V2 {
        let m = self.flow.manifold();
        let grid = &self.field.grid;
        let (patch, qp) = grid.locate(q, chart);
        let mut psi = [0.0; 2];
        for (k, it) in self.interps.iter().enumerate() {
            psi[k] = it.eval(patch, qp).0;
        }
        let v = m.raise(qp, psi);
        let pc = grid.patches[patch].chart;
        if m.kind != ManifoldKind::Sphere || pc == chart {
            return v;
        }
        // Push the velocity through the embedding into the query chart.
        let src = sphere::embedding_jet(qp, pc);
        let dst = sphere::embedding_jet(q, chart);
        let amb: Vec<f64> = (0..3).map(|a| src.d[0][a] * v[0] + src.d[1][a] * v[1]).collect();
        let dot = |x: &[f64; 3], y: &[f64]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        let g = m.metric(q);
        [dot(&dst.d[0], &amb) / g[0][0], dot(&dst.d[1], &amb) / g[1][1]]
    }
}

/// Trajectory of `q' = V(q)` from `q`, sampled at the knots of a uniform grid
/// on `[0, tau]` (classical Runge-Kutta with `substeps` steps per interval).
pub fn feedback_path(
    flow: &Flow,
    field: &SynthesisField,
    q: V2,
    chart: ChartId,
    tau: f64,
    intervals: usize,
    substeps: usize,
) -> DiscretePath {
    let fb = Feedback::new(flow, field);
    let m = flow.manifold();
    let n = m.dim;
    let mut path = DiscretePath::constant(q, chart, tau, intervals);
    let h = path.dt / substeps as f64;
    let add = |x: V2, k: V2, s: f64| {
        let mut y = x;
        for i in 0..n {
            y[i] += s * k[i];
        }
        y
    };
    let mut x = q;
    for k in 1..=intervals {
        for _ in 0..substeps {
            let k1 = fb.velocity(x, chart);
            let k2 = fb.velocity(add(x, k1, 0.5 * h), chart);
            let k3 = fb.velocity(add(x, k2, 0.5 * h), chart);
            let k4 = fb.velocity(add(x, k3, h), chart);
            for i in 0..n {
                x[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
            }
        }
        path.points[k] = x;
    }
    path
}

/// The finite-horizon extremal from `q`: the trajectory through the section
/// for horizon `tau`, sampled at the knots. It is computed backward from its
/// zero-section endpoint, which is stable.
pub fn extremal_path(
    flow: &Flow,
    q: V2,
    chart: ChartId,
    tau: f64,
    intervals: usize,
    guesses: &[(V2, ChartId)],
) -> Result<DiscretePath> {
    let opts = ShootingOptions::default();
    let mut tries: Vec<Option<(V2, ChartId)>> = guesses.iter().copied().map(Some).collect();
    tries.extend(flow.ham.critical.iter().map(|c| Some((c.q, c.chart))));
    tries.push(None);
    let mut last = None;
    let mut shot = None;
    for g in tries {
        match solve_shooting(flow, q, chart, tau, g, opts) {
            Ok(r) => {
                shot = Some(r);
                break;
            }
            Err(e) => last = Some(e),
        }
    }
    let shot = shot.ok_or_else(|| last.unwrap_or_else(|| Error::Convergence("no shooting guess".into())))?;
    let end = CotangentState::zero_section(shot.endpoint, shot.endpoint_chart);
    let traj = flow.integrate(&end, 0.0, -tau)?;
    let m = flow.manifold();
    let mut path = DiscretePath::constant(q, chart, tau, intervals);
    for k in 1..=intervals {
        let s = traj.state_at(k as f64 * path.dt - tau);
        path.points[k] = m.state_in_chart(&s, chart).q;
    }
    Ok(path)
}

/// Oracle against synthesis at one query point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub q: V2,
    pub chart: ChartId,
    pub oracle_action: f64,
    pub synthesis_action: f64,
    pub delta_value: f64,
    /// Sup distance between the oracle path and the finite-horizon extremal.
    pub delta_traj_sup: f64,
    /// Sup distance between the oracle path and the feedback trajectory.
    pub delta_feedback_sup: f64,
    pub knots: usize,
    pub tau: f64,
    /// How far below the synthesis action the oracle went (positive when it did).
    pub oracle_gain: f64,
    /// Change of the synthesis path action when the step is halved.
    pub quadrature_tol: f64,
    /// Bound on the discounted action beyond `tau`.
    pub tail_bound: f64,
    pub oracle_start: StartKind,
}

/// Runs the oracle from `q` with the synthesis trajectory among its starts
/// and compares actions and paths.
pub fn compare_with_synthesis(
    flow: &Flow,
    field: &SynthesisField,
    q: V2,
    chart: ChartId,
    tau: f64,
    intervals: usize,
    opts: &OracleOptions,
) -> Result<ComparisonReport> {
    let synth = feedback_path(flow, field, q, chart, tau, intervals, 4);
    let fine = feedback_path(flow, field, q, chart, tau, 2 * intervals, 4);
    let synthesis_action = discrete_action(flow, &synth)?;
    let quadrature_tol = (discrete_action(flow, &fine)? - synthesis_action).abs();
    let node = field.grid.nearest(q, chart);
    let extremal = extremal_path(flow, q, chart, tau, intervals, &[field.endpoints[node]])?;
    let oracle = minimize_free_endpoint(flow, q, chart, tau, intervals, &[synth.clone(), extremal.clone()], opts)?;
    let m = flow.manifold();
    let sup = |other: &DiscretePath| {
        oracle.path.points.iter().zip(&other.points).map(|(a, b)| m.distance(*a, chart, *b, chart)).fold(0.0, f64::max)
    };
    let (delta_traj_sup, delta_feedback_sup) = (sup(&extremal), sup(&synth));
    let ham = &flow.ham;
    let scale = ham.u_max.abs().max(ham.u_min.abs());
    Ok(ComparisonReport {
        q,
        chart,
        oracle_action: oracle.action,
        synthesis_action,
        delta_value: (oracle.action - synthesis_action).abs(),
        delta_traj_sup,
        delta_feedback_sup,
        knots: intervals,
        tau,
        oracle_gain: synthesis_action - oracle.action,
        quadrature_tol,
        tail_bound: (-flow.alpha * tau).exp() * scale / flow.alpha,
        oracle_start: oracle.start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Hamiltonian;
    use crate::geometry::{ManifoldSpec, PotentialSpec, SphereBasis};
    use crate::synthesis::{converge_horizon, SynthesisOptions};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::{Arc, OnceLock};

    fn pendulum(alpha: f64) -> Flow {
        Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap()), alpha)
    }

    fn field() -> &'static SynthesisField {
        static FIELD: OnceLock<SynthesisField> = OnceLock::new();
        FIELD.get_or_init(|| converge_horizon(&pendulum(3.0), &SynthesisOptions::default()).unwrap())
    }

    #[test]
    fn constant_path_action() {
        let f = pendulum(3.0);
        let p = DiscretePath::constant([0.0, 0.0], ChartId::Main, 10.0, 2000);
        let exact = -(1.0 - (-30.0f64).exp()) / 3.0;
        assert_relative_eq!(discrete_action(&f, &p).unwrap(), exact, epsilon = 1e-5);
        let long = DiscretePath::constant([0.0, 0.0], ChartId::Main, 40.0, 40000);
        assert_relative_eq!(discrete_action(&f, &long).unwrap(), -1.0 / 3.0, epsilon = 1e-5);
        let ham = Hamiltonian::new(ManifoldSpec::flat_torus(2), PotentialSpec::zero()).unwrap();
        let free = Flow::new(Arc::new(ham), 1.0);
        assert_eq!(discrete_action(&free, &DiscretePath::constant([1.0, 2.0], ChartId::Main, 5.0, 100)).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_is_second_order() {
        let f = pendulum(3.0);
        let path = |n: usize| {
            let mut p = DiscretePath::constant([0.0, 0.0], ChartId::Main, 4.0, n);
            for (k, x) in p.points.iter_mut().enumerate() {
                let t = k as f64 * 4.0 / n as f64;
                x[0] = 0.3 + 0.8 * (1.3 * t).sin() * (-0.2 * t).exp();
            }
            discrete_action(&f, &p).unwrap()
        };
        let reference = path(1 << 16);
        let errs: Vec<f64> = [100, 200, 400, 800].iter().map(|&n| (path(n) - reference).abs()).collect();
        let xs: Vec<f64> = [100.0f64, 200.0, 400.0, 800.0].iter().map(|n| (4.0 / n).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 1.9, "{slope} {errs:?}");
    }

    #[test]
    fn gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pend = pendulum(3.0);
        let pot = PotentialSpec { sphere: vec![(SphereBasis::Z, 0.4), (SphereBasis::X, -0.2)], ..Default::default() };
        let sph = Flow::new(Arc::new(Hamiltonian::new(ManifoldSpec::sphere(), pot).unwrap()), 2.0);
        for (flow, base) in [(&pend, [0.7, 0.0]), (&sph, [1.2, 0.5])] {
            let n = flow.dim();
            let mut p = DiscretePath::constant(base, ChartId::Main, 2.0, 120);
            for x in p.points.iter_mut().skip(1) {
                for i in 0..n {
                    x[i] += rng.gen_range(-0.3..0.3);
                }
            }
            let g = action_gradient(flow, &p).unwrap();
            for k in [1, 37, 120] {
                for i in 0..n {
                    let h = 1e-6;
                    let mut a = p.clone();
                    let mut b = p.clone();
                    a.points[k][i] += h;
                    b.points[k][i] -= h;
                    let fd = (discrete_action(flow, &a).unwrap() - discrete_action(flow, &b).unwrap()) / (2.0 * h);
                    assert_relative_eq!(g[k - 1][i], fd, max_relative = 1e-6, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn critical_point_keeps_the_constant_path() {
        let f = pendulum(3.0);
        for q in [0.0, PI] {
            let r = minimize_free_endpoint(&f, [q, 0.0], ChartId::Main, 5.0, 500, &[], &OracleOptions { restarts: 0, ..Default::default() })
                .unwrap();
            assert!(r.path.points.iter().all(|x| (x[0] - q).abs() < 1e-12));
            let c = q.cos();
            assert_relative_eq!(r.action, -c * (1.0 - (-15.0f64).exp()) / 3.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn free_endpoint_minimizer_stops_moving() {
        let f = pendulum(3.0);
        let r = minimize_free_endpoint(&f, [0.3, 0.0], ChartId::Main, 10.0, 2000, &[], &OracleOptions::default()).unwrap();
        let p = &r.path.points;
        let last = (p[p.len() - 1][0] - p[p.len() - 2][0]) / r.path.dt;
        assert!(last.abs() < 1e-2, "{last}");
    }

    #[test]
    fn synthesis_path_action_matches_value() {
        let flow = pendulum(3.0);
        let f = field();
        let path = feedback_path(&flow, f, [0.3, 0.0], ChartId::Main, 10.0, 2000, 4);
        let i = f.grid.nearest([0.3, 0.0], ChartId::Main);
        let u = Interpolant::new(&f.grid, &f.u).eval(0, [0.3, 0.0]).0;
        assert!((f.grid.nodes[i].q[0] - 0.3).abs() < 0.02);
        assert!((discrete_action(&flow, &path).unwrap() + u).abs() < 1e-3);
    }

    #[test]
    fn oracle_agrees_with_synthesis() {
        let flow = pendulum(3.0);
        let f = field();
        for (q, tau) in [(0.3, 10.0), (1.5, 10.0), (PI - 0.01, 20.0)] {
            let r = compare_with_synthesis(&flow, f, [q, 0.0], ChartId::Main, tau, 2000, &OracleOptions::default()).unwrap();
            assert!(r.delta_value < 1e-3, "{r:?}");
            assert!(r.delta_traj_sup < 5e-3, "{r:?}");
            assert!(r.oracle_gain <= r.quadrature_tol + 1e-9, "{r:?}");
        }
    }

    #[test]
    fn oracle_at_equilibrium_matches_exactly() {
        let flow = pendulum(3.0);
        let r = compare_with_synthesis(&flow, field(), [0.0, 0.0], ChartId::Main, 10.0, 1000, &OracleOptions::default()).unwrap();
        assert!(r.delta_value < 1e-10 && r.delta_traj_sup < 1e-10, "{r:?}");
    }
}
