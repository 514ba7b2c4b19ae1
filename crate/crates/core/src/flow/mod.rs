//! The discounted characteristic flow on the cotangent bundle.
//!
//! States are `(q, xi)` with `xi = e^{alpha t} p`, and the energy is
//! `H = |xi|^2 / 2 + U(q)`. The flow reads `q' = g^{-1} xi`,
//! `xi' = -dU - (1/2) xi^T (d g^{-1}) xi + alpha xi`.

mod dop853_tables;
mod equilibria;
pub mod integrator;
mod trajectory;

pub use equilibria::{classify_critical, find_equilibria, CriticalPoint, EquilibriumInfo, EquilibriumKind};
pub(crate) use equilibria::{cholesky, relative_eigen};
pub use integrator::{Dop853, Tolerances};
pub use trajectory::{ChartSwitch, Trajectory, M4};

use crate::error::{Error, Result};
use crate::geometry::{ChartId, CotangentState, ManifoldSpec, PotentialSpec, V2};
use nalgebra::DMatrix;
use serde::Serialize;
use std::cell::Cell;
use std::sync::Arc;

/// Largest position advance, in arc length, of one recorded step; keeps the
/// dense interpolant resolving the potential along fast trajectories.
const DENSE_PHASE: f64 = 0.25;

/// Mechanical system `(M, g, U)` together with its critical set.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub manifold: ManifoldSpec,
    pub potential: PotentialSpec,
    pub critical: Vec<CriticalPoint>,
    pub u_max: f64,
    pub u_min: f64,
}

impl Hamiltonian {
    pub fn new(manifold: ManifoldSpec, potential: PotentialSpec) -> Result<Self> {
        manifold.validate()?;
        potential.validate(&manifold)?;
        let critical = find_equilibria(&manifold, &potential);
        let mut u_max = f64::NEG_INFINITY;
        let mut u_min = f64::INFINITY;
        for c in &critical {
            u_max = u_max.max(c.value);
            u_min = u_min.min(c.value);
        }
        if critical.is_empty() {
            return Err(Error::InvalidSpec("no critical points found for the potential".into()));
        }
        Ok(Self { manifold, potential, critical, u_max, u_min })
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim
    }

    pub fn potential(&self, q: V2, chart: ChartId) -> f64 {
        self.potential.value(&self.manifold, q, chart)
    }

    pub fn energy(&self, s: &CotangentState) -> f64 {
        0.5 * self.manifold.co_norm_sq(s.q, s.xi) + self.potential(s.q, s.chart)
    }

    pub fn is_morse(&self) -> bool {
        self.critical.iter().all(|c| !c.degenerate)
    }

    /// Radius in the co-norm beyond which a trajectory is declared to blow up.
    pub fn blowup_radius(&self) -> f64 {
        1e3 * (1.0 + (2.0 * (self.u_max - self.u_min)).sqrt())
    }

    /// Tolerance used when comparing energies against `max U`.
    pub fn energy_slack(&self) -> f64 {
        1e-9 * self.u_max.abs().max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    Escaped,
    Blowup,
    Monitor,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub switch_charts: bool,
    /// Stop as soon as the energy exceeds this level.
    pub escape_level: Option<f64>,
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { switch_charts: true, escape_level: None, record: true }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub end: CotangentState,
    pub t_end: f64,
    pub frame: Option<DMatrix<f64>>,
    pub stop: StopReason,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Boundedness {
    BoundedTo { q: V2, chart: ChartId },
    Escaped,
    Undecided,
}

/// `e^{t h_alpha}` with its integrator settings.
#[derive(Clone, Debug)]
pub struct Flow {
    pub ham: Arc<Hamiltonian>,
    pub alpha: f64,
    pub tol: Tolerances,
}

impl Flow {
    pub fn new(ham: Arc<Hamiltonian>, alpha: f64) -> Self {
        Self { ham, alpha, tol: Tolerances::default() }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.ham.manifold
    }

    pub fn dim(&self) -> usize {
        self.ham.manifold.dim
    }

    pub(crate) fn field_unchecked(&self, s: &CotangentState) -> [f64; 4] {
        let m = &self.ham.manifold;
        let n = m.dim;
        let pj = self.ham.potential.jet(m, s.q, s.chart);
        let mut out = [0.0; 4];
        if m.is_flat() {
            for i in 0..n {
                out[i] = s.xi[i];
                out[n + i] = -pj.grad[i] + self.alpha * s.xi[i];
            }
            return out;
        }
        let jet = m.jet_unchecked(s.q);
        for i in 0..n {
            for j in 0..n {
                out[i] += jet.g_inv[i][j] * s.xi[j];
            }
            let mut quad = 0.0;
            for a in 0..n {
                for b in 0..n {
                    quad += s.xi[a] * jet.dg_inv[i][a][b] * s.xi[b];
                }
            }
            out[n + i] = -pj.grad[i] - 0.5 * quad + self.alpha * s.xi[i];
        }
        out
    }

    /// `(dq, dxi)` of `h_alpha` at `s`.
    pub fn vector_field(&self, s: &CotangentState) -> Result<(V2, V2)> {
        self.ham.manifold.check_domain(s.q, s.chart)?;
        let n = self.dim();
        let f = self.field_unchecked(s);
        let mut dq = [0.0; 2];
        let mut dxi = [0.0; 2];
        dq[..n].copy_from_slice(&f[..n]);
        dxi[..n].copy_from_slice(&f[n..2 * n]);
        Ok((dq, dxi))
    }

    pub(crate) fn linearization_unchecked(&self, s: &CotangentState) -> M4 {
        let m = &self.ham.manifold;
        let n = m.dim;
        let pj = self.ham.potential.jet(m, s.q, s.chart);
        let mut a = [[0.0; 4]; 4];
        if m.is_flat() {
            for i in 0..n {
                a[i][n + i] = 1.0;
                a[n + i][n + i] = self.alpha;
                for k in 0..n {
                    a[n + i][k] = -pj.hess[i][k];
                }
            }
            return a;
        }
        let jet = m.jet_unchecked(s.q);
        let xi = s.xi;
        for i in 0..n {
            for k in 0..n {
                let mut dqq = 0.0;
                let mut quad = 0.0;
                let mut dxx = 0.0;
                for j in 0..n {
                    dqq += jet.dg_inv[k][i][j] * xi[j];
                    dxx += jet.dg_inv[i][k][j] * xi[j];
                    for l in 0..n {
                        quad += xi[j] * jet.d2g_inv[k][i][j][l] * xi[l];
                    }
                }
                a[i][k] = dqq;
                a[i][n + k] = jet.g_inv[i][k];
                a[n + i][k] = -pj.hess[i][k] - 0.5 * quad;
                a[n + i][n + k] = -dxx + if i == k { self.alpha } else { 0.0 };
            }
        }
        a
    }

    /// Jacobian of `h_alpha` in packed coordinates `(q, xi)`.
    pub fn linearization(&self, s: &CotangentState) -> Result<DMatrix<f64>> {
        self.ham.manifold.check_domain(s.q, s.chart)?;
        let n2 = 2 * self.dim();
        let a = self.linearization_unchecked(s);
        Ok(DMatrix::from_fn(n2, n2, |i, j| a[i][j]))
    }

    pub fn energy(&self, s: &CotangentState) -> f64 {
        self.ham.energy(s)
    }

    fn is_rest_point(&self, s: &CotangentState) -> bool {
        let n = self.dim();
        let f = self.field_unchecked(s);
        f[..2 * n].iter().all(|x| x.abs() <= 1e-13)
    }

    /// Integrates the flow, optionally with variational columns.
    pub fn run<M>(
        &self,
        z: &CotangentState,
        t0: f64,
        t1: f64,
        frame: Option<&DMatrix<f64>>,
        opts: &RunOptions,
        mut monitor: M,
    ) -> Result<RunOutput>
    where
        M: FnMut(f64, &CotangentState, f64) -> bool,
    {
        let m = &self.ham.manifold;
        let n = m.dim;
        let n2 = 2 * n;
        m.check_domain(z.q, z.chart)?;
        let cols = frame.map_or(0, |f| f.ncols());
        let frozen = self.is_rest_point(z);
        let chart = Cell::new(z.chart);
        let blowup = self.ham.blowup_radius();
        let mut traj = Trajectory::new(n);
        let record = |traj: &mut Trajectory, t: f64, s: &CotangentState, f: &[f64]| {
            let mut rate = [0.0; 4];
            rate[..n2].copy_from_slice(&f[..n2]);
            let mut acc = [0.0; 4];
            if !frozen {
                let a = self.linearization_unchecked(s);
                for i in 0..n2 {
                    acc[i] = (0..n2).map(|j| a[i][j] * rate[j]).sum();
                }
            }
            traj.push(t, *s, self.ham.energy(s), rate, acc);
        };
        if frozen && cols == 0 {
            let zero = [0.0; 4];
            if opts.record {
                traj.push(t0, *z, self.ham.energy(z), zero, zero);
                traj.push(t1, *z, self.ham.energy(z), zero, zero);
            }
            return Ok(RunOutput { trajectory: traj, end: *z, t_end: t1, frame: None, stop: StopReason::Completed });
        }
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let s = CotangentState::unpack(n, y, chart.get());
            if frozen {
                dy[..n2].fill(0.0);
            } else {
                let f = self.field_unchecked(&s);
                dy[..n2].copy_from_slice(&f[..n2]);
            }
            if cols > 0 {
                let a = self.linearization_unchecked(&s);
                for c in 0..cols {
                    let off = n2 + c * n2;
                    for i in 0..n2 {
                        let mut acc = 0.0;
                        for j in 0..n2 {
                            acc += a[i][j] * y[off + j];
                        }
                        dy[off + i] = acc;
                    }
                }
            }
        };
        let mut y0 = vec![0.0; n2 * (1 + cols)];
        z.pack(n, &mut y0);
        if let Some(f) = frame {
            for c in 0..cols {
                for i in 0..n2 {
                    y0[n2 + c * n2 + i] = f[(i, c)];
                }
            }
        }
        let dir = if t1 < t0 { -1.0 } else { 1.0 };
        let mut st = Dop853::new(&mut rhs, t0, &y0, dir, self.tol);
        if opts.record {
            record(&mut traj, t0, z, &st.f);
        }
        let mut stop = StopReason::Completed;
        let mut y_tmp = vec![0.0; y0.len()];
        while dir * (t1 - st.t) > 0.0 {
            st.step(&mut rhs, t1)?;
            let mut s = CotangentState::unpack(n, &st.y, chart.get());
            if opts.record {
                record(&mut traj, st.t, &s, &st.f);
            }
            let h = self.ham.energy(&s);
            let speed = m.co_norm_sq(s.q, s.xi).sqrt();
            if speed > blowup {
                stop = StopReason::Blowup;
                break;
            }
            if let Some(level) = opts.escape_level {
                if h > level {
                    stop = StopReason::Escaped;
                    break;
                }
            }
            if opts.switch_charts && m.needs_switch(s.q) {
                let (s2, jac) = crate::geometry::sphere::switch_state(&s);
                y_tmp.copy_from_slice(&st.y);
                s2.pack(n, &mut y_tmp);
                for c in 0..cols {
                    let off = n2 + c * n2;
                    for i in 0..n2 {
                        y_tmp[off + i] = (0..n2).map(|j| jac[i][j] * st.y[off + j]).sum();
                    }
                }
                chart.set(s2.chart);
                st.reset(&mut rhs, &y_tmp);
                s = s2;
                if opts.record {
                    traj.switches.push(ChartSwitch { index: traj.len(), jacobian: jac });
                    record(&mut traj, st.t, &s, &st.f);
                }
            }
            if opts.record && speed > 0.0 {
                st.cap_step(DENSE_PHASE / speed);
            }
            if monitor(st.t, &s, h) {
                stop = StopReason::Monitor;
                break;
            }
        }
        let end = CotangentState::unpack(n, &st.y, chart.get());
        let frame_out = frame.map(|_| DMatrix::from_fn(n2, cols, |i, c| st.y[n2 + c * n2 + i]));
        Ok(RunOutput { trajectory: traj, end, t_end: st.t, frame: frame_out, stop })
    }

    /// Trajectory on `[t0, t1]`; fails with `Blowup` if the co-norm bound is hit.
    pub fn integrate(&self, z: &CotangentState, t0: f64, t1: f64) -> Result<Trajectory> {
        let out = self.run(z, t0, t1, None, &RunOptions::default(), |_, _, _| false)?;
        match out.stop {
            StopReason::Blowup => Err(Error::Blowup {
                time: out.t_end,
                norm: self.ham.manifold.co_norm_sq(out.end.q, out.end.xi).sqrt(),
            }),
            _ => Ok(out.trajectory),
        }
    }

    /// Like [`Flow::integrate`] but keeps the partial trajectory on blowup.
    pub fn integrate_partial(&self, z: &CotangentState, t0: f64, t1: f64) -> Result<(Trajectory, StopReason)> {
        let out = self.run(z, t0, t1, None, &RunOptions::default(), |_, _, _| false)?;
        Ok((out.trajectory, out.stop))
    }

    /// End state of the flow for time `t`, without recording.
    pub fn flow_to(&self, z: &CotangentState, t: f64, switch_charts: bool) -> Result<CotangentState> {
        let opts = RunOptions { switch_charts, escape_level: None, record: false };
        let out = self.run(z, 0.0, t, None, &opts, |_, _, _| false)?;
        if out.stop == StopReason::Blowup {
            return Err(Error::Blowup {
                time: out.t_end,
                norm: self.ham.manifold.co_norm_sq(out.end.q, out.end.xi).sqrt(),
            });
        }
        Ok(out.end)
    }

    /// Largest mismatch between the energy increase over a step and the
    /// integral of `alpha |xi|^2`, divided by the step length.
    pub fn energy_law_residual(&self, traj: &Trajectory) -> f64 {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let m = &self.ham.manifold;
        let mut worst: f64 = 0.0;
        for k in 1..traj.len() {
            let (ta, tb) = (traj.times[k - 1], traj.times[k]);
            let dt = tb - ta;
            if dt == 0.0 {
                continue;
            }
            let mut integral = 0.0;
            for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
                let t = ta + 0.5 * dt * (1.0 + x);
                let s = traj.state_at(t);
                integral += 0.5 * w * m.co_norm_sq(s.q, s.xi);
            }
            let dh = (traj.energies[k] - traj.energies[k - 1]) / dt;
            worst = worst.max((dh - self.alpha * integral).abs());
        }
        worst
    }

    /// Forward-time fate of `z`: escape past `max U`, capture by an
    /// equilibrium, or neither within `t_max`.
    pub fn classify_boundedness(&self, z: &CotangentState, t_max: f64) -> Result<Boundedness> {
        const DWELL_RADIUS: f64 = 1e-6;
        const DWELL_TIME: f64 = 5.0;
        const CAPTURE_RADIUS: f64 = 0.1;
        const CAPTURE_RATIO: f64 = 1e-2;
        let level = self.ham.u_max + self.ham.energy_slack();
        if self.energy(z) > level {
            return Ok(Boundedness::Escaped);
        }
        let m = &self.ham.manifold;
        let n = m.dim;
        let saddles: Vec<(usize, EigenSplit)> = self
            .ham
            .critical
            .iter()
            .enumerate()
            .filter_map(|(i, c)| EigenSplit::at(self, c).map(|e| (i, e)))
            .collect();
        let near = |s: &CotangentState| -> Option<(usize, f64)> {
            self.ham
                .critical
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let d = m.distance(c.q, c.chart, s.q, s.chart);
                    let p = m.co_norm_sq(s.q, s.xi).sqrt();
                    (i, d.max(p))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
        };
        if self.is_rest_point(z) {
            if let Some((i, d)) = near(z) {
                if d < 1e-9 {
                    let c = &self.ham.critical[i];
                    return Ok(Boundedness::BoundedTo { q: c.q, chart: c.chart });
                }
            }
        }
        let mut dwell: Option<(usize, f64)> = None;
        let mut verdict = Boundedness::Undecided;
        let opts = RunOptions { switch_charts: true, escape_level: Some(level), record: false };
        let out = self.run(z, 0.0, t_max, None, &opts, |t, s, _| {
            let Some((i, d)) = near(s) else { return false };
            if d < DWELL_RADIUS {
                match dwell {
                    Some((j, since)) if j == i => {
                        if t - since >= DWELL_TIME {
                            verdict = self.bounded(i);
                            return true;
                        }
                    }
                    _ => dwell = Some((i, t)),
                }
            } else {
                dwell = None;
            }
            if d < CAPTURE_RADIUS {
                if let Some((_, split)) = saddles.iter().find(|(j, _)| *j == i) {
                    let c = &self.ham.critical[i];
                    let local = m.state_in_chart(s, c.chart);
                    let mut dz = [0.0; 4];
                    let dq = m.displacement(c.q, local.q);
                    dz[..n].copy_from_slice(&dq[..n]);
                    dz[n..2 * n].copy_from_slice(&local.xi[..n]);
                    let (stable, unstable) = split.components(&dz[..2 * n]);
                    if unstable <= CAPTURE_RATIO * stable {
                        verdict = self.bounded(i);
                        return true;
                    }
                }
            }
            false
        })?;
        match out.stop {
            StopReason::Escaped | StopReason::Blowup => Ok(Boundedness::Escaped),
            _ => Ok(verdict),
        }
    }

    fn bounded(&self, i: usize) -> Boundedness {
        let c = &self.ham.critical[i];
        Boundedness::BoundedTo { q: c.q, chart: c.chart }
    }
}

/// Stable/unstable coordinates at a hyperbolic equilibrium with a nontrivial
/// stable subspace.
struct EigenSplit {
    inverse: DMatrix<f64>,
    stable: Vec<bool>,
}

impl EigenSplit {
    fn at(flow: &Flow, c: &CriticalPoint) -> Option<Self> {
        if c.degenerate || !c.curvatures.iter().any(|k| *k < 0.0) {
            return None;
        }
        let a = flow.linearization(&CotangentState::zero_section(c.q, c.chart)).ok()?;
        let n2 = a.nrows();
        let eig = a.clone().complex_eigenvalues();
        if eig.iter().any(|l| l.im.abs() > 1e-12) {
            return None;
        }
        let mut vecs = DMatrix::zeros(n2, n2);
        let mut stable = Vec::new();
        for (c_idx, l) in eig.iter().enumerate() {
            let shifted = &a - DMatrix::identity(n2, n2) * l.re;
            let svd = shifted.svd(false, true);
            let vt = svd.v_t?;
            let (imin, _) = svd.singular_values.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1))?;
            for i in 0..n2 {
                vecs[(i, c_idx)] = vt[(imin, i)];
            }
            stable.push(l.re < 0.0);
        }
        let inverse = vecs.try_inverse()?;
        Some(Self { inverse, stable })
    }

    fn components(&self, dz: &[f64]) -> (f64, f64) {
        let v = nalgebra::DVector::from_column_slice(dz);
        let c = &self.inverse * v;
        let (mut s, mut u) = (0.0, 0.0);
        for (i, st) in self.stable.iter().enumerate() {
            if *st {
                s += c[i] * c[i];
            } else {
                u += c[i] * c[i];
            }
        }
        (s.sqrt(), u.sqrt())
    }
}

/// `(q, xi) -> (q, -xi)`, which conjugates `h_alpha` with `-h_{-alpha}`.
pub fn dissipative_conjugate(s: &CotangentState) -> CotangentState {
    CotangentState { q: s.q, xi: [-s.xi[0], -s.xi[1]], chart: s.chart }
}

#[cfg(test)]
mod tests;
