use super::propagate::log_slope;
use super::{
    angle_to_subspace, chart_coords, complement_delta_alpha, connection_d_alpha, levi_civita_horizontal,
    principal_angle, propagate_frame, symplectic_matrix, vertical_frame,
};
use crate::error::{Error, Result};
use crate::flow::{Flow, RunOptions, StopReason, Trajectory};
use crate::geometry::CotangentState;
use nalgebra::DMatrix;

/// Controls for the stable/unstable splitting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    /// First horizon of the doubling schedule.
    pub t_start: f64,
    /// Largest horizon.
    pub t_cap: f64,
    /// Convergence threshold on the principal angle between successive horizons.
    pub angle_tol: f64,
    /// Time window of the growth-rate regression.
    pub rate_window: f64,
    /// Re-orthonormalization interval.
    pub reorth: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { t_start: 2.0, t_cap: 40.0, angle_tol: 1e-7, rate_window: 10.0, reorth: 1.0 }
    }
}

/// The subspaces `E-` (slow) and `E+` (fast) at a point of the locus, with
/// their measured growth rates.
#[derive(Clone, Debug)]
pub struct HyperbolicSplit {
    pub base: CotangentState,
    pub e_minus: DMatrix<f64>,
    pub e_plus: DMatrix<f64>,
    /// Largest forward growth rate inside `E-`.
    pub rate_minus: f64,
    /// Smallest forward growth rate inside `E+`.
    pub rate_plus: f64,
    /// `min(alpha/2 - rate_minus, rate_plus - alpha/2)`.
    pub epsilon_gap: f64,
    pub horizon_minus: f64,
    pub horizon_plus: f64,
    /// Principal-angle change at the last doubling, for each subspace.
    pub angle_change: (f64, f64),
    /// Both subspaces are graphs over the base directions.
    pub transversal: bool,
}

fn horizons(opts: &SplitOptions, available: f64) -> Vec<f64> {
    let limit = available.min(opts.t_cap);
    let mut out = Vec::new();
    let mut t = opts.t_start;
    while t <= limit {
        out.push(t);
        t *= 2.0;
    }
    if out.last().is_some_and(|&l| l < limit) {
        out.push(limit);
    }
    out
}

/// Iterates the Jacobi curve at the doubling horizons until it settles.
fn limit_subspace(
    flow: &Flow,
    traj: &Trajectory,
    sign: f64,
    opts: &SplitOptions,
    label: &str,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let available = (traj.last_time() - traj.first_time()).abs();
    let ts = horizons(opts, available);
    if ts.len() < 2 {
        return Err(Error::NotOnLocus(format!("{label}: trajectory only available for {available:.3e} time units")));
    }
    let v = vertical_frame(flow.dim());
    let mut prev: Option<DMatrix<f64>> = None;
    let mut change = f64::INFINITY;
    for &t in &ts {
        let p = propagate_frame(flow, traj, &v, sign * t, 0.0, Some(opts.reorth))?;
        if let Some(pr) = &prev {
            change = principal_angle(pr, &p.frame);
            if change < opts.angle_tol {
                return Ok((p.frame, t, change));
            }
        }
        prev = Some(p.frame);
    }
    if available < opts.t_cap {
        return Err(Error::NotOnLocus(format!(
            "{label}: trajectory leaves the locus at t = {available:.3e} before the subspace settles (change {change:.3e})"
        )));
    }
    Err(Error::Convergence(format!("{label}: principal angle change {change:.3e} at horizon {:.1}", opts.t_cap)))
}

fn graph_over_base(frame: &DMatrix<f64>) -> bool {
    let n = frame.ncols();
    let top = frame.rows(0, n).into_owned();
    let sv = top.singular_values();
    sv.min() > 1e-8 * frame.norm()
}

/// Splits the tangent space at a point of the locus into the limits of the
/// Jacobi curve for `t -> +inf` (`E-`) and `t -> -inf` (`E+`).
pub fn stable_unstable_split(flow: &Flow, z: &CotangentState, opts: SplitOptions) -> Result<HyperbolicSplit> {
    let ham = &flow.ham;
    let level = ham.u_max + ham.energy_slack();
    let h = ham.energy(z);
    if h > level {
        return Err(Error::NotOnLocus(format!("energy {h:.6e} exceeds the maximum of the potential {:.6e}", ham.u_max)));
    }
    let fwd_opts = RunOptions { switch_charts: true, escape_level: Some(level), record: true };
    let fwd = flow.run(z, 0.0, opts.t_cap, None, &fwd_opts, |_, _, _| false)?;
    let bwd = flow.run(z, 0.0, -opts.t_cap, None, &RunOptions::default(), |_, _, _| false)?;
    let mut fwd_traj = fwd.trajectory;
    if fwd.stop != StopReason::Completed {
        // Drop the last step, which is already off the locus.
        fwd_traj.truncate_last();
    }
    let bwd_traj = bwd.trajectory;

    let (e_minus, horizon_minus, ch_m) = limit_subspace(flow, &fwd_traj, 1.0, &opts, "E-")?;
    let (e_plus, horizon_plus, ch_p) = limit_subspace(flow, &bwd_traj, -1.0, &opts, "E+")?;

    let fwd_span = (fwd_traj.last_time() - fwd_traj.first_time()).abs();
    let bwd_span = (bwd_traj.last_time() - bwd_traj.first_time()).abs();
    let sample = opts.reorth.min(0.25);
    let up = propagate_frame(flow, &fwd_traj, &e_plus, 0.0, opts.rate_window.min(fwd_span), Some(sample))?;
    let down = propagate_frame(flow, &bwd_traj, &e_minus, 0.0, -opts.rate_window.min(bwd_span), Some(sample))?;
    let rate_plus = log_slope(&up.growth).ok_or_else(|| Error::NotOnLocus("no forward window for rates".into()))?;
    let rate_minus = -log_slope(&down.growth).ok_or_else(|| Error::NotOnLocus("no backward window for rates".into()))?;
    let half = 0.5 * flow.alpha;
    Ok(HyperbolicSplit {
        base: *z,
        transversal: graph_over_base(&e_minus) && graph_over_base(&e_plus),
        e_minus,
        e_plus,
        rate_minus,
        rate_plus,
        epsilon_gap: (half - rate_minus).min(rate_plus - half),
        horizon_minus,
        horizon_plus,
        angle_change: (ch_m, ch_p),
    })
}

/// Angle between the flow direction at the base point and `E-`. A flow
/// vector below `1e-12` is an equilibrium to working precision and gives 0.
pub fn corollary_angle(flow: &Flow, split: &HyperbolicSplit) -> Result<f64> {
    let (dq, dxi) = flow.vector_field(&split.base)?;
    let n = flow.dim();
    let mut v = vec![0.0; 2 * n];
    v[..n].copy_from_slice(&dq[..n]);
    v[n..].copy_from_slice(&dxi[..n]);
    if v.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12 {
        return Ok(0.0);
    }
    Ok(angle_to_subspace(&v, &split.e_minus))
}

/// Matrix of `Q_{Delta, D^alpha}` in packed coordinates at `s`.
fn q_matrix(flow: &Flow, s: &CotangentState) -> Result<DMatrix<f64>> {
    let n = flow.dim();
    let v = vertical_frame(n);
    let d = connection_d_alpha(flow.manifold(), s, flow.alpha)?.basis;
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.columns_mut(0, n).copy_from(&v);
    b.columns_mut(n, n).copy_from(&d);
    let b_inv = b.try_inverse().ok_or(Error::Transversality("vertical and connection".into()))?;
    let p0 = &v * b_inv.rows(0, n);
    let p1 = &d * b_inv.rows(n, n);
    let g = p0.transpose() * symplectic_matrix(n) * p1;
    Ok(0.5 * (&g + g.transpose()))
}

/// Smallest eigenvalue of the form `L_X Q - alpha Q` at `z`, where `Q` is the
/// quadratic form of the splitting into the vertical subspace and `D^alpha`
/// and the Lie derivative is taken by central differences with step `dt`.
pub fn lyapunov_rate_check(flow: &Flow, z: &CotangentState, dt: f64) -> Result<f64> {
    let n2 = 2 * flow.dim();
    let opts = RunOptions { switch_charts: false, escape_level: None, record: false };
    let id = DMatrix::identity(n2, n2);
    let pulled = |t: f64| -> Result<DMatrix<f64>> {
        let out = flow.run(z, 0.0, t, Some(&id), &opts, |_, _, _| false)?;
        let phi = out.frame.expect("frame requested");
        Ok(phi.transpose() * q_matrix(flow, &out.end)? * phi)
    };
    let deriv = (pulled(dt)? - pulled(-dt)?) / (2.0 * dt);
    let form = deriv - flow.alpha * q_matrix(flow, z)?;
    let form = 0.5 * (&form + form.transpose());
    Ok(form.symmetric_eigen().eigenvalues.min())
}

/// Chart matrices of `D^alpha`, `D` and the vertical subspace in the chart
/// centered at `D^alpha` with complement `Delta^alpha`.
#[derive(Clone, Debug)]
pub struct QRatio {
    pub d_alpha: DMatrix<f64>,
    pub levi_civita: DMatrix<f64>,
    pub vertical: DMatrix<f64>,
    /// `|S_D - alpha/(alpha+2) S_vertical| / |S_vertical|`.
    pub deviation: f64,
}

pub fn q_ratio_check(flow: &Flow, z: &CotangentState) -> Result<QRatio> {
    let m = flow.manifold();
    let n = m.dim;
    let origin = connection_d_alpha(m, z, flow.alpha)?.basis;
    let comp = complement_delta_alpha(m, z, flow.alpha)?.basis;
    let d_alpha = chart_coords(&origin, &origin, &comp)?.s;
    let levi_civita = chart_coords(&levi_civita_horizontal(m, z)?.basis, &origin, &comp)?.s;
    let vertical = chart_coords(&vertical_frame(n), &origin, &comp)?.s;
    let r = flow.alpha / (flow.alpha + 2.0);
    let deviation = (&levi_civita - r * &vertical).norm() / vertical.norm();
    Ok(QRatio { d_alpha, levi_civita, vertical, deviation })
}

/// Chart matrices, at `z`, of the subspaces `Delta`, `D` and `D^alpha` taken
/// at `e^{t h}(z)` and pulled back to `z`.
#[derive(Clone, Debug)]
pub struct ChainSample {
    pub t: f64,
    pub d_alpha: DMatrix<f64>,
    pub levi_civita: DMatrix<f64>,
    pub vertical: DMatrix<f64>,
}

impl ChainSample {
    /// Smallest eigenvalue among the successive gaps of
    /// `0 < S_{D^alpha}(t) < S_D(t) < S_vertical(t) < S_vertical(0)`.
    pub fn margin(&self, vertical_at_origin: &DMatrix<f64>) -> f64 {
        let gaps = [
            self.d_alpha.clone(),
            &self.levi_civita - &self.d_alpha,
            &self.vertical - &self.levi_civita,
            vertical_at_origin - &self.vertical,
        ];
        gaps.iter()
            .map(|g| (0.5 * (g + g.transpose())).symmetric_eigen().eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pulled-back distributions along the forward trajectory of `z`, in the
/// chart at `z` centered at `D^alpha` with complement `Delta^alpha`. The
/// sample at `t = 0` gives the reference matrices.
pub fn connection_chain(flow: &Flow, z: &CotangentState, times: &[f64]) -> Result<Vec<ChainSample>> {
    let m = flow.manifold();
    let n = m.dim;
    let origin = connection_d_alpha(m, z, flow.alpha)?.basis;
    let comp = complement_delta_alpha(m, z, flow.alpha)?.basis;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let traj = if t_max > 0.0 {
        let out = flow.run(z, 0.0, t_max, None, &RunOptions::default(), |_, _, _| false)?;
        if out.t_end < t_max {
            return Err(Error::Blowup { time: out.t_end, norm: m.co_norm_sq(out.end.q, out.end.xi).sqrt() });
        }
        Some(out.trajectory)
    } else {
        None
    };
    times
        .iter()
        .map(|&t| {
            let (s, pull) = match &traj {
                Some(tr) if t > 0.0 => {
                    let s = tr.state_at(t);
                    let s = m.state_in_chart(&s, tr.chart_at(t));
                    (s, Some(tr))
                }
                _ => (*z, None),
            };
            let mut frames = DMatrix::zeros(2 * n, 3 * n);
            frames.columns_mut(0, n).copy_from(&connection_d_alpha(m, &s, flow.alpha)?.basis);
            frames.columns_mut(n, n).copy_from(&levi_civita_horizontal(m, &s)?.basis);
            frames.columns_mut(2 * n, n).copy_from(&vertical_frame(n));
            if let Some(tr) = pull {
                frames = propagate_frame(flow, tr, &frames, t, 0.0, None)?.frame;
            }
            let coord = |k: usize| chart_coords(&frames.columns(k * n, n).into_owned(), &origin, &comp).map(|c| c.s);
            Ok(ChainSample { t, d_alpha: coord(0)?, levi_civita: coord(1)?, vertical: coord(2)? })
        })
        .collect()
}
