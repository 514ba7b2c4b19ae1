use super::{propagate_frame, vertical_frame, LagrangeFrame};
use crate::error::{Error, Result};
use crate::curvature::curvature_operator;
use crate::flow::{Flow, RunOptions};
use crate::geometry::CotangentState;
use nalgebra::DMatrix;

/// The Jacobi curve `J_z(t)`: the vertical subspace at `e^{t h}(z)` pulled
/// back to `z` by the linearized flow.
pub fn jacobi_curve(flow: &Flow, z: &CotangentState, t: f64) -> Result<LagrangeFrame> {
    let n = flow.dim();
    if t == 0.0 {
        return Ok(LagrangeFrame::new(vertical_frame(n), *z));
    }
    let out = flow.run(z, 0.0, t, None, &RunOptions::default(), |_, _, _| false)?;
    if out.t_end != t {
        return Err(Error::Blowup {
            time: out.t_end,
            norm: flow.manifold().co_norm_sq(out.end.q, out.end.xi).sqrt(),
        });
    }
    let p = propagate_frame(flow, &out.trajectory, &vertical_frame(n), t, 0.0, None)?;
    Ok(LagrangeFrame::new(p.frame, *z))
}

/// How the time derivatives of the linearization are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurvatureMethod {
    /// Closed form from the third and fourth derivatives of the potential
    /// (flat manifolds only).
    Analytic,
    /// Richardson-extrapolated central differences of the linearization
    /// along the trajectory with base step `h`.
    FiniteDifference { h: f64 },
}

/// Curvature operator of the flow at `z`, acting on the vertical fiber, from
/// the Schwarzian of the Jacobi curve at `t = 0`.
pub fn flow_curvature(flow: &Flow, z: &CotangentState) -> Result<DMatrix<f64>> {
    let method = if flow.manifold().is_flat() {
        CurvatureMethod::Analytic
    } else {
        CurvatureMethod::FiniteDifference { h: 1e-2 }
    };
    flow_curvature_with(flow, z, method)
}

pub fn flow_curvature_with(flow: &Flow, z: &CotangentState, method: CurvatureMethod) -> Result<DMatrix<f64>> {
    let m = flow.manifold();
    m.check_domain(z.q, z.chart)?;
    let n = m.dim;
    let n2 = 2 * n;
    let a0 = flow.linearization(z)?;
    let (a1, a2) = match method {
        CurvatureMethod::Analytic => {
            if !m.is_flat() {
                return Err(Error::InvalidSpec("analytic flow curvature needs a flat manifold".into()));
            }
            analytic_derivatives(flow, z)
        }
        CurvatureMethod::FiniteDifference { h } => {
            if !(h > 0.0) {
                return Err(Error::StepTooSmall { time: 0.0 });
            }
            let opts = RunOptions { switch_charts: false, escape_level: None, record: false };
            let at = |t: f64| -> Result<DMatrix<f64>> {
                let out = flow.run(z, 0.0, t, None, &opts, |_, _, _| false)?;
                flow.linearization(&out.end)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            let d1h = (&p1 - &m1) / (2.0 * h);
            let d1h2 = (&p2 - &m2) / (4.0 * h);
            let d2h = (&p1 - 2.0 * &a0 + &m1) / (h * h);
            let d2h2 = (&p2 - 2.0 * &a0 + &m2) / (4.0 * h * h);
            ((4.0 * d1h - d1h2) / 3.0, (4.0 * d2h - d2h2) / 3.0)
        }
    };
    let e = vertical_frame(n);
    let y1 = -(&a0 * &e);
    let y2 = (&a0 * &a0 - &a1) * &e;
    let y3 = (-(&a0 * &a0 * &a0) + 2.0 * &a0 * &a1 + &a1 * &a0 - &a2) * &e;
    let (p1, q1) = (y1.rows(0, n).into_owned(), y1.rows(n, n).into_owned());
    let (p2, q2) = (y2.rows(0, n).into_owned(), y2.rows(n, n).into_owned());
    let p3 = y3.rows(0, n).into_owned();
    debug_assert_eq!(y1.nrows(), n2);
    let s1 = p1;
    let s2 = &p2 - 2.0 * &s1 * &q1;
    let s3 = &p3 - 3.0 * &p2 * &q1 + 3.0 * &s1 * (2.0 * &q1 * &q1 - &q2);
    let s1_inv = s1.try_inverse().ok_or(Error::Degenerate(z.q))?;
    let b = &s1_inv * &s2;
    Ok(0.5 * &s1_inv * s3 - 0.75 * &b * &b)
}

/// Largest entry of `flow curvature - (R^H - alpha^2/4 I)` at `z`.
pub fn curvature_identity_residual(flow: &Flow, z: &CotangentState, method: CurvatureMethod) -> Result<f64> {
    let r = flow_curvature_with(flow, z, method)?;
    let op = curvature_operator(&flow.ham, z)?;
    let n = flow.dim();
    let expected =
        DMatrix::from_fn(n, n, |i, j| op.matrix[i][j]) - 0.25 * flow.alpha * flow.alpha * DMatrix::identity(n, n);
    Ok((r - expected).abs().max())
}

/// First and second time derivatives of the linearization on a flat manifold.
fn analytic_derivatives(flow: &Flow, z: &CotangentState) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = flow.manifold();
    let n = m.dim;
    let pot = &flow.ham.potential;
    let t3 = pot.third(m, z.q);
    let t4 = pot.fourth(m, z.q);
    let grad = pot.jet(m, z.q, z.chart).grad;
    let qd = z.xi;
    let qdd: Vec<f64> = (0..n).map(|i| -grad[i] + flow.alpha * z.xi[i]).collect();
    let mut a1 = DMatrix::zeros(2 * n, 2 * n);
    let mut a2 = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for k in 0..n {
                d1 += t3[i][j][k] * qd[k];
                d2 += t3[i][j][k] * qdd[k];
                for l in 0..n {
                    d2 += t4[i][j][k][l] * qd[k] * qd[l];
                }
            }
            a1[(n + i, j)] = -d1;
            a2[(n + i, j)] = -d2;
        }
    }
    (a1, a2)
}
