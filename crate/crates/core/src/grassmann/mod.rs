//! Lagrange subspaces of `T_z(T*M)` in `(dq, dxi)` coordinates, their
//! propagation by the linearized flow, chart coordinates on the Lagrange
//! Grassmannian and the hyperbolicity diagnostics built on them.

mod hyperbolic;
mod jacobi;
mod propagate;

pub use hyperbolic::{
    connection_chain, corollary_angle, lyapunov_rate_check, q_ratio_check, stable_unstable_split, ChainSample,
    HyperbolicSplit, QRatio, SplitOptions,
};
pub use jacobi::{flow_curvature, flow_curvature_with, jacobi_curve, curvature_identity_residual, CurvatureMethod};
pub use propagate::{propagate_frame, Propagation};

use crate::error::{Error, Result};
use crate::geometry::{CotangentState, ManifoldSpec};
use nalgebra::DMatrix;

/// A frame whose columns span a subspace of the tangent space at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeFrame {
    pub basis: DMatrix<f64>,
    pub base: CotangentState,
}

impl LagrangeFrame {
    pub fn new(basis: DMatrix<f64>, base: CotangentState) -> Self {
        Self { basis, base }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Largest normalized symplectic pairing between basis columns.
    pub fn isotropy_defect(&self) -> f64 {
        isotropy_defect(&self.basis)
    }
}

/// Coordinates of a Lagrange subspace in the affine chart of subspaces
/// transversal to a fixed complement.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannChartCoord {
    pub s: DMatrix<f64>,
}

/// `J` with `sigma(u, v) = u^T J v = u_xi . v_q - u_q . v_xi`.
pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

pub fn symplectic_form(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[n + i] * v[i] - u[i] * v[n + i]).sum()
}

pub fn isotropy_defect(basis: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..basis.ncols() {
        for b in (a + 1)..basis.ncols() {
            let (u, v) = (basis.column(a), basis.column(b));
            let s = symplectic_form(u.as_slice(), v.as_slice());
            worst = worst.max(s.abs() / (u.norm() * v.norm()).max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Frame `[I; P]`: the graph of `dq -> P dq`.
pub fn graph_frame(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut f = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        f[(i, i)] = 1.0;
        for j in 0..n {
            f[(n + i, j)] = p[(i, j)];
        }
    }
    f
}

/// The vertical subspace (fiber directions).
pub fn vertical_frame(n: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        f[(n + i, i)] = 1.0;
    }
    f
}

/// Graph matrix of the horizontal distribution `D^alpha` shifted by `shift`
/// times the metric: `P = Gamma(xi) + shift * g`. `shift = alpha/2` gives
/// `D^alpha`, `shift = 0` the Levi-Civita horizontal space and
/// `shift = 1 + alpha/2` the complement `Delta^alpha`.
fn shifted_horizontal(m: &ManifoldSpec, z: &CotangentState, shift: f64) -> Result<DMatrix<f64>> {
    let n = m.dim;
    let jet = m.metric_jet(z.q, z.chart)?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let mut p = shift * jet.g[i][j];
        for k in 0..n {
            p += jet.christoffel[k][i][j] * z.xi[k];
        }
        p
    }))
}

/// Levi-Civita horizontal subspace `D_z`.
pub fn levi_civita_horizontal(m: &ManifoldSpec, z: &CotangentState) -> Result<LagrangeFrame> {
    Ok(LagrangeFrame::new(graph_frame(&shifted_horizontal(m, z, 0.0)?), *z))
}

/// The connection `D^alpha_z`.
pub fn connection_d_alpha(m: &ManifoldSpec, z: &CotangentState, alpha: f64) -> Result<LagrangeFrame> {
    Ok(LagrangeFrame::new(graph_frame(&shifted_horizontal(m, z, 0.5 * alpha)?), *z))
}

/// The complementary distribution `Delta^alpha_z`.
pub fn complement_delta_alpha(m: &ManifoldSpec, z: &CotangentState, alpha: f64) -> Result<LagrangeFrame> {
    Ok(LagrangeFrame::new(graph_frame(&shifted_horizontal(m, z, 1.0 + 0.5 * alpha)?), *z))
}

/// Orthonormal basis of the column span.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().qr().q()
}

/// Largest principal angle between two subspaces of equal dimension.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let s = resid.singular_values().max();
    s.clamp(0.0, 1.0).asin()
}

/// Sine of the angle between a vector and a subspace.
pub fn angle_to_subspace(v: &[f64], basis: &DMatrix<f64>) -> f64 {
    let q = orthonormalize(basis);
    let v = nalgebra::DVector::from_column_slice(v);
    let r = &v - &q * (q.transpose() * &v);
    (r.norm() / v.norm()).min(1.0).asin()
}

/// Chart coordinates of `frame` relative to `origin`, in the chart of
/// subspaces transversal to `complement`: writing the subspace as
/// `{y + L y : y in origin}` with `L: origin -> complement`, the matrix is
/// `S_ij = sigma(o_i, L o_j)` in the basis `o_i` of the origin frame.
pub fn chart_coords(
    frame: &DMatrix<f64>,
    origin: &DMatrix<f64>,
    complement: &DMatrix<f64>,
) -> Result<GrassmannChartCoord> {
    let n = origin.ncols();
    let mut stacked = DMatrix::zeros(2 * n, 2 * n);
    stacked.columns_mut(0, n).copy_from(origin);
    stacked.columns_mut(n, n).copy_from(complement);
    let lu = stacked.clone().lu();
    let coeffs = lu
        .solve(frame)
        .ok_or_else(|| Error::Transversality("origin and complement are not transversal".into()))?;
    let a = coeffs.rows(0, n).into_owned();
    let b = coeffs.rows(n, n).into_owned();
    let svd_a = a.clone().svd(false, false);
    let cond = svd_a.singular_values.max() / svd_a.singular_values.min().max(f64::MIN_POSITIVE);
    if cond > 1e12 {
        return Err(Error::Transversality("subspace meets the complement".into()));
    }
    let a_inv = a.try_inverse().ok_or_else(|| Error::Transversality("subspace meets the complement".into()))?;
    let l = b * a_inv;
    let j = symplectic_matrix(n);
    let s = origin.transpose() * j * complement * l;
    let s = 0.5 * (&s + s.transpose());
    Ok(GrassmannChartCoord { s })
}

/// Definiteness summary of a symmetric form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    Positive,
    Negative,
    Indefinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneForm {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub sign: Definiteness,
}

/// `V(x) = sigma(x, x')` for a smooth family of frames, by central
/// differences with step `h`.
pub fn monotone_form<F>(mut curve: F, t: f64, h: f64) -> Result<MonotoneForm>
where
    F: FnMut(f64) -> Result<DMatrix<f64>>,
{
    if !(h.abs() >= 1e-9 * (1.0 + t.abs())) {
        return Err(Error::StepTooSmall { time: t });
    }
    let y = curve(t)?;
    let yp = curve(t + h)?;
    let ym = curve(t - h)?;
    let dy = (yp - ym) / (2.0 * h);
    let n = y.ncols();
    let j = symplectic_matrix(y.nrows() / 2);
    let v = y.transpose() * j * dy;
    let v = 0.5 * (&v + v.transpose());
    let eig = v.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let sign = if ev[0] > 0.0 {
        Definiteness::Positive
    } else if ev[n - 1] < 0.0 {
        Definiteness::Negative
    } else {
        Definiteness::Indefinite
    };
    Ok(MonotoneForm { matrix: v, eigenvalues: ev, sign })
}

/// `sigma(v0, v1)` for the decomposition `v = v0 + v1` along `lambda0 + lambda1`.
pub fn q_form(lambda0: &DMatrix<f64>, lambda1: &DMatrix<f64>, v: &[f64]) -> Result<f64> {
    let n = lambda0.ncols();
    let mut stacked = DMatrix::zeros(2 * n, 2 * n);
    stacked.columns_mut(0, n).copy_from(lambda0);
    stacked.columns_mut(n, n).copy_from(lambda1);
    let svd = stacked.clone().svd(false, false);
    if svd.singular_values.min() < 1e-12 * svd.singular_values.max() {
        return Err(Error::Transversality("subspaces intersect".into()));
    }
    let c = stacked
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(v))
        .ok_or_else(|| Error::Transversality("subspaces intersect".into()))?;
    let v0 = lambda0 * c.rows(0, n);
    let v1 = lambda1 * c.rows(n, n);
    Ok(symplectic_form(v0.as_slice(), v1.as_slice()))
}
