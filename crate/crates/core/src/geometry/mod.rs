//! Configuration manifolds, chart atlases, metric jets and potentials.
//!
//! Every manifold is handled in chart coordinates with at most two
//! coordinates. One-dimensional data lives in the first slot of the fixed
//! arrays and the second slot is ignored.

mod potential;
pub mod sphere;

pub use potential::{PotentialJet, PotentialSpec, SphereBasis, TrigTerm};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub type V2 = [f64; 2];
pub type M2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    FlatTorus,
    Sphere,
}

/// Chart label. Flat manifolds only use `Main`; the sphere uses `Alt` for the
/// chart whose polar axis is the first embedding axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartId {
    Main,
    Alt,
}

impl ChartId {
    pub fn index(self) -> usize {
        match self {
            ChartId::Main => 0,
            ChartId::Alt => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ChartId::Main
        } else {
            ChartId::Alt
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChartId::Main => "main",
            ChartId::Alt => "alt",
        }
    }

    pub fn other(self) -> Self {
        match self {
            ChartId::Main => ChartId::Alt,
            ChartId::Alt => ChartId::Main,
        }
    }
}

/// A point of T*M in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotangentState {
    pub q: V2,
    pub xi: V2,
    pub chart: ChartId,
}

impl CotangentState {
    pub fn new(q: V2, xi: V2) -> Self {
        Self { q, xi, chart: ChartId::Main }
    }

    pub fn in_chart(q: V2, xi: V2, chart: ChartId) -> Self {
        Self { q, xi, chart }
    }

    pub fn zero_section(q: V2, chart: ChartId) -> Self {
        Self { q, xi: [0.0; 2], chart }
    }

    /// Packs the first `n` coordinates of `q` then `xi`.
    pub fn pack(&self, n: usize, out: &mut [f64]) {
        out[..n].copy_from_slice(&self.q[..n]);
        out[n..2 * n].copy_from_slice(&self.xi[..n]);
    }

    pub fn unpack(n: usize, y: &[f64], chart: ChartId) -> Self {
        let mut s = Self::in_chart([0.0; 2], [0.0; 2], chart);
        s.q[..n].copy_from_slice(&y[..n]);
        s.xi[..n].copy_from_slice(&y[n..2 * n]);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub dim: usize,
    pub periods: V2,
    /// Colatitude below which a sphere state is moved to the other chart.
    pub switch_threshold: f64,
}

/// Metric data and curvature at one chart point.
///
/// Index conventions: `dg[k][i][j]` is the k-th partial of `g_ij`,
/// `christoffel[k][i][j]` is the symbol with upper index k, and
/// `riemann[l][k][i][j]` is the component with `R(d_i, d_j) d_k = riemann[l][k][i][j] d_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJet {
    pub dim: usize,
    pub g: M2,
    pub g_inv: M2,
    pub dg: [M2; 2],
    pub dg_inv: [M2; 2],
    pub d2g_inv: [[M2; 2]; 2],
    pub christoffel: [M2; 2],
    pub riemann: [[M2; 2]; 2],
}

impl ManifoldSpec {
    pub fn circle() -> Self {
        Self { kind: ManifoldKind::Circle, dim: 1, periods: [TAU, TAU], switch_threshold: PI / 6.0 }
    }

    pub fn flat_torus(dim: usize) -> Self {
        Self { kind: ManifoldKind::FlatTorus, dim, periods: [TAU, TAU], switch_threshold: PI / 6.0 }
    }

    pub fn sphere() -> Self {
        Self { kind: ManifoldKind::Sphere, dim: 2, periods: [PI, TAU], switch_threshold: PI / 6.0 }
    }

    pub fn with_periods(mut self, periods: V2) -> Self {
        self.periods = periods;
        self
    }

    pub fn with_switch_threshold(mut self, threshold: f64) -> Self {
        self.switch_threshold = threshold;
        self
    }

    pub fn is_flat(&self) -> bool {
        self.kind != ManifoldKind::Sphere
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match self.kind {
            ManifoldKind::Circle if self.dim != 1 => return bad("circle must have dim 1"),
            ManifoldKind::FlatTorus if !(1..=2).contains(&self.dim) => {
                return bad("flat torus must have dim 1 or 2")
            }
            ManifoldKind::Sphere if self.dim != 2 => return bad("sphere must have dim 2"),
            _ => {}
        }
        if self.is_flat() {
            for &p in &self.periods[..self.dim] {
                if !(p.is_finite() && p > 0.0) {
                    return bad("periods must be positive and finite");
                }
            }
        } else if !(self.switch_threshold > 0.0 && self.switch_threshold <= PI / 4.0) {
            return bad("sphere chart switch threshold must lie in (0, pi/4]");
        }
        Ok(())
    }

    /// Upper bound on sectional curvature.
    pub fn sectional_bound(&self) -> f64 {
        if self.is_flat() {
            0.0
        } else {
            1.0
        }
    }

    pub fn charts(&self) -> &'static [ChartId] {
        if self.is_flat() {
            &[ChartId::Main]
        } else {
            &[ChartId::Main, ChartId::Alt]
        }
    }

    pub(crate) fn check_domain(&self, q: V2, chart: ChartId) -> Result<()> {
        if self.kind == ManifoldKind::Sphere {
            let margin = 0.5 * self.switch_threshold;
            if !(q[0] >= margin && q[0] <= PI - margin) {
                return Err(Error::ChartDomain { coords: q, chart: chart.name() });
            }
        }
        Ok(())
    }

    pub fn metric(&self, q: V2) -> M2 {
        match self.kind {
            ManifoldKind::Sphere => {
                let s = q[0].sin();
                [[1.0, 0.0], [0.0, s * s]]
            }
            _ => [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn metric_inverse(&self, q: V2) -> M2 {
        match self.kind {
            ManifoldKind::Sphere => {
                let s = q[0].sin();
                [[1.0, 0.0], [0.0, 1.0 / (s * s)]]
            }
            _ => [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// `g^{-1} xi`.
    pub fn raise(&self, q: V2, xi: V2) -> V2 {
        let gi = self.metric_inverse(q);
        let n = self.dim;
        let mut v = [0.0; 2];
        for i in 0..n {
            for j in 0..n {
                v[i] += gi[i][j] * xi[j];
            }
        }
        v
    }

    pub fn lower(&self, q: V2, v: V2) -> V2 {
        let g = self.metric(q);
        let n = self.dim;
        let mut xi = [0.0; 2];
        for i in 0..n {
            for j in 0..n {
                xi[i] += g[i][j] * v[j];
            }
        }
        xi
    }

    /// Dual norm squared `xi^T g^{-1} xi`.
    pub fn co_norm_sq(&self, q: V2, xi: V2) -> f64 {
        let v = self.raise(q, xi);
        (0..self.dim).map(|i| v[i] * xi[i]).sum()
    }

    pub fn metric_jet(&self, q: V2, chart: ChartId) -> Result<MetricJet> {
        self.check_domain(q, chart)?;
        Ok(self.jet_unchecked(q))
    }

    pub(crate) fn jet_unchecked(&self, q: V2) -> MetricJet {
        let n = self.dim;
        let mut g = [[0.0; 2]; 2];
        let mut dg = [[[0.0; 2]; 2]; 2];
        let mut d2g = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            g[i][i] = 1.0;
        }
        if self.kind == ManifoldKind::Sphere {
            let (s, c) = q[0].sin_cos();
            g[1][1] = s * s;
            dg[0][1][1] = 2.0 * s * c;
            d2g[0][0][1][1] = 2.0 * (c * c - s * s);
        }
        jet_from_metric(n, g, dg, d2g)
    }

    /// Wraps periodic coordinates and, on the sphere, moves points that are
    /// too close to a pole into the other chart.
    pub fn normalize_point(&self, q: V2, chart: ChartId) -> (V2, ChartId) {
        match self.kind {
            ManifoldKind::Sphere => {
                let (q, chart) = if self.needs_switch(q) {
                    let other = chart.other();
                    (sphere::transition_point(q, chart, other), other)
                } else {
                    (q, chart)
                };
                ([q[0], q[1].rem_euclid(TAU)], chart)
            }
            _ => {
                let mut w = q;
                for i in 0..self.dim {
                    w[i] = q[i].rem_euclid(self.periods[i]);
                    if w[i] >= self.periods[i] {
                        w[i] = 0.0;
                    }
                }
                (w, chart)
            }
        }
    }

    pub fn normalize_state(&self, s: &CotangentState) -> CotangentState {
        match self.kind {
            ManifoldKind::Sphere => {
                let mut out = if self.needs_switch(s.q) { sphere::switch_state(s).0 } else { *s };
                out.q[1] = out.q[1].rem_euclid(TAU);
                out
            }
            _ => {
                let (q, chart) = self.normalize_point(s.q, s.chart);
                CotangentState { q, xi: s.xi, chart }
            }
        }
    }

    /// True when a sphere chart point sits inside the polar switching cap.
    pub fn needs_switch(&self, q: V2) -> bool {
        self.kind == ManifoldKind::Sphere
            && (q[0] < self.switch_threshold || q[0] > PI - self.switch_threshold)
    }

    /// Re-expresses a point in the requested chart.
    pub fn point_in_chart(&self, q: V2, from: ChartId, to: ChartId) -> V2 {
        if from == to || self.is_flat() {
            q
        } else {
            sphere::transition_point(q, from, to)
        }
    }

    pub fn state_in_chart(&self, s: &CotangentState, to: ChartId) -> CotangentState {
        if s.chart == to || self.is_flat() {
            *s
        } else {
            sphere::switch_state(s).0
        }
    }

    /// Signed displacement from `a` to `b` in chart coordinates, using the
    /// nearest periodic representative on flat manifolds.
    pub fn displacement(&self, a: V2, b: V2) -> V2 {
        let mut d = [0.0; 2];
        for i in 0..self.dim {
            d[i] = b[i] - a[i];
            if self.is_flat() || i == 1 {
                let p = self.periods[i];
                d[i] -= p * (d[i] / p).round();
            }
        }
        d
    }

    /// Geodesic distance between two points given in possibly different charts.
    pub fn distance(&self, a: V2, ca: ChartId, b: V2, cb: ChartId) -> f64 {
        if self.is_flat() {
            let d = self.displacement(a, b);
            (d[0] * d[0] + d[1] * d[1]).sqrt()
        } else {
            let pa = sphere::embed(a, ca);
            let pb = sphere::embed(b, cb);
            let chord = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt();
            2.0 * (0.5 * chord).min(1.0).asin()
        }
    }
}

fn inv2(n: usize, m: &M2) -> M2 {
    if n == 1 {
        return [[1.0 / m[0][0], 0.0], [0.0, 1.0]];
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

fn mul2(n: usize, a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Inverse metric derivatives, Christoffel symbols and Riemann tensor from
/// the metric and its first two coordinate derivatives.
pub fn jet_from_metric(n: usize, g: M2, dg: [M2; 2], d2g: [[M2; 2]; 2]) -> MetricJet {
    let gi = inv2(n, &g);
    let mut dg_inv = [[[0.0; 2]; 2]; 2];
    for k in 0..n {
        let t = mul2(n, &mul2(n, &gi, &dg[k]), &gi);
        for i in 0..n {
            for j in 0..n {
                dg_inv[k][i][j] = -t[i][j];
            }
        }
    }
    let mut d2g_inv = [[[[0.0; 2]; 2]; 2]; 2];
    for k in 0..n {
        for m in 0..n {
            let a = mul2(n, &mul2(n, &mul2(n, &mul2(n, &gi, &dg[m]), &gi), &dg[k]), &gi);
            let b = mul2(n, &mul2(n, &mul2(n, &mul2(n, &gi, &dg[k]), &gi), &dg[m]), &gi);
            let c = mul2(n, &mul2(n, &gi, &d2g[m][k]), &gi);
            for i in 0..n {
                for j in 0..n {
                    d2g_inv[k][m][i][j] = a[i][j] + b[i][j] - c[i][j];
                }
            }
        }
    }
    let mut gamma = [[[0.0; 2]; 2]; 2];
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let first = dg[i][j][l] + dg[j][i][l] - dg[l][i][j];
                    s += 0.5 * gi[k][l] * first;
                    for m in 0..n {
                        let second = d2g[m][i][j][l] + d2g[m][j][i][l] - d2g[m][l][i][j];
                        dgamma[m][k][i][j] += 0.5 * (dg_inv[m][k][l] * first + gi[k][l] * second);
                    }
                }
                gamma[k][i][j] = s;
            }
        }
    }
    let mut riemann = [[[[0.0; 2]; 2]; 2]; 2];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                    for m in 0..n {
                        r += gamma[l][i][m] * gamma[m][j][k] - gamma[l][j][m] * gamma[m][i][k];
                    }
                    riemann[l][k][i][j] = r;
                }
            }
        }
    }
    MetricJet { dim: n, g, g_inv: gi, dg, dg_inv, d2g_inv, christoffel: gamma, riemann }
}

impl MetricJet {
    /// `<R(x, y) y, x>` with the metric at this point.
    pub fn curvature_form(&self, x: V2, y: V2) -> f64 {
        let n = self.dim;
        let mut out = 0.0;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let r = self.riemann[l][k][i][j] * x[i] * y[j] * y[k];
                        for m in 0..n {
                            out += self.g[l][m] * r * x[m];
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_has_unit_sectional_curvature() {
        let m = ManifoldSpec::sphere();
        for &phi in &[0.6, 1.0, 1.57, 2.3] {
            let jet = m.metric_jet([phi, 0.4], ChartId::Main).unwrap();
            let x = [1.0, 0.0];
            let y = [0.0, 1.0];
            let k = jet.curvature_form(x, y) / (jet.g[0][0] * jet.g[1][1]);
            assert_relative_eq!(k, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_christoffels_match_closed_form() {
        let m = ManifoldSpec::sphere();
        let phi: f64 = 0.9;
        let jet = m.metric_jet([phi, 2.0], ChartId::Main).unwrap();
        assert_relative_eq!(jet.christoffel[0][1][1], -phi.sin() * phi.cos(), epsilon = 1e-14);
        assert_relative_eq!(jet.christoffel[1][0][1], phi.cos() / phi.sin(), epsilon = 1e-14);
        assert_relative_eq!(jet.christoffel[1][1][0], phi.cos() / phi.sin(), epsilon = 1e-14);
    }

    #[test]
    fn flat_torus_jet_is_trivial() {
        let m = ManifoldSpec::flat_torus(2);
        let jet = m.metric_jet([1.0, 2.0], ChartId::Main).unwrap();
        assert_eq!(jet.christoffel, [[[0.0; 2]; 2]; 2]);
        assert_eq!(jet.g_inv, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn pole_is_outside_chart() {
        let m = ManifoldSpec::sphere();
        assert!(matches!(m.metric_jet([0.01, 0.0], ChartId::Main), Err(Error::ChartDomain { .. })));
    }

    #[test]
    fn normalize_wraps_torus() {
        let m = ManifoldSpec::flat_torus(2);
        let (q, _) = m.normalize_point([7.0, -1.0], ChartId::Main);
        assert_relative_eq!(q[0], 7.0 - TAU, epsilon = 1e-15);
        assert_relative_eq!(q[1], TAU - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn validation_rejects_bad_dims() {
        assert!(ManifoldSpec { dim: 2, ..ManifoldSpec::circle() }.validate().is_err());
        assert!(ManifoldSpec::flat_torus(3).validate().is_err());
        assert!(ManifoldSpec::sphere().with_switch_threshold(1.2).validate().is_err());
        assert!(ManifoldSpec::flat_torus(2).validate().is_ok());
    }
}
