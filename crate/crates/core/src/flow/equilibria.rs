use crate::error::{Error, Result};
use crate::geometry::{ChartId, ManifoldKind, ManifoldSpec, PotentialSpec, M2, V2};
use serde::Serialize;
use std::f64::consts::{PI, TAU};

/// A zero of `dU` found by Newton refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub q: V2,
    pub chart: ChartId,
    pub value: f64,
    /// Eigenvalues of the Hessian relative to the metric.
    pub curvatures: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Saddle,
    UnstableNode,
    UnstableFocus,
    Center,
    Degenerate,
}

impl EquilibriumKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Saddle => "saddle",
            Self::UnstableNode => "unstable_node",
            Self::UnstableFocus => "unstable_focus",
            Self::Center => "center",
            Self::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumInfo {
    pub q_star: V2,
    pub chart: ChartId,
    pub potential_value: f64,
    /// Eigenvalues `(re, im)` of the linearized flow, two per block.
    pub eigenvalues: Vec<(f64, f64)>,
    pub kind: EquilibriumKind,
    pub blocks: Vec<EquilibriumKind>,
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric 2x2 (or 1x1) matrix,
/// ascending.
pub(crate) fn sym_eigen(n: usize, a: &M2) -> ([f64; 2], M2) {
    if n == 1 {
        return ([a[0][0], 0.0], [[1.0, 0.0], [0.0, 1.0]]);
    }
    let (p, q, r) = (a[0][0], a[0][1], a[1][1]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let (l0, l1) = (mean - rad, mean + rad);
    if q.abs() < 1e-300 {
        return if p <= r { ([p, r], [[1.0, 0.0], [0.0, 1.0]]) } else { ([r, p], [[0.0, 1.0], [1.0, 0.0]]) };
    }
    let v0 = normalize([q, l0 - p]);
    let v1 = [-v0[1], v0[0]];
    ([l0, l1], [[v0[0], v1[0]], [v0[1], v1[1]]])
}

fn normalize(v: V2) -> V2 {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Eigenvalues of `g^{-1} h` for diagonal-free symmetric `g`, computed through
/// the symmetric form `L^{-1} h L^{-T}`.
pub(crate) fn relative_eigen(n: usize, h: &M2, g: &M2) -> [f64; 2] {
    let (a, _) = relative_eigen_vectors(n, h, g);
    a
}

/// Returns eigenvalues and `g`-orthonormal eigenvectors (as columns) of `g^{-1} h`.
pub(crate) fn relative_eigen_vectors(n: usize, h: &M2, g: &M2) -> ([f64; 2], M2) {
    let l = cholesky(n, g);
    let li = lower_inverse(n, &l);
    let mut s = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for m in 0..n {
                    s[i][j] += li[i][k] * h[k][m] * li[j][m];
                }
            }
        }
    }
    let (vals, vecs) = sym_eigen(n, &s);
    let mut out = [[0.0; 2]; 2];
    for c in 0..n {
        for i in 0..n {
            for k in 0..n {
                out[i][c] += li[k][i] * vecs[k][c];
            }
        }
    }
    (vals, out)
}

pub(crate) fn cholesky(n: usize, g: &M2) -> M2 {
    if n == 1 {
        return [[g[0][0].sqrt(), 0.0], [0.0, 1.0]];
    }
    let l00 = g[0][0].sqrt();
    let l10 = g[1][0] / l00;
    let l11 = (g[1][1] - l10 * l10).sqrt();
    [[l00, 0.0], [l10, l11]]
}

pub(crate) fn lower_inverse(n: usize, l: &M2) -> M2 {
    if n == 1 {
        return [[1.0 / l[0][0], 0.0], [0.0, 1.0]];
    }
    [[1.0 / l[0][0], 0.0], [-l[1][0] / (l[0][0] * l[1][1]), 1.0 / l[1][1]]]
}

fn potential_scale(p: &PotentialSpec) -> f64 {
    let s: f64 = p.trig.iter().map(|t| t.cos_amp.abs() + t.sin_amp.abs()).sum::<f64>()
        + p.sphere.iter().map(|(_, c)| c.abs()).sum::<f64>();
    s.max(1.0)
}

fn seeds(m: &ManifoldSpec) -> Vec<(V2, ChartId)> {
    match m.kind {
        ManifoldKind::Sphere => {
            let mut v = Vec::new();
            for chart in [ChartId::Main, ChartId::Alt] {
                for i in 0..12 {
                    let phi = PI / 4.0 + (PI / 2.0) * (i as f64 + 0.5) / 12.0;
                    for j in 0..32 {
                        v.push(([phi, TAU * j as f64 / 32.0], chart));
                    }
                }
            }
            v
        }
        _ if m.dim == 1 => (0..64).map(|i| ([m.periods[0] * i as f64 / 64.0, 0.0], ChartId::Main)).collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..32 {
                for j in 0..32 {
                    v.push(([m.periods[0] * i as f64 / 32.0, m.periods[1] * j as f64 / 32.0], ChartId::Main));
                }
            }
            v
        }
    }
}

fn newton(m: &ManifoldSpec, p: &PotentialSpec, q0: V2, chart0: ChartId, tol: f64) -> Option<(V2, ChartId)> {
    let n = m.dim;
    let (mut q, mut chart) = (q0, chart0);
    for _ in 0..80 {
        if m.needs_switch(q) {
            let other = chart.other();
            q = m.point_in_chart(q, chart, other);
            chart = other;
        }
        let j = p.jet(m, q, chart);
        let gnorm = (0..n).map(|i| j.grad[i].abs()).fold(0.0, f64::max);
        if gnorm <= tol {
            return Some(m.normalize_point(q, chart));
        }
        // Pseudo-inverse step so that critical manifolds are reached too.
        let (vals, vecs) = sym_eigen(n, &j.hess);
        let cutoff = 1e-10 * vals[..n].iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut step = [0.0; 2];
        for c in 0..n {
            if vals[c].abs() <= cutoff {
                continue;
            }
            let proj: f64 = (0..n).map(|i| vecs[i][c] * j.grad[i]).sum::<f64>() / vals[c];
            for i in 0..n {
                step[i] += proj * vecs[i][c];
            }
        }
        if step == [0.0; 2] {
            return None;
        }
        let len = (step[0] * step[0] + step[1] * step[1]).sqrt();
        let damp = if len > 0.5 { 0.5 / len } else { 1.0 };
        for i in 0..n {
            q[i] -= damp * step[i];
        }
    }
    None
}

/// Critical points of the potential, deduplicated, each with its metric-relative
/// Hessian spectrum and a degeneracy flag.
pub fn find_equilibria(m: &ManifoldSpec, p: &PotentialSpec) -> Vec<CriticalPoint> {
    let n = m.dim;
    let scale = potential_scale(p);
    let tol = 1e-12 * scale;
    let mut out: Vec<CriticalPoint> = Vec::new();
    for (q0, c0) in seeds(m) {
        let Some((q, chart)) = newton(m, p, q0, c0, tol) else { continue };
        if out.iter().any(|c| m.distance(c.q, c.chart, q, chart) < 1e-6) {
            continue;
        }
        let j = p.jet(m, q, chart);
        let g = m.metric(q);
        let k = relative_eigen(n, &j.hess, &g);
        let curvatures = k[..n].to_vec();
        let degenerate = curvatures.iter().any(|x| x.abs() < 1e-8 * scale);
        out.push(CriticalPoint { q, chart, value: j.value, curvatures, degenerate });
    }
    out.sort_by(|a, b| {
        (a.chart, a.q[0], a.q[1]).partial_cmp(&(b.chart, b.q[0], b.q[1])).unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Linear type of the equilibrium `0_{q*}` of the discounted flow.
pub fn classify_critical(c: &CriticalPoint, alpha: f64) -> Result<EquilibriumInfo> {
    if c.degenerate {
        return Err(Error::Degenerate(c.q));
    }
    let mut eigenvalues = Vec::new();
    let mut blocks = Vec::new();
    for &kappa in &c.curvatures {
        let disc = alpha * alpha - 4.0 * kappa;
        let kind = if kappa < 0.0 {
            EquilibriumKind::Saddle
        } else if disc >= 0.0 {
            EquilibriumKind::UnstableNode
        } else if alpha > 0.0 {
            EquilibriumKind::UnstableFocus
        } else {
            EquilibriumKind::Center
        };
        if disc >= 0.0 {
            let r = disc.sqrt();
            eigenvalues.push((0.5 * (alpha + r), 0.0));
            eigenvalues.push((0.5 * (alpha - r), 0.0));
        } else {
            let r = (-disc).sqrt();
            eigenvalues.push((0.5 * alpha, 0.5 * r));
            eigenvalues.push((0.5 * alpha, -0.5 * r));
        }
        blocks.push(kind);
    }
    let kind = [
        EquilibriumKind::Saddle,
        EquilibriumKind::UnstableFocus,
        EquilibriumKind::Center,
        EquilibriumKind::UnstableNode,
    ]
    .into_iter()
    .find(|k| blocks.contains(k))
    .unwrap_or(EquilibriumKind::Degenerate);
    Ok(EquilibriumInfo { q_star: c.q, chart: c.chart, potential_value: c.value, eigenvalues, kind, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TrigTerm;
    use approx::assert_relative_eq;

    #[test]
    fn pendulum_has_two_equilibria() {
        let eq = find_equilibria(&ManifoldSpec::circle(), &PotentialSpec::pendulum());
        assert_eq!(eq.len(), 2);
        assert!(eq[0].q[0].abs() < 1e-12);
        assert_relative_eq!(eq[1].q[0], PI, epsilon = 1e-12);
        assert!(eq.iter().all(|c| !c.degenerate));
    }

    #[test]
    fn pendulum_types_follow_discriminant() {
        let eq = find_equilibria(&ManifoldSpec::circle(), &PotentialSpec::pendulum());
        let saddle = classify_critical(&eq[0], 3.0).unwrap();
        assert_eq!(saddle.kind, EquilibriumKind::Saddle);
        assert_relative_eq!(saddle.eigenvalues[0].0, (3.0 + 13f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(saddle.eigenvalues[1].0, (3.0 - 13f64.sqrt()) / 2.0, epsilon = 1e-12);
        let focus = classify_critical(&eq[1], 1.0).unwrap();
        assert_eq!(focus.kind, EquilibriumKind::UnstableFocus);
        assert_relative_eq!(focus.eigenvalues[0].1, 3f64.sqrt() / 2.0, epsilon = 1e-12);
        let node = classify_critical(&eq[1], 3.0).unwrap();
        assert_eq!(node.kind, EquilibriumKind::UnstableNode);
        assert_relative_eq!(node.eigenvalues[0].0, (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-12);
        for a in [0.5, 1.0, 1.9, 2.1, 2.5, 4.0] {
            let k = classify_critical(&eq[1], a).unwrap().kind;
            assert_eq!(k == EquilibriumKind::UnstableFocus, a < 2.0);
        }
        assert_eq!(classify_critical(&eq[1], 0.0).unwrap().kind, EquilibriumKind::Center);
    }

    #[test]
    fn separable_torus_has_four_equilibria() {
        let m = ManifoldSpec::flat_torus(2);
        let p = PotentialSpec {
            trig: vec![
                TrigTerm { freq: [1, 0], cos_amp: 1.0, sin_amp: 0.0 },
                TrigTerm { freq: [0, 1], cos_amp: 1.0, sin_amp: 0.0 },
            ],
            ..Default::default()
        };
        let eq = find_equilibria(&m, &p);
        assert_eq!(eq.len(), 4);
        let kinds: Vec<_> = eq.iter().map(|c| classify_critical(c, 3.0).unwrap().kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == EquilibriumKind::UnstableNode).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == EquilibriumKind::Saddle).count(), 3);
    }

    #[test]
    fn constant_potential_is_flagged_everywhere() {
        let eq = find_equilibria(&ManifoldSpec::circle(), &PotentialSpec::zero());
        assert_eq!(eq.len(), 64);
        assert!(eq.iter().all(|c| c.degenerate));
        assert!(matches!(classify_critical(&eq[0], 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sphere_height_function_has_poles() {
        let m = ManifoldSpec::sphere();
        let p = PotentialSpec { sphere: vec![(crate::geometry::SphereBasis::Z, 1.0)], ..Default::default() };
        let eq = find_equilibria(&m, &p);
        assert_eq!(eq.len(), 2);
        let mut vals: Vec<f64> = eq.iter().map(|c| c.value).collect();
        vals.sort_by(f64::total_cmp);
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn relative_eigen_matches_direct_solve() {
        let g = [[2.0, 0.3], [0.3, 1.0]];
        let h = [[1.0, -0.4], [-0.4, 0.5]];
        let (k, v) = relative_eigen_vectors(2, &h, &g);
        for c in 0..2 {
            let x = [v[0][c], v[1][c]];
            for i in 0..2 {
                let lhs = h[i][0] * x[0] + h[i][1] * x[1];
                let rhs = k[c] * (g[i][0] * x[0] + g[i][1] * x[1]);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-13);
            }
        }
    }
}
