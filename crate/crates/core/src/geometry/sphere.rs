//! Two-chart spherical atlas on the unit sphere.
//!
//! The main chart uses colatitude/longitude about the z axis. The alternate
//! chart uses the same formulas about the x axis, so its embedding is the
//! cyclic permutation `(x, y, z) = (e3, e1, e2)` of the standard one.

use super::{ChartId, CotangentState, V2};

pub type P3 = [f64; 3];

fn permute(chart: ChartId, e: P3) -> P3 {
    match chart {
        ChartId::Main => e,
        ChartId::Alt => [e[2], e[0], e[1]],
    }
}

fn unpermute(chart: ChartId, p: P3) -> P3 {
    match chart {
        ChartId::Main => p,
        ChartId::Alt => [p[1], p[2], p[0]],
    }
}

pub fn embed(q: V2, chart: ChartId) -> P3 {
    let (sp, cp) = q[0].sin_cos();
    let (sl, cl) = q[1].sin_cos();
    permute(chart, [sp * cl, sp * sl, cp])
}

/// Chart coordinates of an embedded unit vector.
pub fn chart_of(p: P3, chart: ChartId) -> V2 {
    let e = unpermute(chart, p);
    let r = (e[0] * e[0] + e[1] * e[1]).sqrt();
    let phi = r.atan2(e[2]);
    let lam = e[1].atan2(e[0]);
    [phi, lam.rem_euclid(std::f64::consts::TAU)]
}

/// First and second partials of the embedding with respect to chart coordinates.
pub struct EmbeddingJet {
    pub p: P3,
    pub d: [P3; 2],
    pub dd: [[P3; 2]; 2],
}

pub fn embedding_jet(q: V2, chart: ChartId) -> EmbeddingJet {
    let (sp, cp) = q[0].sin_cos();
    let (sl, cl) = q[1].sin_cos();
    let p = [sp * cl, sp * sl, cp];
    let dphi = [cp * cl, cp * sl, -sp];
    let dlam = [-sp * sl, sp * cl, 0.0];
    let dpp = [-p[0], -p[1], -p[2]];
    let dpl = [-cp * sl, cp * cl, 0.0];
    let dll = [-sp * cl, -sp * sl, 0.0];
    EmbeddingJet {
        p: permute(chart, p),
        d: [permute(chart, dphi), permute(chart, dlam)],
        dd: [[permute(chart, dpp), permute(chart, dpl)], [permute(chart, dpl), permute(chart, dll)]],
    }
}

fn dot(a: &P3, b: &P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn transition_point(q: V2, from: ChartId, to: ChartId) -> V2 {
    if from == to {
        return q;
    }
    chart_of(embed(q, from), to)
}

/// `d q_from / d q_to` evaluated at the point `q_to` of chart `to`.
fn pullback_matrix(q_to: V2, to: ChartId, from: ChartId) -> [[f64; 2]; 2] {
    let q_from = transition_point(q_to, to, from);
    let ef = embedding_jet(q_from, from);
    let et = embedding_jet(q_to, to);
    let s2 = q_from[0].sin().powi(2);
    let ginv = [1.0, 1.0 / s2];
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for a in 0..2 {
            m[i][a] = ginv[i] * dot(&ef.d[i], &et.d[a]);
        }
    }
    m
}

/// Covector at `q_to` obtained by pulling back `xi` from chart `from`.
fn transform_covector(q_to: V2, to: ChartId, from: ChartId, xi: V2) -> V2 {
    let m = pullback_matrix(q_to, to, from);
    [m[0][0] * xi[0] + m[1][0] * xi[1], m[0][1] * xi[0] + m[1][1] * xi[1]]
}

/// Moves a state into the other chart and returns the Jacobian of the
/// transition on `(q, xi)`, used to carry variational columns across.
pub fn switch_state(s: &CotangentState) -> (CotangentState, [[f64; 4]; 4]) {
    let from = s.chart;
    let to = from.other();
    let q2 = transition_point(s.q, from, to);
    let xi2 = transform_covector(q2, to, from, s.xi);
    // dq2/dq is the inverse of dq/dq2.
    let m = pullback_matrix(q2, to, from);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let dq2 = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let mut jac = [[0.0; 4]; 4];
    for a in 0..2 {
        for i in 0..2 {
            jac[a][i] = dq2[a][i];
            jac[2 + a][2 + i] = m[i][a];
        }
    }
    let h = 1e-4;
    for k in 0..2 {
        let eval = |t: f64| {
            let mut q = s.q;
            q[k] += t;
            let qt = transition_point(q, from, to);
            transform_covector(qt, to, from, s.xi)
        };
        let (a, b, c, d) = (eval(-2.0 * h), eval(-h), eval(h), eval(2.0 * h));
        for a_ in 0..2 {
            jac[2 + a_][k] = (a[a_] - 8.0 * b[a_] + 8.0 * c[a_] - d[a_]) / (12.0 * h);
        }
    }
    (CotangentState { q: q2, xi: xi2, chart: to }, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transition_round_trips() {
        let q = [0.7, 1.3];
        let alt = transition_point(q, ChartId::Main, ChartId::Alt);
        let back = transition_point(alt, ChartId::Alt, ChartId::Main);
        assert_relative_eq!(back[0], q[0], epsilon = 1e-13);
        assert_relative_eq!(back[1], q[1], epsilon = 1e-13);
    }

    #[test]
    fn switch_preserves_pairing_and_conorm() {
        let s = CotangentState::in_chart([0.4, 2.0], [0.3, -0.8], ChartId::Main);
        let (t, _) = switch_state(&s);
        let v = [s.xi[0], s.xi[1] / s.q[0].sin().powi(2)];
        let w = [t.xi[0], t.xi[1] / t.q[0].sin().powi(2)];
        let n1 = v[0] * s.xi[0] + v[1] * s.xi[1];
        let n2 = w[0] * t.xi[0] + w[1] * t.xi[1];
        assert_relative_eq!(n1, n2, epsilon = 1e-12);
        let (u, _) = switch_state(&t);
        assert_relative_eq!(u.xi[0], s.xi[0], epsilon = 1e-12);
        assert_relative_eq!(u.xi[1], s.xi[1], epsilon = 1e-12);
    }

    #[test]
    fn embedding_derivatives_match_differences() {
        let q = [1.1, 0.3];
        let j = embedding_jet(q, ChartId::Alt);
        let h = 1e-6;
        for k in 0..2 {
            let mut qp = q;
            qp[k] += h;
            let mut qm = q;
            qm[k] -= h;
            let (a, b) = (embed(qp, ChartId::Alt), embed(qm, ChartId::Alt));
            for c in 0..3 {
                assert_relative_eq!((a[c] - b[c]) / (2.0 * h), j.d[k][c], epsilon = 1e-9);
            }
        }
    }
}
