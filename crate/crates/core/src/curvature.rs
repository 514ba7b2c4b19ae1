//! The curvature operator of the Hamiltonian and the sampled verification of
//! the sufficient condition `R^H_z < (alpha^2 / 4) I` on the sublevel set
//! `B_H = {H <= max U}`.

use crate::error::Result;
use crate::flow::{cholesky, relative_eigen, Hamiltonian};
use crate::geometry::{ChartId, CotangentState, ManifoldKind, M2, V2};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

/// `R^H_z` acting on covectors at `q`.
///
/// `form` is the symmetric bilinear form `<R(x, Z) Z, y> + Hess U (x, y)`
/// with `Z` the vector dual to `xi`; `matrix = form * g^{-1}` is the action on
/// covectors and `eigenvalues` is its (metric-symmetric) spectrum, ascending.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureOperator {
    pub dim: usize,
    pub matrix: M2,
    pub form: M2,
    pub eigenvalues: Vec<f64>,
}

impl CurvatureOperator {
    pub fn top(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    /// Applies the operator to a covector.
    pub fn apply(&self, zeta: V2) -> V2 {
        let mut out = [0.0; 2];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.matrix[i][j] * zeta[j];
            }
        }
        out
    }
}

pub fn curvature_operator(ham: &Hamiltonian, z: &CotangentState) -> Result<CurvatureOperator> {
    let m = &ham.manifold;
    let n = m.dim;
    let jet = m.metric_jet(z.q, z.chart)?;
    let pj = ham.potential.jet(m, z.q, z.chart);
    let mut form = pj.covariant_hessian(&jet);
    if !m.is_flat() {
        let v = m.raise(z.q, z.xi);
        for i in 0..n {
            for mm in 0..n {
                let mut r = 0.0;
                for l in 0..n {
                    for k in 0..n {
                        for j in 0..n {
                            r += jet.g[mm][l] * jet.riemann[l][k][i][j] * v[k] * v[j];
                        }
                    }
                }
                form[i][mm] += r;
            }
        }
    }
    let mut matrix = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                matrix[i][j] += form[i][k] * jet.g_inv[k][j];
            }
        }
    }
    let ev = relative_eigen(n, &form, &jet.g);
    Ok(CurvatureOperator { dim: n, matrix, form, eigenvalues: ev[..n].to_vec() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplingDensity {
    pub q_points: usize,
    pub directions: usize,
    pub radii: usize,
}

impl Default for SamplingDensity {
    fn default() -> Self {
        Self { q_points: 64, directions: 16, radii: 8 }
    }
}

/// Base points of the stratified grid. On the sphere each chart contributes
/// its equatorial band, which together cover the sphere.
fn q_grid(ham: &Hamiltonian, per_dim: usize) -> Vec<(V2, ChartId)> {
    let m = &ham.manifold;
    match m.kind {
        ManifoldKind::Sphere => {
            let mut out = Vec::new();
            let rows = (per_dim / 2).max(1);
            for chart in [ChartId::Main, ChartId::Alt] {
                for i in 0..rows {
                    let phi = FRAC_PI_4 + FRAC_PI_2 * (i as f64 + 0.5) / rows as f64;
                    for j in 0..per_dim {
                        out.push(([phi, TAU * j as f64 / per_dim as f64], chart));
                    }
                }
            }
            out
        }
        _ if m.dim == 1 => (0..per_dim).map(|i| ([m.periods[0] * i as f64 / per_dim as f64, 0.0], ChartId::Main)).collect(),
        _ => {
            let mut out = Vec::with_capacity(per_dim * per_dim);
            for i in 0..per_dim {
                for j in 0..per_dim {
                    out.push((
                        [m.periods[0] * i as f64 / per_dim as f64, m.periods[1] * j as f64 / per_dim as f64],
                        ChartId::Main,
                    ));
                }
            }
            out
        }
    }
}

/// Largest admissible co-norm of `xi` over `q` inside `B_H`.
pub fn radius_bound(ham: &Hamiltonian, q: V2, chart: ChartId) -> f64 {
    (2.0 * (ham.u_max - ham.potential(q, chart)).max(0.0)).sqrt()
}

/// Covector with unit co-norm in the direction `angle` (or `sign` in dim 1).
fn unit_covector(ham: &Hamiltonian, q: V2, angle: f64) -> V2 {
    let m = &ham.manifold;
    if m.dim == 1 {
        return [if angle.cos() >= 0.0 { 1.0 } else { -1.0 }, 0.0];
    }
    let l = cholesky(2, &m.metric(q));
    let u = [angle.cos(), angle.sin()];
    [l[0][0] * u[0], l[1][0] * u[0] + l[1][1] * u[1]]
}

fn state_from_params(ham: &Hamiltonian, q: V2, chart: ChartId, angle: f64, frac: f64) -> CotangentState {
    let r = frac * radius_bound(ham, q, chart);
    let u = unit_covector(ham, q, angle);
    CotangentState::in_chart(q, [r * u[0], r * u[1]], chart)
}

fn direction_angles(dim: usize, count: usize) -> Vec<f64> {
    if dim == 1 {
        vec![0.0, PI]
    } else {
        (0..count).map(|k| TAU * k as f64 / count as f64).collect()
    }
}

/// Stratified samples of `B_H`: base grid x directions x radii, radii running
/// from the zero section to the boundary shell.
pub fn sample_b_h(ham: &Hamiltonian, density: SamplingDensity) -> Vec<CotangentState> {
    let angles = direction_angles(ham.dim(), density.directions);
    let radii = density.radii.max(2);
    let mut out = Vec::new();
    for (q, chart) in q_grid(ham, density.q_points) {
        for &a in &angles {
            for k in 0..radii {
                out.push(state_from_params(ham, q, chart, a, k as f64 / (radii - 1) as f64));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub alpha: f64,
    pub lambda_max: f64,
    pub alpha_critical: f64,
    pub pass: bool,
    pub margin: f64,
    pub samples_used: usize,
    pub argmax_state: CotangentState,
}

fn top_eigen(ham: &Hamiltonian, z: &CotangentState) -> f64 {
    curvature_operator(ham, z).map(|c| c.top()).unwrap_or(f64::NEG_INFINITY)
}

/// Compass search over `(q, angle, radius fraction)` starting from a sample.
fn polish(ham: &Hamiltonian, start: (V2, ChartId, f64, f64), step0: f64) -> (CotangentState, f64) {
    let n = ham.dim();
    let (mut q, chart, mut angle, mut frac) = start;
    let eval = |q: V2, a: f64, f: f64| {
        let z = state_from_params(ham, q, chart, a, f.clamp(0.0, 1.0));
        (top_eigen(ham, &z), z)
    };
    let (mut best, mut best_z) = eval(q, angle, frac);
    let mut step = step0;
    while step > 1e-10 {
        let mut improved = false;
        let mut dirs: Vec<(usize, f64)> = Vec::new();
        for k in 0..n {
            dirs.push((k, step));
            dirs.push((k, -step));
        }
        if n == 2 {
            dirs.push((2, step));
            dirs.push((2, -step));
        }
        dirs.push((3, step));
        dirs.push((3, -step));
        for (k, d) in dirs {
            let (mut q2, mut a2, mut f2) = (q, angle, frac);
            match k {
                0 | 1 => q2[k] += d,
                2 => a2 += d,
                _ => f2 = (f2 + d).clamp(0.0, 1.0),
            }
            if ham.manifold.check_domain(q2, chart).is_err() {
                continue;
            }
            let (v, z) = eval(q2, a2, f2);
            if v > best {
                best = v;
                best_z = z;
                q = q2;
                angle = a2;
                frac = f2;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best_z, best)
}

/// Sampled verification of the curvature condition with a safety margin.
pub fn check_condition(ham: &Hamiltonian, alpha: f64, density: SamplingDensity, safety_margin: f64) -> ConditionReport {
    let angles = direction_angles(ham.dim(), density.directions);
    let radii = density.radii.max(2);
    let grid = q_grid(ham, density.q_points);
    let params: Vec<(V2, ChartId, f64, f64)> = grid
        .iter()
        .flat_map(|&(q, c)| {
            angles.iter().flat_map(move |&a| (0..radii).map(move |k| (q, c, a, k as f64 / (radii - 1) as f64)))
        })
        .collect();
    let values: Vec<f64> = params
        .par_iter()
        .map(|&(q, c, a, f)| top_eigen(ham, &state_from_params(ham, q, c, a, f)))
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let spacing = match ham.manifold.kind {
        ManifoldKind::Sphere => PI / density.q_points as f64,
        _ => ham.manifold.periods[0] / density.q_points as f64,
    };
    let (argmax_state, polished) = polish(ham, params[best], spacing);
    let lambda_max = polished.max(values[best]);
    let margin = 0.25 * alpha * alpha - lambda_max;
    ConditionReport {
        alpha,
        lambda_max,
        alpha_critical: 2.0 * lambda_max.max(0.0).sqrt(),
        pass: margin > safety_margin,
        margin,
        samples_used: params.len(),
        argmax_state,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub pass: bool,
    pub rhs: f64,
    pub max_hessian: f64,
    pub sectional_bound: f64,
}

/// Coarser test `Hess U < (alpha^2/4 - 2 r (max U - min U)) I` with `r` the
/// sectional curvature bound of the manifold.
pub fn corollary_bound(ham: &Hamiltonian, alpha: f64, q_points: usize, safety_margin: f64) -> CorollaryReport {
    let r = ham.manifold.sectional_bound();
    let rhs = 0.25 * alpha * alpha - 2.0 * r * (ham.u_max - ham.u_min);
    let grid = q_grid(ham, q_points);
    let top = |q: V2, c: ChartId| -> f64 {
        let z = CotangentState::zero_section(q, c);
        top_eigen(ham, &z)
    };
    let values: Vec<f64> = grid.par_iter().map(|&(q, c)| top(q, c)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let (mut q, chart) = grid[best];
    let mut val = values[best];
    let mut step = PI / q_points as f64;
    while step > 1e-10 {
        let mut improved = false;
        for k in 0..ham.dim() {
            for d in [step, -step] {
                let mut q2 = q;
                q2[k] += d;
                if ham.manifold.check_domain(q2, chart).is_err() {
                    continue;
                }
                let v = top(q2, chart);
                if v > val {
                    val = v;
                    q = q2;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    CorollaryReport { pass: val + safety_margin < rhs, rhs, max_hessian: val, sectional_bound: r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ManifoldSpec, PotentialSpec, SphereBasis, TrigTerm};
    use approx::assert_relative_eq;

    fn pendulum() -> Hamiltonian {
        Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap()
    }

    fn free_sphere() -> Hamiltonian {
        Hamiltonian::new(ManifoldSpec::sphere(), PotentialSpec::zero()).unwrap()
    }

    #[test]
    fn pendulum_operator_is_second_derivative() {
        let h = pendulum();
        let a = curvature_operator(&h, &CotangentState::new([0.0, 0.0], [0.7, 0.0])).unwrap();
        assert_relative_eq!(a.matrix[0][0], -1.0, epsilon = 1e-15);
        let b = curvature_operator(&h, &CotangentState::new([PI, 0.0], [0.0, 0.0])).unwrap();
        assert_relative_eq!(b.matrix[0][0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn free_sphere_acts_as_identity_on_orthogonal_covectors() {
        let h = free_sphere();
        let q: V2 = [1.1, 0.4];
        let s2 = q[0].sin().powi(2);
        // unit covector along d(lambda) direction and an orthogonal test covector
        let xi = [0.0, s2.sqrt()];
        let op = curvature_operator(&h, &CotangentState::in_chart(q, xi, ChartId::Main)).unwrap();
        let out = op.apply([0.8, 0.0]);
        assert_relative_eq!(out[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(out[1], 0.0, epsilon = 1e-12);
        let along = op.apply(xi);
        assert!(along[0].abs() < 1e-12 && along[1].abs() < 1e-12);
    }

    #[test]
    fn riemann_term_is_quadratic_in_momentum() {
        let h = free_sphere();
        let q = [0.9, 2.0];
        let a = curvature_operator(&h, &CotangentState::in_chart(q, [0.3, -0.2], ChartId::Main)).unwrap();
        let b = curvature_operator(&h, &CotangentState::in_chart(q, [0.6, -0.4], ChartId::Main)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(b.matrix[i][j], 4.0 * a.matrix[i][j], epsilon = 1e-12);
                assert!((a.form[i][j] - a.form[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pendulum_sampling_radii() {
        let h = pendulum();
        let s = sample_b_h(&h, SamplingDensity { q_points: 4, directions: 16, radii: 5 });
        assert_eq!(s.len(), 4 * 2 * 5);
        let at_zero: Vec<_> = s.iter().filter(|z| z.q[0] == 0.0).collect();
        assert!(at_zero.iter().all(|z| z.xi[0].abs() < 1e-7));
        let at_pi: Vec<_> = s.iter().filter(|z| (z.q[0] - PI).abs() < 1e-12).collect();
        let r = at_pi.iter().fold(0.0f64, |a, z| a.max(z.xi[0].abs()));
        assert_relative_eq!(r, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pendulum_condition_reports() {
        let h = pendulum();
        let rep = check_condition(&h, 3.0, SamplingDensity::default(), 1e-6);
        assert_relative_eq!(rep.lambda_max, 1.0, epsilon = 1e-12);
        assert!(rep.pass);
        assert_relative_eq!(rep.alpha_critical, 2.0, epsilon = 1e-12);
        assert_eq!(rep.samples_used, 64 * 2 * 8);
        assert!(!check_condition(&h, 1.5, SamplingDensity::default(), 1e-6).pass);
        let c = corollary_bound(&h, 3.0, 64, 1e-6);
        assert!(c.pass);
        assert_relative_eq!(c.rhs, 2.25);
        assert_relative_eq!(c.max_hessian, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_potential_torus_passes() {
        let h = Hamiltonian::new(ManifoldSpec::flat_torus(2), PotentialSpec::zero()).unwrap();
        let rep = check_condition(&h, 0.5, SamplingDensity { q_points: 8, directions: 4, radii: 3 }, 1e-6);
        assert_eq!(rep.lambda_max, 0.0);
        assert_eq!(rep.alpha_critical, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn free_sphere_corollary_passes_for_small_alpha() {
        let h = free_sphere();
        let c = corollary_bound(&h, 0.1, 16, 1e-6);
        assert_relative_eq!(c.rhs, 0.0025, epsilon = 1e-15);
        assert!(c.pass);
    }

    #[test]
    fn corollary_implies_condition_on_sweep() {
        let sph = Hamiltonian::new(
            ManifoldSpec::sphere(),
            PotentialSpec { sphere: vec![(SphereBasis::Z, 0.25)], ..Default::default() },
        )
        .unwrap();
        let tor = Hamiltonian::new(
            ManifoldSpec::flat_torus(2),
            PotentialSpec {
                trig: vec![TrigTerm { freq: [1, 1], cos_amp: 0.5, sin_amp: 0.1 }],
                ..Default::default()
            },
        )
        .unwrap();
        let dens = SamplingDensity { q_points: 16, directions: 8, radii: 4 };
        for h in [&sph, &tor] {
            for alpha in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0] {
                let c = corollary_bound(h, alpha, 16, 1e-6);
                if c.pass {
                    let rep = check_condition(h, alpha, dens, 1e-6);
                    assert!(rep.pass, "alpha {alpha} {c:?} {rep:?}");
                }
            }
        }
    }
}
