//! Cubic splines on uniform knots, periodic or natural, with exact integrals.

/// Cubic spline through `values` at `start + i * step`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    start: f64,
    step: f64,
    periodic: bool,
    values: Vec<f64>,
    second: Vec<f64>,
}

/// Solves the cyclic system `m[i-1] + 4 m[i] + m[i+1] = rhs[i]`.
fn solve_cyclic(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    match n {
        0 => return vec![],
        1 => return vec![rhs[0] / 6.0],
        2 => return vec![(4.0 * rhs[0] - 2.0 * rhs[1]) / 12.0, (4.0 * rhs[1] - 2.0 * rhs[0]) / 12.0],
        _ => {}
    }
    // Sherman-Morrison on the tridiagonal part.
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let x = solve_tridiagonal(&diag, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = solve_tridiagonal(&diag, &u);
    let factor = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

/// Thomas algorithm for unit off-diagonals.
fn solve_tridiagonal(diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = 1.0 / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - c[i - 1];
        c[i] = 1.0 / m;
        d[i] = (rhs[i] - d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl Spline {
    /// Periodic spline; the period is `values.len() * step`.
    pub fn periodic(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let k = 6.0 / (step * step);
        let rhs: Vec<f64> =
            (0..n).map(|i| k * (values[(i + 1) % n] - 2.0 * values[i] + values[(i + n - 1) % n])).collect();
        let second = solve_cyclic(&rhs);
        Self { start, step, periodic: true, values, second }
    }

    /// Natural spline (zero second derivative at both ends).
    pub fn natural(start: f64, step: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            let k = 6.0 / (step * step);
            let rhs: Vec<f64> = (1..n - 1).map(|i| k * (values[i + 1] - 2.0 * values[i] + values[i - 1])).collect();
            let inner = solve_tridiagonal(&vec![4.0; n - 2], &rhs);
            second[1..n - 1].copy_from_slice(&inner);
        }
        Self { start, step, periodic: false, values, second }
    }

    pub fn period(&self) -> f64 {
        self.values.len() as f64 * self.step
    }

    /// Interval index and local offset in `[0, step]`.
    fn locate(&self, x: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let mut s = (x - self.start) / self.step;
        if self.periodic {
            s = s.rem_euclid(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            (i, (i + 1) % n, (s - i as f64) * self.step)
        } else {
            let i = (s.floor().max(0.0) as usize).min(n - 2);
            (i, i + 1, (s - i as f64) * self.step)
        }
    }

    /// Value and first derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (i, j, t) = self.locate(x);
        let h = self.step;
        let (yi, yj, mi, mj) = (self.values[i], self.values[j], self.second[i], self.second[j]);
        let a = (h - t) / h;
        let b = t / h;
        let v = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d = (yj - yi) / h + (-(3.0 * a * a - 1.0) * mi + (3.0 * b * b - 1.0) * mj) * h / 6.0;
        (v, d)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Derivative at knot `i`.
    pub fn knot_derivative(&self, i: usize) -> f64 {
        let n = self.values.len();
        let h = self.step;
        if self.periodic || i + 1 < n {
            let j = (i + 1) % n;
            (self.values[j] - self.values[i]) / h - h * (2.0 * self.second[i] + self.second[j]) / 6.0
        } else {
            (self.values[i] - self.values[i - 1]) / h + h * (self.second[i - 1] + 2.0 * self.second[i]) / 6.0
        }
    }

    /// Exact integral over knot interval `[i, i+1]`.
    pub fn interval_integral(&self, i: usize) -> f64 {
        let n = self.values.len();
        let j = (i + 1) % n;
        let h = self.step;
        0.5 * h * (self.values[i] + self.values[j]) - h * h * h * (self.second[i] + self.second[j]) / 24.0
    }

    /// Integral over one full period (periodic splines only).
    pub fn period_integral(&self) -> f64 {
        (0..self.values.len()).map(|i| self.interval_integral(i)).sum()
    }

    /// Integral from knot `from` to knot `to`, walking forward (periodic) or
    /// in the direction of `to` (natural).
    pub fn knot_integral(&self, from: usize, to: usize) -> f64 {
        let n = self.values.len();
        if self.periodic {
            let mut acc = 0.0;
            let mut i = from;
            while i != to {
                acc += self.interval_integral(i);
                i = (i + 1) % n;
            }
            acc
        } else if from <= to {
            (from..to).map(|i| self.interval_integral(i)).sum()
        } else {
            -(to..from).map(|i| self.interval_integral(i)).sum::<f64>()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn periodic_spline_reproduces_smooth_data() {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        let s = Spline::periodic(0.0, h, (0..n).map(|i| (i as f64 * h).sin()).collect());
        for x in [0.1, 1.7, 3.3, 6.2, -0.4, 7.0] {
            let (v, d) = s.eval(x);
            assert_relative_eq!(v, x.sin(), epsilon = 1e-6);
            assert_relative_eq!(d, x.cos(), epsilon = 1e-4);
        }
        for i in [0, 10, 63] {
            assert_relative_eq!(s.knot_derivative(i), (i as f64 * h).cos(), epsilon = 1e-6);
        }
        assert!(s.period_integral().abs() < 1e-14);
        assert_relative_eq!(s.knot_integral(0, 16), 1.0, epsilon = 1e-6);
        assert_relative_eq!(s.knot_integral(48, 16), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn integral_error_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 * PI / n as f64;
            let s = Spline::periodic(0.0, h, (0..n).map(|i| (i as f64 * h).cos().exp()).collect());
            (s.knot_integral(0, n / 4) - quad(|x| x.cos().exp(), 0.0, PI / 2.0)).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 20000;
        let h = (b - a) / n as f64;
        (0..=n).map(|i| {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        }).sum::<f64>() * h / 3.0
    }

    #[test]
    fn natural_spline_interpolates_interior() {
        let n = 41;
        let h = 0.05;
        let s = Spline::natural(1.0, h, (0..n).map(|i| (1.0 + i as f64 * h).powi(2)).collect());
        assert_relative_eq!(s.value(1.0 + 20.5 * h), (1.0 + 20.5 * h).powi(2), epsilon = 1e-7);
        assert_relative_eq!(s.knot_integral(10, 30), (2.5f64.powi(3) - 1.5f64.powi(3)) / 3.0, epsilon = 1e-7);
        assert_relative_eq!(s.knot_integral(30, 10), -(2.5f64.powi(3) - 1.5f64.powi(3)) / 3.0, epsilon = 1e-7);
        for i in 0..n {
            assert_relative_eq!(s.value(1.0 + i as f64 * h), (1.0 + i as f64 * h).powi(2), epsilon = 1e-13);
        }
    }
}
