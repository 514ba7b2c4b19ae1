//! Explicit Runge-Kutta 8(5,3) pair of Dormand and Prince with adaptive steps.

use super::dop853_tables::{A, B, C, E3, E5, STAGES};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-13, max_step: 1e-2, max_steps: 5_000_000 }
    }
}

/// Stepper state. The caller drives it with [`Dop853::step`] and may replace
/// the solution between steps with [`Dop853::reset`].
pub struct Dop853 {
    n: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    dir: f64,
    h_abs: f64,
    tol: Tolerances,
    k: Vec<f64>,
    y_new: Vec<f64>,
    f_new: Vec<f64>,
    work: Vec<f64>,
    pub steps: usize,
}

impl Dop853 {
    pub fn new<F>(rhs: &mut F, t0: f64, y0: &[f64], direction: f64, tol: Tolerances) -> Self
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y0.len();
        let mut s = Self {
            n,
            t: t0,
            y: y0.to_vec(),
            f: vec![0.0; n],
            dir: if direction < 0.0 { -1.0 } else { 1.0 },
            h_abs: 0.0,
            tol,
            k: vec![0.0; (STAGES + 1) * n],
            y_new: vec![0.0; n],
            f_new: vec![0.0; n],
            work: vec![0.0; n],
            steps: 0,
        };
        rhs(t0, &s.y, &mut s.f);
        s.h_abs = s.initial_step(rhs);
        s
    }

    fn scaled_rms(&self, v: &[f64], scale_of: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let sc = self.tol.atol + scale_of[i].abs() * self.tol.rtol;
            acc += (v[i] / sc).powi(2);
        }
        (acc / self.n as f64).sqrt()
    }

    fn initial_step<F>(&mut self, rhs: &mut F) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let d0 = self.scaled_rms(&self.y, &self.y);
        let d1 = self.scaled_rms(&self.f, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.tol.max_step);
        for i in 0..self.n {
            self.work[i] = self.y[i] + self.dir * h0 * self.f[i];
        }
        let mut f1 = vec![0.0; self.n];
        rhs(self.t + self.dir * h0, &self.work, &mut f1);
        for i in 0..self.n {
            f1[i] -= self.f[i];
        }
        let d2 = self.scaled_rms(&f1, &self.y) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(self.tol.max_step)
    }

    /// Replaces the current solution, e.g. after a chart change.
    pub fn reset<F>(&mut self, rhs: &mut F, y: &[f64])
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.y.copy_from_slice(y);
        rhs(self.t, &self.y, &mut self.f);
    }

    fn stage(&self, s: usize) -> &[f64] {
        &self.k[s * self.n..(s + 1) * self.n]
    }

    fn try_step<F>(&mut self, rhs: &mut F, h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.n;
        self.k[..n].copy_from_slice(&self.f);
        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j * n + i];
                }
                self.work[i] = self.y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s * n);
            rhs(self.t + C[s] * h, &self.work, &mut rest[..n]);
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * self.k[j * n + i];
            }
            self.y_new[i] = self.y[i] + h * acc;
        }
        rhs(self.t + h, &self.y_new, &mut self.f_new);
        self.k[STAGES * n..].copy_from_slice(&self.f_new);
    }

    fn error_norm(&self, h: f64) -> f64 {
        let n = self.n;
        let (mut e5, mut e3) = (0.0, 0.0);
        for i in 0..n {
            let sc = self.tol.atol + self.y[i].abs().max(self.y_new[i].abs()) * self.tol.rtol;
            let (mut a5, mut a3) = (0.0, 0.0);
            for s in 0..=STAGES {
                let kv = self.stage(s)[i];
                a5 += E5[s] * kv;
                a3 += E3[s] * kv;
            }
            e5 += (a5 / sc).powi(2);
            e3 += (a3 / sc).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        let denom = e5 + 0.01 * e3;
        h.abs() * e5 / (denom * n as f64).sqrt()
    }

    /// Bounds the size of the next attempted step.
    pub fn cap_step(&mut self, h_max: f64) {
        self.h_abs = self.h_abs.min(h_max);
    }

    /// Advances by one accepted step, never passing `t_bound`.
    pub fn step<F>(&mut self, rhs: &mut F, t_bound: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        if self.steps >= self.tol.max_steps {
            return Err(Error::TooManySteps(self.tol.max_steps));
        }
        let min_step = 10.0 * (next_toward(self.t, self.dir) - self.t).abs();
        self.h_abs = self.h_abs.min(self.tol.max_step).max(min_step);
        let mut rejected = false;
        loop {
            if self.h_abs < min_step {
                return Err(Error::StepTooSmall { time: self.t });
            }
            let mut t_new = self.t + self.dir * self.h_abs;
            if self.dir * (t_new - t_bound) > 0.0 {
                t_new = t_bound;
            }
            let h = t_new - self.t;
            let h_used = h.abs();
            self.try_step(rhs, h);
            let err = self.error_norm(h);
            if err.is_finite() && err < 1.0 {
                let mut factor =
                    if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h_used * factor;
                self.t = t_new;
                std::mem::swap(&mut self.y, &mut self.y_new);
                std::mem::swap(&mut self.f, &mut self.f_new);
                self.steps += 1;
                return Ok(());
            }
            let factor = if err.is_finite() { MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT)) } else { MIN_FACTOR };
            self.h_abs = h_used * factor;
            rejected = true;
        }
    }
}

fn next_toward(t: f64, dir: f64) -> f64 {
    let target = if dir > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    if t == target {
        return t;
    }
    let bits = t.to_bits();
    let up = (dir > 0.0) == (t >= 0.0);
    if t == 0.0 {
        return if dir > 0.0 { f64::from_bits(1) } else { -f64::from_bits(1) };
    }
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

/// Integrates to each requested time in turn and returns the samples.
pub fn integrate_samples<F>(rhs: &mut F, t0: f64, y0: &[f64], times: &[f64], tol: Tolerances) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dir = match times.last() {
        Some(&t) if t < t0 => -1.0,
        _ => 1.0,
    };
    let mut st = Dop853::new(rhs, t0, y0, dir, tol);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while dir * (t - st.t) > 0.0 {
            st.step(rhs, t)?;
        }
        out.push(st.y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth_is_exact_to_tolerance() {
        let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = 0.7 * y[0];
        let out = integrate_samples(&mut rhs, 0.0, &[1.0], &[1.0, 5.0], Tolerances::default()).unwrap();
        assert_relative_eq!(out[0][0], 0.7f64.exp(), max_relative = 1e-11);
        assert_relative_eq!(out[1][0], 3.5f64.exp(), max_relative = 1e-11);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let tol = Tolerances { max_step: 0.5, ..Default::default() };
        let out = integrate_samples(&mut rhs, 0.0, &[1.0, 0.0], &[-10.0], tol).unwrap();
        assert_relative_eq!(out[0][0], 10f64.cos(), epsilon = 1e-10);
        assert_relative_eq!(out[0][1], 10f64.sin(), epsilon = 1e-10);
    }

    #[test]
    fn next_toward_moves_one_ulp() {
        assert!(next_toward(1.0, 1.0) > 1.0);
        assert!(next_toward(1.0, -1.0) < 1.0);
        assert!(next_toward(-1.0, 1.0) > -1.0);
        assert!(next_toward(0.0, -1.0) < 0.0);
    }
}
