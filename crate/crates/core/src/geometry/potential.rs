use super::{sphere, ChartId, ManifoldKind, ManifoldSpec, MetricJet, M2, V2};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One Fourier mode `cos_amp * cos(w.q) + sin_amp * sin(w.q)` with
/// `w_i = 2 pi freq_i / period_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: [i32; 2],
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// Low-degree polynomial basis in ambient coordinates on the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereBasis {
    X,
    Y,
    Z,
    Xx,
    Yy,
    Zz,
    Xy,
    Yz,
    Zx,
}

impl SphereBasis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "x" => Self::X,
            "y" => Self::Y,
            "z" => Self::Z,
            "xx" => Self::Xx,
            "yy" => Self::Yy,
            "zz" => Self::Zz,
            "xy" | "yx" => Self::Xy,
            "yz" | "zy" => Self::Yz,
            "zx" | "xz" => Self::Zx,
            _ => return None,
        })
    }

    /// Value, ambient gradient and ambient Hessian at `p`.
    fn eval(self, p: &[f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        let lin = |i: usize, g: &mut [f64; 3]| {
            g[i] = 1.0;
            p[i]
        };
        let v = match self {
            Self::X => lin(0, &mut g),
            Self::Y => lin(1, &mut g),
            Self::Z => lin(2, &mut g),
            Self::Xx | Self::Yy | Self::Zz => {
                let i = match self {
                    Self::Xx => 0,
                    Self::Yy => 1,
                    _ => 2,
                };
                g[i] = 2.0 * p[i];
                h[i][i] = 2.0;
                p[i] * p[i]
            }
            Self::Xy | Self::Yz | Self::Zx => {
                let (i, j) = match self {
                    Self::Xy => (0, 1),
                    Self::Yz => (1, 2),
                    _ => (2, 0),
                };
                g[i] = p[j];
                g[j] = p[i];
                h[i][j] = 1.0;
                h[j][i] = 1.0;
                p[i] * p[j]
            }
        };
        (v, g, h)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub trig: Vec<TrigTerm>,
    pub sphere: Vec<(SphereBasis, f64)>,
    pub constant: f64,
}

/// Potential value with coordinate gradient and coordinate Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialJet {
    pub value: f64,
    pub grad: V2,
    pub hess: M2,
}

impl PotentialJet {
    /// Covariant Hessian `d_ij U - Gamma^k_ij d_k U`.
    pub fn covariant_hessian(&self, jet: &MetricJet) -> M2 {
        let n = jet.dim;
        let mut h = self.hess;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    h[i][j] -= jet.christoffel[k][i][j] * self.grad[k];
                }
            }
        }
        h
    }
}

impl PotentialSpec {
    pub fn pendulum() -> Self {
        Self {
            trig: vec![TrigTerm { freq: [1, 0], cos_amp: 1.0, sin_amp: 0.0 }],
            ..Default::default()
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self, m: &ManifoldSpec) -> Result<()> {
        match m.kind {
            ManifoldKind::Sphere if !self.trig.is_empty() => Err(Error::InvalidSpec(
                "trigonometric potential terms are not defined on the sphere".into(),
            )),
            ManifoldKind::Circle | ManifoldKind::FlatTorus if !self.sphere.is_empty() => Err(
                Error::InvalidSpec("ambient polynomial terms are only defined on the sphere".into()),
            ),
            _ => {
                if m.dim == 1 && self.trig.iter().any(|t| t.freq[1] != 0) {
                    return Err(Error::InvalidSpec(
                        "second frequency component must be zero in dimension 1".into(),
                    ));
                }
                let finite = self.constant.is_finite()
                    && self.trig.iter().all(|t| t.cos_amp.is_finite() && t.sin_amp.is_finite())
                    && self.sphere.iter().all(|(_, c)| c.is_finite());
                if finite {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec("potential coefficients must be finite".into()))
                }
            }
        }
    }

    fn wave(&self, m: &ManifoldSpec, t: &TrigTerm) -> V2 {
        let tau = std::f64::consts::TAU;
        [tau * t.freq[0] as f64 / m.periods[0], tau * t.freq[1] as f64 / m.periods[1]]
    }

    /// `m`-th derivative of `a cos(x) + b sin(x)` at phase `x`.
    fn trig_derivative(t: &TrigTerm, c: f64, s: f64, order: usize) -> f64 {
        let d0 = t.cos_amp * c + t.sin_amp * s;
        let d1 = -t.cos_amp * s + t.sin_amp * c;
        match order % 4 {
            0 => d0,
            1 => d1,
            2 => -d0,
            _ => -d1,
        }
    }

    pub fn jet(&self, m: &ManifoldSpec, q: V2, chart: ChartId) -> PotentialJet {
        let n = m.dim;
        let mut out = PotentialJet { value: self.constant, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
        if m.kind == ManifoldKind::Sphere {
            let e = sphere::embedding_jet(q, chart);
            for &(b, coef) in &self.sphere {
                let (v, g, h) = b.eval(&e.p);
                out.value += coef * v;
                for i in 0..2 {
                    out.grad[i] += coef * dot3(&g, &e.d[i]);
                    for j in 0..2 {
                        let mut hij = dot3(&g, &e.dd[i][j]);
                        for a in 0..3 {
                            for b_ in 0..3 {
                                hij += e.d[i][a] * h[a][b_] * e.d[j][b_];
                            }
                        }
                        out.hess[i][j] += coef * hij;
                    }
                }
            }
            return out;
        }
        for t in &self.trig {
            let w = self.wave(m, t);
            let x: f64 = (0..n).map(|i| w[i] * q[i]).sum();
            let (s, c) = x.sin_cos();
            out.value += Self::trig_derivative(t, c, s, 0);
            let d1 = Self::trig_derivative(t, c, s, 1);
            let d2 = Self::trig_derivative(t, c, s, 2);
            for i in 0..n {
                out.grad[i] += w[i] * d1;
                for j in 0..n {
                    out.hess[i][j] += w[i] * w[j] * d2;
                }
            }
        }
        out
    }

    pub fn value(&self, m: &ManifoldSpec, q: V2, chart: ChartId) -> f64 {
        self.jet(m, q, chart).value
    }

    /// Third coordinate derivatives of a Fourier potential.
    pub fn third(&self, m: &ManifoldSpec, q: V2) -> [[[f64; 2]; 2]; 2] {
        let n = m.dim;
        let mut out = [[[0.0; 2]; 2]; 2];
        for t in &self.trig {
            let w = self.wave(m, t);
            let x: f64 = (0..n).map(|i| w[i] * q[i]).sum();
            let (s, c) = x.sin_cos();
            let d3 = Self::trig_derivative(t, c, s, 3);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out[i][j][k] += w[i] * w[j] * w[k] * d3;
                    }
                }
            }
        }
        out
    }

    /// Fourth coordinate derivatives of a Fourier potential.
    pub fn fourth(&self, m: &ManifoldSpec, q: V2) -> [[[[f64; 2]; 2]; 2]; 2] {
        let n = m.dim;
        let mut out = [[[[0.0; 2]; 2]; 2]; 2];
        for t in &self.trig {
            let w = self.wave(m, t);
            let x: f64 = (0..n).map(|i| w[i] * q[i]).sum();
            let (s, c) = x.sin_cos();
            let d4 = Self::trig_derivative(t, c, s, 4);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            out[i][j][k][l] += w[i] * w[j] * w[k] * w[l] * d4;
                        }
                    }
                }
            }
        }
        out
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
