use super::spline::Spline;
use crate::error::{Error, Result};
use crate::geometry::{sphere, ChartId, ManifoldKind, ManifoldSpec, V2};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

/// Uniform samples `start + i * step` along one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn spline(&self, values: Vec<f64>) -> Spline {
        if self.periodic {
            Spline::periodic(self.start, self.step, values)
        } else {
            Spline::natural(self.start, self.step, values)
        }
    }

    /// Fractional index of `x`, wrapped for periodic axes.
    fn position(&self, x: f64) -> f64 {
        let s = (x - self.start) / self.step;
        if self.periodic {
            s.rem_euclid(self.count as f64)
        } else {
            s
        }
    }
}

/// A rectangular block of nodes in one chart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Patch {
    pub chart: ChartId,
    pub axes: Vec<Axis>,
    pub offset: usize,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn local(&self, idx: [usize; 2]) -> usize {
        if self.axes.len() == 1 {
            idx[0]
        } else {
            idx[0] * self.axes[1].count + idx[1]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridNode {
    pub q: V2,
    pub chart: ChartId,
    pub patch: usize,
    pub index: [usize; 2],
}

/// Regular grid over the configuration manifold: one periodic patch on the
/// circle and torus, one latitude band per chart on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub manifold: ManifoldSpec,
    pub density: usize,
    pub patches: Vec<Patch>,
    pub nodes: Vec<GridNode>,
}

impl Grid {
    /// `density` nodes per period along each periodic coordinate.
    pub fn new(manifold: &ManifoldSpec, density: usize) -> Result<Self> {
        if density < 16 {
            return Err(Error::InvalidSpec(format!("grid density {density} is below 16")));
        }
        let patches = match manifold.kind {
            ManifoldKind::Circle | ManifoldKind::FlatTorus => {
                let axes = (0..manifold.dim)
                    .map(|i| Axis {
                        start: 0.0,
                        step: manifold.periods[i] / density as f64,
                        count: density,
                        periodic: true,
                    })
                    .collect();
                vec![Patch { chart: ChartId::Main, axes, offset: 0 }]
            }
            ManifoldKind::Sphere => {
                let step = TAU / density as f64;
                let rows = (density / 4).max(2);
                let band_step = FRAC_PI_2 / rows as f64;
                let room = FRAC_PI_4 - 0.5 * manifold.switch_threshold;
                let margin = ((room / band_step).floor() as usize).saturating_sub(1).clamp(1, 3);
                let lat = Axis {
                    start: FRAC_PI_4 - margin as f64 * band_step,
                    step: band_step,
                    count: rows + 1 + 2 * margin,
                    periodic: false,
                };
                let lon = Axis { start: 0.0, step, count: density, periodic: true };
                let first = lat.count * lon.count;
                vec![
                    Patch { chart: ChartId::Main, axes: vec![lat, lon], offset: 0 },
                    Patch { chart: ChartId::Alt, axes: vec![lat, lon], offset: first },
                ]
            }
        };
        let mut nodes = Vec::new();
        for (p, patch) in patches.iter().enumerate() {
            let counts: Vec<usize> = patch.axes.iter().map(|a| a.count).collect();
            let second = if counts.len() > 1 { counts[1] } else { 1 };
            for i in 0..counts[0] {
                for j in 0..second {
                    let mut q = [0.0; 2];
                    q[0] = patch.axes[0].coord(i);
                    if counts.len() > 1 {
                        q[1] = patch.axes[1].coord(j);
                    }
                    nodes.push(GridNode { q, chart: patch.chart, patch: p, index: [i, j] });
                }
            }
        }
        Ok(Self { manifold: manifold.clone(), density, patches, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// False for the auxiliary rows outside the latitude band of a sphere patch.
    pub fn in_band(&self, id: usize) -> bool {
        let node = &self.nodes[id];
        self.patches[node.patch].axes[0].periodic
            || (FRAC_PI_4 - 1e-12..=3.0 * FRAC_PI_4 + 1e-12).contains(&node.q[0])
    }

    pub fn node_id(&self, patch: usize, index: [usize; 2]) -> usize {
        let p = &self.patches[patch];
        p.offset + p.local(index)
    }

    /// Axis neighbours within the patch plus, on the sphere, the closest node
    /// of the other patch where the bands overlap.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let node = &self.nodes[id];
        let patch = &self.patches[node.patch];
        let mut out = Vec::new();
        for (k, axis) in patch.axes.iter().enumerate() {
            for delta in [-1i64, 1] {
                let mut idx = node.index;
                let v = idx[k] as i64 + delta;
                if axis.periodic {
                    idx[k] = v.rem_euclid(axis.count as i64) as usize;
                } else if v < 0 || v >= axis.count as i64 {
                    continue;
                } else {
                    idx[k] = v as usize;
                }
                let nb = self.node_id(node.patch, idx);
                if nb != id && !out.contains(&nb) {
                    out.push(nb);
                }
            }
        }
        if self.patches.len() > 1 {
            let other = 1 - node.patch;
            let q = sphere::transition_point(node.q, node.chart, self.patches[other].chart);
            if let Some(nb) = self.snap(other, q, 0.75) {
                out.push(nb);
            }
        }
        out
    }

    /// Node of `patch` within `tol` grid steps of `q`.
    fn snap(&self, patch: usize, q: V2, tol: f64) -> Option<usize> {
        let p = &self.patches[patch];
        let mut idx = [0usize; 2];
        for (k, axis) in p.axes.iter().enumerate() {
            let s = axis.position(q[k]);
            let r = s.round();
            if (s - r).abs() > tol {
                return None;
            }
            let r = if axis.periodic { (r as usize) % axis.count } else { r as usize };
            if !axis.periodic && (s < -0.5 || r >= axis.count) {
                return None;
            }
            idx[k] = r;
        }
        Some(self.node_id(patch, idx))
    }

    /// Patch best suited to evaluate at `q` (given in `chart`), with `q`
    /// expressed in that patch's chart.
    pub fn locate(&self, q: V2, chart: ChartId) -> (usize, V2) {
        if self.patches.len() == 1 {
            return (0, q);
        }
        let own = self.patches.iter().position(|p| p.chart == chart).unwrap_or(0);
        let other = 1 - own;
        let q_other = sphere::transition_point(q, chart, self.patches[other].chart);
        if (q[0] - FRAC_PI_2).abs() <= (q_other[0] - FRAC_PI_2).abs() {
            (own, q)
        } else {
            (other, q_other)
        }
    }

    /// Node closest to `q`.
    pub fn nearest(&self, q: V2, chart: ChartId) -> usize {
        let (patch, qp) = self.locate(q, chart);
        let p = &self.patches[patch];
        let mut idx = [0usize; 2];
        for (k, axis) in p.axes.iter().enumerate() {
            let s = axis.position(qp[k]).round();
            idx[k] = if axis.periodic {
                (s as usize) % axis.count
            } else {
                s.clamp(0.0, (axis.count - 1) as f64) as usize
            };
        }
        self.node_id(patch, idx)
    }

    /// Spline along axis `k` of a per-node scalar, through the line whose
    /// other index is `fixed`.
    pub fn line_spline(&self, patch: usize, k: usize, fixed: usize, values: &[f64]) -> Spline {
        let axis = self.patches[patch].axes[k];
        let vals = (0..axis.count)
            .map(|i| {
                let idx = if k == 0 { [i, fixed] } else { [fixed, i] };
                values[self.node_id(patch, idx)]
            })
            .collect();
        axis.spline(vals)
    }

    /// Tensor-spline interpolation of a per-node scalar; returns the value and
    /// its coordinate gradient at `q` in the patch chart.
    pub fn interpolate(&self, patch: usize, q: V2, values: &[f64]) -> (f64, V2) {
        Interpolant::new(self, values).eval(patch, q)
    }
}

/// Cubic tensor-spline interpolant of a per-node scalar. Splines along the
/// last axis are built once; the spline across them is built per query.
#[derive(Clone, Debug)]
pub struct Interpolant {
    patches: Vec<(Vec<Axis>, Vec<Spline>)>,
}

impl Interpolant {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        let patches = grid
            .patches
            .iter()
            .enumerate()
            .map(|(p, patch)| {
                let lines = if patch.axes.len() == 1 {
                    vec![grid.line_spline(p, 0, 0, values)]
                } else {
                    (0..patch.axes[0].count).map(|i| grid.line_spline(p, 1, i, values)).collect()
                };
                (patch.axes.clone(), lines)
            })
            .collect();
        Self { patches }
    }

    pub fn eval(&self, patch: usize, q: V2) -> (f64, V2) {
        let (axes, lines) = &self.patches[patch];
        if axes.len() == 1 {
            let (v, d) = lines[0].eval(q[0]);
            return (v, [d, 0.0]);
        }
        let (w, wd): (Vec<f64>, Vec<f64>) = lines.iter().map(|s| s.eval(q[1])).unzip();
        let (v, d0) = axes[0].spline(w).eval(q[0]);
        let d1 = axes[0].spline(wd).value(q[0]);
        (v, [d0, d1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_and_torus_grids() {
        let g = Grid::new(&ManifoldSpec::circle(), 256).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.nodes[128].q[0], std::f64::consts::PI);
        assert_eq!(g.neighbors(0), vec![255, 1]);
        let t = Grid::new(&ManifoldSpec::flat_torus(2), 32).unwrap();
        assert_eq!(t.len(), 1024);
        let id = t.node_id(0, [0, 5]);
        assert_eq!(t.nodes[id].q, [0.0, 5.0 * TAU / 32.0]);
        assert_eq!(t.neighbors(id).len(), 4);
        assert!(Grid::new(&ManifoldSpec::circle(), 8).is_err());
    }

    #[test]
    fn sphere_grid_covers_both_bands() {
        let m = ManifoldSpec::sphere();
        let g = Grid::new(&m, 32).unwrap();
        assert_eq!(g.patches.len(), 2);
        for n in &g.nodes {
            assert!(m.check_domain(n.q, n.chart).is_ok());
        }
        // Every point is within the band of one of the charts.
        for q in [[0.1, 0.3], [1.5, 2.0], [3.0, 5.0]] {
            let (_, qp) = g.locate(q, ChartId::Main);
            assert!(qp[0] >= FRAC_PI_4 - 1e-12 && qp[0] <= 3.0 * FRAC_PI_4 + 1e-12, "{qp:?}");
        }
        let linked = g.nodes.iter().enumerate().filter(|(i, _)| g.neighbors(*i).len() > 4).count();
        assert!(linked > 0);
    }

    #[test]
    fn tensor_interpolation_is_accurate() {
        let t = Grid::new(&ManifoldSpec::flat_torus(2), 64).unwrap();
        let f = |q: V2| q[0].sin() * (2.0 * q[1]).cos();
        let vals: Vec<f64> = t.nodes.iter().map(|n| f(n.q)).collect();
        let q = [1.234, 4.321];
        let (v, d) = t.interpolate(0, q, &vals);
        assert_relative_eq!(v, f(q), epsilon = 1e-5);
        assert_relative_eq!(d[0], q[0].cos() * (2.0 * q[1]).cos(), epsilon = 1e-3);
        assert_relative_eq!(d[1], -2.0 * q[0].sin() * (2.0 * q[1]).sin(), epsilon = 1e-3);
        let s = Grid::new(&ManifoldSpec::sphere(), 64).unwrap();
        let h = |q: V2, c: ChartId| sphere::embed(q, c)[0];
        let vals: Vec<f64> = s.nodes.iter().map(|n| h(n.q, n.chart)).collect();
        for q in [[0.3, 1.0], [1.6, 4.0], [2.9, 0.2]] {
            let (patch, qp) = s.locate(q, ChartId::Main);
            let (v, _) = s.interpolate(patch, qp, &vals);
            assert_relative_eq!(v, h(q, ChartId::Main), epsilon = 1e-5);
        }
    }
}
