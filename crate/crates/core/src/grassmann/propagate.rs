use crate::error::Result;
use crate::flow::{Dop853, Flow, Trajectory};
use crate::geometry::ChartId;
use nalgebra::DMatrix;

/// A frame transported by the linearized flow along a stored trajectory.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub frame: DMatrix<f64>,
    pub chart: ChartId,
    /// `(elapsed time, cumulative log growth of the weakest direction)` at
    /// every re-orthonormalization.
    pub growth: Vec<(f64, f64)>,
}

impl Propagation {
    /// Least-squares slope of the recorded log growth.
    pub fn growth_rate(&self) -> Option<f64> {
        log_slope(&self.growth)
    }
}

pub(crate) fn log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let k = samples.len() as f64;
    let mt = samples.iter().map(|s| s.0).sum::<f64>() / k;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / k;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mt) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn invert4(n2: usize, a: &[[f64; 4]; 4]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n2, n2, |i, j| a[i][j]);
    m.try_inverse().expect("chart transition Jacobian is invertible")
}

/// Transports `frame`, based at the trajectory point at time `t_from`, to the
/// point at time `t_to`, in either direction along `traj`. With `reorth`, the
/// frame is re-orthonormalized every `reorth` time units and the log growth
/// of the last Gram-Schmidt direction is accumulated.
pub fn propagate_frame(
    flow: &Flow,
    traj: &Trajectory,
    frame: &DMatrix<f64>,
    t_from: f64,
    t_to: f64,
    reorth: Option<f64>,
) -> Result<Propagation> {
    let m = flow.manifold();
    let n2 = 2 * m.dim;
    let cols = frame.ncols();
    let dir = if t_to < t_from { -1.0 } else { 1.0 };
    let traj_dir = if traj.len() > 1 && traj.last_time() < traj.first_time() { -1.0 } else { 1.0 };

    let mut breaks: Vec<(f64, Option<usize>)> = traj
        .switches_between(t_from, t_to)
        .into_iter()
        .map(|s| (traj.times[s.index], Some(traj.switches.iter().position(|x| x.index == s.index).unwrap())))
        .collect();
    if let Some(dt) = reorth {
        let span = (t_to - t_from).abs();
        let mut k = 1.0;
        while k * dt < span {
            breaks.push((t_from + dir * k * dt, None));
            k += 1.0;
        }
    }
    breaks.push((t_to, None));
    breaks.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));

    let mut y: Vec<f64> = (0..cols).flat_map(|c| (0..n2).map(move |i| (c, i))).map(|(c, i)| frame[(i, c)]).collect();
    let mut t = t_from;
    let mut growth = vec![(0.0, 0.0)];
    let mut log_acc = 0.0;
    let mut chart = traj.chart_at(t_from);
    for (tb, switch) in breaks {
        if dir * (tb - t) > 0.0 {
            let seg_chart = traj.chart_at(0.5 * (t + tb));
            chart = seg_chart;
            let mut rhs = |tt: f64, w: &[f64], dw: &mut [f64]| {
                let mut s = traj.state_at(tt);
                if s.chart != seg_chart {
                    s = m.state_in_chart(&s, seg_chart);
                }
                let a = flow.linearization_unchecked(&s);
                for c in 0..cols {
                    let off = c * n2;
                    for i in 0..n2 {
                        dw[off + i] = (0..n2).map(|j| a[i][j] * w[off + j]).sum();
                    }
                }
            };
            let mut st = Dop853::new(&mut rhs, t, &y, dir, flow.tol);
            while dir * (tb - st.t) > 0.0 {
                st.step(&mut rhs, tb)?;
            }
            y.copy_from_slice(&st.y);
            t = tb;
        }
        if let Some(si) = switch {
            let sw = &traj.switches[si];
            let jac = if dir == traj_dir {
                DMatrix::from_fn(n2, n2, |i, j| sw.jacobian[i][j])
            } else {
                invert4(n2, &sw.jacobian)
            };
            let w = DMatrix::from_column_slice(n2, cols, &y);
            let w = jac * w;
            y.copy_from_slice(w.as_slice());
            chart = if dir == traj_dir { traj.states[sw.index].chart } else { traj.states[sw.index - 1].chart };
        } else if reorth.is_some() && dir * (t_to - tb) > 0.0 {
            let w = DMatrix::from_column_slice(n2, cols, &y);
            let qr = w.qr();
            let r = qr.r();
            log_acc += r[(cols - 1, cols - 1)].abs().ln();
            y.copy_from_slice(qr.q().as_slice());
            growth.push(((tb - t_from).abs(), log_acc));
        }
    }
    let mut w = DMatrix::from_column_slice(n2, cols, &y);
    if reorth.is_some() {
        let qr = w.qr();
        log_acc += qr.r()[(cols - 1, cols - 1)].abs().ln();
        growth.push(((t_to - t_from).abs(), log_acc));
        w = qr.q();
    }
    Ok(Propagation { frame: w, chart, growth })
}
