use super::{solve_shooting, Interpolant, ShootingOptions, SynthesisField};
use crate::flow::{Flow, RunOptions, StopReason};
use crate::geometry::{ChartId, CotangentState, V2};
use crate::grassmann::{graph_frame, principal_angle, stable_unstable_split, SplitOptions};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Up to `count` solved nodes spread evenly through the grid.
pub fn sample_nodes(field: &SynthesisField, count: usize) -> Vec<usize> {
    let n = field.grid.len();
    let count = count.min(n);
    let mut out: Vec<usize> = (0..count).map(|k| k * n / count.max(1)).collect();
    out.retain(|i| !field.failed_nodes.contains(i));
    out.dedup();
    out
}

/// Largest co-norm distance between the covector of the trajectory started
/// on the graph at each sampled node and the interpolated section, over
/// the time span `[0, t]`.
pub fn invariance_residual(flow: &Flow, field: &SynthesisField, samples: &[usize], t: f64) -> f64 {
    let grid = &field.grid;
    let m = flow.manifold();
    let interps: Vec<Interpolant> = (0..m.dim).map(|k| Interpolant::new(grid, &field.psi_component(k))).collect();
    let opts = RunOptions { switch_charts: true, escape_level: None, record: true };
    samples
        .par_iter()
        .map(|&id| {
            let node = grid.nodes[id];
            let z = CotangentState::in_chart(node.q, field.psi[id], node.chart);
            let Ok(out) = flow.run(&z, 0.0, t, None, &opts, |_, _, _| false) else {
                return f64::INFINITY;
            };
            if out.stop != StopReason::Completed {
                return f64::INFINITY;
            }
            let mut worst: f64 = 0.0;
            for s in &out.trajectory.states {
                let (patch, _) = grid.locate(s.q, s.chart);
                let s = m.state_in_chart(s, grid.patches[patch].chart);
                let mut d = [0.0; 2];
                for (k, interp) in interps.iter().enumerate() {
                    d[k] = s.xi[k] - interp.eval(patch, s.q).0;
                }
                worst = worst.max(m.co_norm_sq(s.q, d).sqrt());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest principal angle between the tangent of the section and the
/// stable subspace of the flow at the sampled nodes.
pub fn tangency_defect(flow: &Flow, field: &SynthesisField, samples: &[usize]) -> crate::Result<f64> {
    let n = flow.dim();
    let angles: Vec<crate::Result<f64>> = samples
        .par_iter()
        .map(|&id| {
            let node = field.grid.nodes[id];
            let z = CotangentState::in_chart(node.q, field.psi[id], node.chart);
            let split = stable_unstable_split(flow, &z, SplitOptions::default())?;
            let slope = DMatrix::from_fn(n, n, |i, j| field.slope[id][i][j]);
            Ok(principal_angle(&graph_frame(&slope), &split.e_minus))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in angles {
        worst = worst.max(a?);
    }
    Ok(worst)
}

/// Nodes where shooting from different endpoint guesses converges to
/// different covectors.
pub fn probe_basins(flow: &Flow, field: &SynthesisField, samples: &[usize], tau: f64, opts: ShootingOptions) -> Vec<usize> {
    let grid = &field.grid;
    let m = flow.manifold();
    let mut flagged: Vec<usize> = samples
        .par_iter()
        .filter_map(|&id| {
            let node = grid.nodes[id];
            let mut guesses: Vec<(V2, ChartId)> = flow.ham.critical.iter().map(|c| (c.q, c.chart)).collect();
            guesses.push((node.q, node.chart));
            guesses.push(field.endpoints[id]);
            for k in 1..=4 {
                let mut q = node.q;
                q[0] += 0.25 * k as f64 * m.periods[0] / 2.0;
                guesses.push(m.normalize_point(q, node.chart));
            }
            let found: Vec<V2> =
                guesses.iter().filter_map(|&g| solve_shooting(flow, node.q, node.chart, tau, Some(g), opts).ok()).map(|r| r.p_star).collect();
            let distinct = found.iter().any(|a| {
                found.iter().any(|b| {
                    let d = [a[0] - b[0], a[1] - b[1]];
                    m.co_norm_sq(node.q, d).sqrt() > 1e-6
                })
            });
            distinct.then_some(id)
        })
        .collect();
    flagged.sort_unstable();
    flagged
}
