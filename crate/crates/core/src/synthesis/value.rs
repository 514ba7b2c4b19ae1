use super::{Grid, SynthesisField};
use crate::flow::Flow;
use crate::geometry::{sphere, CotangentState, V2};

/// Feedback `V = g^{-1} psi` per node.
pub fn synthesize_vector_field(grid: &Grid, psi: &[V2]) -> Vec<V2> {
    grid.nodes.iter().zip(psi).map(|(n, p)| grid.manifold.raise(n.q, *p)).collect()
}

/// Fills `u = H(psi) / alpha`, the feedback and the Hamilton-Jacobi spread.
pub fn value_function(flow: &Flow, field: &mut SynthesisField) {
    let alpha = flow.alpha;
    field.u = field
        .grid
        .nodes
        .iter()
        .zip(&field.psi)
        .map(|(n, p)| flow.ham.energy(&CotangentState::in_chart(n.q, *p, n.chart)) / alpha)
        .collect();
    field.v = synthesize_vector_field(&field.grid, &field.psi);
    field.residuals.hj_spread = hj_spread(flow, field);
}

/// Value obtained by integrating `psi` along grid lines from node `base`,
/// where it equals `base_value`. On the sphere the second patch is anchored
/// where the equators cross by interpolating the first.
pub fn path_integrated_value(grid: &Grid, psi: &[V2], base: usize, base_value: f64) -> Vec<f64> {
    let mut u = vec![0.0; grid.len()];
    let comps: Vec<Vec<f64>> = (0..grid.manifold.dim).map(|k| psi.iter().map(|p| p[k]).collect()).collect();
    let first = grid.nodes[base].patch;
    integrate_patch(grid, &comps, first, grid.nodes[base].index, base_value, &mut u);
    if grid.patches.len() > 1 {
        let other = 1 - first;
        // The point where both equators cross.
        let chart = grid.patches[other].chart;
        let anchor = grid.nearest(sphere::chart_of([0.0, 1.0, 0.0], chart), chart);
        let node = grid.nodes[anchor];
        let q = sphere::transition_point(node.q, node.chart, grid.patches[first].chart);
        let (value, _) = grid.interpolate(first, q, &u);
        integrate_patch(grid, &comps, other, node.index, value, &mut u);
    }
    u
}

fn integrate_patch(grid: &Grid, comps: &[Vec<f64>], patch: usize, base: [usize; 2], base_value: f64, u: &mut [f64]) {
    let axes = &grid.patches[patch].axes;
    if axes.len() == 1 {
        let s = grid.line_spline(patch, 0, 0, &comps[0]);
        for i in 0..axes[0].count {
            u[grid.node_id(patch, [i, 0])] = base_value + s.knot_integral(base[0], i);
        }
        return;
    }
    let row = grid.line_spline(patch, 1, base[0], &comps[1]);
    for j in 0..axes[1].count {
        let start = base_value + row.knot_integral(base[1], j);
        let col = grid.line_spline(patch, 0, j, &comps[0]);
        for i in 0..axes[0].count {
            u[grid.node_id(patch, [i, j])] = start + col.knot_integral(base[0], i);
        }
    }
}

/// Spread of `H(psi) - alpha u` over the band nodes, with `u`
/// path-integrated from the node nearest the first critical point.
pub fn hj_spread(flow: &Flow, field: &SynthesisField) -> f64 {
    let grid = &field.grid;
    let base = flow.ham.critical.first().map_or(0, |c| grid.nearest(c.q, c.chart));
    let energy = |i: usize| {
        let n = grid.nodes[i];
        flow.ham.energy(&CotangentState::in_chart(n.q, field.psi[i], n.chart))
    };
    let u = path_integrated_value(grid, &field.psi, base, energy(base) / flow.alpha);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, ui) in u.iter().enumerate().filter(|(i, _)| grid.in_band(*i)) {
        let r = energy(i) - flow.alpha * ui;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    hi - lo
}

/// Largest loop integral of `psi` around the periodic grid lines, and in two
/// dimensions the largest curl at interior nodes.
pub fn exactness_residual(grid: &Grid, psi: &[V2]) -> f64 {
    let comps: Vec<Vec<f64>> = (0..grid.manifold.dim).map(|k| psi.iter().map(|p| p[k]).collect()).collect();
    let mut worst: f64 = 0.0;
    for (p, patch) in grid.patches.iter().enumerate() {
        let axes = &patch.axes;
        if axes.len() == 1 {
            worst = worst.max(grid.line_spline(p, 0, 0, &comps[0]).period_integral().abs());
            continue;
        }
        let rows: Vec<_> = (0..axes[0].count).map(|i| grid.line_spline(p, 1, i, &comps[0])).collect();
        let rows_other: Vec<_> = (0..axes[0].count).map(|i| grid.line_spline(p, 1, i, &comps[1])).collect();
        let cols: Vec<_> = (0..axes[1].count).map(|j| grid.line_spline(p, 0, j, &comps[1])).collect();
        for i in (0..axes[0].count).filter(|&i| grid.in_band(grid.node_id(p, [i, 0]))) {
            worst = worst.max(rows_other[i].period_integral().abs());
            for j in 0..axes[1].count {
                let curl = cols[j].knot_derivative(i) - rows[i].knot_derivative(j);
                worst = worst.max(curl.abs());
            }
        }
        if axes[0].periodic {
            for j in 0..axes[1].count {
                worst = worst.max(grid.line_spline(p, 0, j, &comps[0]).period_integral().abs());
            }
        }
    }
    worst
}
