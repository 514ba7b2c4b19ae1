//! Optimal synthesis as the limit of finite-horizon transversality sections,
//! with value recovery and invariance and exactness checks.

mod grid;
mod shooting;
mod spline;
mod validate;
mod value;

pub use grid::{Axis, Grid, GridNode, Interpolant, Patch};
pub use shooting::{
    solve_shooting, transversality_jacobian, transversality_residual, ShootingOptions, ShootingResult,
};
pub use spline::Spline;
pub use validate::{invariance_residual, probe_basins, sample_nodes, tangency_defect};
pub use value::{exactness_residual, hj_spread, path_integrated_value, synthesize_vector_field, value_function};

use crate::curvature::{check_condition, SamplingDensity};
use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::geometry::{ChartId, M2, V2};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub hj_spread: f64,
    pub exactness: f64,
    pub invariance: f64,
}

/// Outcome of one horizon of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizonStep {
    pub tau: f64,
    /// Sup-norm change of the section from the previous horizon.
    pub sup_change: f64,
    pub failed: usize,
}

/// The computed synthesis on a grid.
#[derive(Clone, Debug)]
pub struct SynthesisField {
    pub grid: Grid,
    pub alpha: f64,
    pub tau_final: f64,
    pub psi: Vec<V2>,
    pub u: Vec<f64>,
    pub v: Vec<V2>,
    /// Tangent slope of the section per node.
    pub slope: Vec<M2>,
    pub endpoints: Vec<(V2, ChartId)>,
    pub newton_iters: Vec<usize>,
    pub failed_nodes: Vec<usize>,
    pub residuals: Residuals,
    pub history: Vec<HorizonStep>,
    pub converged: bool,
    /// Whether the curvature condition certifies the construction.
    pub guaranteed: bool,
    /// Nodes where different initial guesses gave different sections.
    pub multi_basin: Vec<usize>,
}

impl SynthesisField {
    pub fn is_partial(&self) -> bool {
        !self.failed_nodes.is_empty()
    }

    /// Per-node scalar built from one covector component.
    pub fn psi_component(&self, k: usize) -> Vec<f64> {
        self.psi.iter().map(|p| p[k]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub density: usize,
    pub schedule: Vec<f64>,
    /// Sup-norm tolerance on the change of the section between horizons.
    pub tol: f64,
    pub shooting: ShootingOptions,
    pub invariance_samples: usize,
    pub invariance_time: f64,
    /// Result of the curvature check if already known.
    pub guaranteed: Option<bool>,
    /// Nodes probed for multiple Newton basins when not guaranteed.
    pub basin_samples: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            density: 256,
            schedule: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            tol: 1e-6,
            shooting: ShootingOptions::default(),
            invariance_samples: 32,
            invariance_time: 5.0,
            guaranteed: None,
            basin_samples: 16,
        }
    }
}

/// Breadth-first layers of grid nodes starting from the nodes nearest the
/// critical points of the potential.
fn layers(flow: &Flow, grid: &Grid) -> Vec<Vec<usize>> {
    let mut seen = vec![false; grid.len()];
    let mut current: Vec<usize> = Vec::new();
    for c in &flow.ham.critical {
        let id = grid.nearest(c.q, c.chart);
        if !seen[id] {
            seen[id] = true;
            current.push(id);
        }
    }
    if current.is_empty() {
        seen[0] = true;
        current.push(0);
    }
    let mut out = Vec::new();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &id in &current {
            for nb in grid.neighbors(id) {
                if !seen[nb] {
                    seen[nb] = true;
                    next.push(nb);
                }
            }
        }
        next.sort_unstable();
        out.push(current);
        current = next;
    }
    out
}

/// Solves the shooting problem at every node for one horizon, sweeping
/// outward from the critical points and warm-starting from solved
/// neighbours, then from `previous`, then from the critical points.
fn solve_nodes(
    flow: &Flow,
    grid: &Grid,
    tau: f64,
    previous: Option<&[Option<ShootingResult>]>,
    opts: ShootingOptions,
) -> Vec<Option<ShootingResult>> {
    let mut solved: Vec<Option<ShootingResult>> = vec![None; grid.len()];
    for layer in layers(flow, grid) {
        let results: Vec<(usize, Option<ShootingResult>)> = layer
            .par_iter()
            .map(|&id| {
                let node = grid.nodes[id];
                let mut guesses: Vec<(V2, ChartId)> = grid
                    .neighbors(id)
                    .into_iter()
                    .filter_map(|nb| solved[nb].map(|r| (r.endpoint, r.endpoint_chart)))
                    .collect();
                if let Some(r) = previous.and_then(|p| p[id]) {
                    guesses.push((r.endpoint, r.endpoint_chart));
                }
                guesses.extend(flow.ham.critical.iter().map(|c| (c.q, c.chart)));
                guesses.push((node.q, node.chart));
                let mut tried: Vec<(V2, ChartId)> = Vec::new();
                for g in guesses {
                    if tried.contains(&g) {
                        continue;
                    }
                    tried.push(g);
                    if let Ok(r) = solve_shooting(flow, node.q, node.chart, tau, Some(g), opts) {
                        return (id, Some(r));
                    }
                }
                (id, None)
            })
            .collect();
        for (id, r) in results {
            solved[id] = r;
        }
    }
    solved
}

fn assemble(flow: &Flow, grid: Grid, tau: f64, solved: &[Option<ShootingResult>]) -> SynthesisField {
    let n = grid.len();
    let mut psi = vec![[0.0; 2]; n];
    let mut slope = vec![[[0.0; 2]; 2]; n];
    let mut endpoints = Vec::with_capacity(n);
    let mut newton_iters = vec![0; n];
    let mut failed_nodes = Vec::new();
    for (i, r) in solved.iter().enumerate() {
        match r {
            Some(r) => {
                psi[i] = r.p_star;
                slope[i] = r.slope;
                endpoints.push((r.endpoint, r.endpoint_chart));
                newton_iters[i] = r.newton_iters;
            }
            None => {
                failed_nodes.push(i);
                endpoints.push((grid.nodes[i].q, grid.nodes[i].chart));
            }
        }
    }
    SynthesisField {
        grid,
        alpha: flow.alpha,
        tau_final: tau,
        psi,
        u: vec![0.0; n],
        v: vec![[0.0; 2]; n],
        slope,
        endpoints,
        newton_iters,
        failed_nodes,
        residuals: Residuals::default(),
        history: Vec::new(),
        converged: false,
        guaranteed: false,
        multi_basin: Vec::new(),
    }
}

/// Fills value, feedback and residuals of an assembled field.
fn finish(flow: &Flow, field: &mut SynthesisField, opts: &SynthesisOptions) {
    value_function(flow, field);
    field.residuals.exactness = exactness_residual(&field.grid, &field.psi);
    field.residuals.invariance =
        invariance_residual(flow, field, &sample_nodes(field, opts.invariance_samples), opts.invariance_time);
}

/// Section for a single horizon `tau` with residuals filled.
pub fn build_field(flow: &Flow, tau: f64, opts: &SynthesisOptions) -> Result<SynthesisField> {
    let grid = Grid::new(flow.manifold(), opts.density)?;
    let solved = solve_nodes(flow, &grid, tau, None, opts.shooting);
    let mut field = assemble(flow, grid, tau, &solved);
    field.history.push(HorizonStep { tau, sup_change: f64::INFINITY, failed: field.failed_nodes.len() });
    finish(flow, &mut field, opts);
    Ok(field)
}

/// Field for a stored section `psi` on the grid of `opts.density`, with
/// slopes taken from the interpolant and residuals recomputed.
pub fn field_from_section(flow: &Flow, psi: Vec<V2>, tau: f64, opts: &SynthesisOptions) -> Result<SynthesisField> {
    let grid = Grid::new(flow.manifold(), opts.density)?;
    if psi.len() != grid.len() {
        return Err(Error::InvalidSpec(format!("section has {} nodes, grid has {}", psi.len(), grid.len())));
    }
    let n = grid.manifold.dim;
    let solved: Vec<Option<ShootingResult>> = vec![None; grid.len()];
    let mut field = assemble(flow, grid, tau, &solved);
    field.failed_nodes.clear();
    field.psi = psi;
    let interps: Vec<Interpolant> = (0..n).map(|k| Interpolant::new(&field.grid, &field.psi_component(k))).collect();
    for (i, node) in field.grid.nodes.iter().enumerate() {
        for (k, interp) in interps.iter().enumerate() {
            let (_, d) = interp.eval(node.patch, node.q);
            field.slope[i][k] = d;
        }
    }
    field.guaranteed = opts.guaranteed.unwrap_or(false);
    finish(flow, &mut field, opts);
    Ok(field)
}

/// Walks the horizon schedule until the section stops moving and returns the
/// last field, converged or not.
pub fn run_horizon_schedule(flow: &Flow, opts: &SynthesisOptions) -> Result<SynthesisField> {
    if opts.schedule.is_empty() || opts.schedule.windows(2).any(|w| !(w[1] > w[0])) || !(opts.schedule[0] > 0.0) {
        return Err(Error::InvalidSpec("horizon schedule must be positive and increasing".into()));
    }
    let grid = Grid::new(flow.manifold(), opts.density)?;
    let guaranteed = match opts.guaranteed {
        Some(g) => g,
        None => check_condition(&flow.ham, flow.alpha, SamplingDensity::default(), 0.0).pass,
    };
    let mut previous: Option<Vec<Option<ShootingResult>>> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut last = Vec::new();
    let mut tau_final = opts.schedule[0];
    for &tau in &opts.schedule {
        let solved = solve_nodes(flow, &grid, tau, previous.as_deref(), opts.shooting);
        let failed = solved.iter().filter(|r| r.is_none()).count();
        let sup_change = match &previous {
            None => f64::INFINITY,
            Some(prev) => {
                let mut sup: f64 = 0.0;
                for (a, b) in prev.iter().zip(&solved) {
                    match (a, b) {
                        (Some(a), Some(b)) => {
                            for k in 0..grid.manifold.dim {
                                sup = sup.max((a.p_star[k] - b.p_star[k]).abs());
                            }
                        }
                        _ => sup = f64::INFINITY,
                    }
                }
                sup
            }
        };
        history.push(HorizonStep { tau, sup_change, failed });
        tau_final = tau;
        last = solved.clone();
        previous = Some(solved);
        if failed == 0 && sup_change < opts.tol {
            converged = true;
            break;
        }
    }
    let mut field = assemble(flow, grid, tau_final, &last);
    field.history = history;
    field.converged = converged;
    field.guaranteed = guaranteed;
    finish(flow, &mut field, opts);
    if !guaranteed {
        let ids = sample_nodes(&field, opts.basin_samples);
        field.multi_basin = probe_basins(flow, &field, &ids, field.tau_final, opts.shooting);
    }
    Ok(field)
}

/// Like [`run_horizon_schedule`] but fails when the schedule is exhausted.
pub fn converge_horizon(flow: &Flow, opts: &SynthesisOptions) -> Result<SynthesisField> {
    let field = run_horizon_schedule(flow, opts)?;
    if !field.converged {
        let last = field.history.last().copied();
        return Err(Error::NoConvergence(match last {
            Some(h) => format!("sup change {:e} at tau = {} with {} failed nodes", h.sup_change, h.tau, h.failed),
            None => "empty schedule".into(),
        }));
    }
    Ok(field)
}

#[cfg(test)]
mod tests;
