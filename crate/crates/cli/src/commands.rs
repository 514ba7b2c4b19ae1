//! The five commands. Each writes its artifacts under the output directory
//! from a single thread and prints its primary artifact to stdout.

use crate::config::{ConfigError, RunConfig};
use crate::{CliError, Outcome};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use synthesol_core::curvature::{check_condition, corollary_bound, ConditionReport, SamplingDensity};
use synthesol_core::flow::{classify_critical, RunOptions, StopReason, Tolerances as IntegratorTolerances};
use synthesol_core::grassmann::{
    corollary_angle, curvature_identity_residual, lyapunov_rate_check, stable_unstable_split, CurvatureMethod, SplitOptions,
};
use synthesol_core::io::{field_csv, fmt_f64, read_field_csv, to_json, trajectory_csv, write_file, FieldSummary};
use synthesol_core::oracle::{compare_with_synthesis, ComparisonReport, OracleOptions};
use synthesol_core::synthesis::{
    field_from_section, run_horizon_schedule, sample_nodes, tangency_defect, ShootingOptions, SynthesisField,
    SynthesisOptions,
};
use synthesol_core::{CotangentState, EquilibriumKind, Flow, Hamiltonian};

type Result<T> = std::result::Result<T, CliError>;

/// Local bound on the flow-curvature identity residual.
pub const CURVATURE_IDENTITY_TOL: f64 = 1e-4;
/// Angle between the section tangent and the stable subspace.
pub const TANGENCY_TOL: f64 = 1e-4;
/// Angle between the flow direction and the stable subspace on the graph.
pub const FLOW_ANGLE_TOL: f64 = 1e-6;
/// Oracle against synthesis action difference.
pub const ORACLE_VALUE_TOL: f64 = 1e-3;
/// Oracle against synthesis sup-norm path distance.
pub const ORACLE_TRAJ_TOL: f64 = 5e-3;
/// Slack on top of the quadrature tolerance before the oracle counts as
/// beating the synthesis.
pub const ORACLE_SLACK: f64 = 1e-9;
/// Samples of the invariance residual start at the nodes and run this long.
pub const INVARIANCE_TIME: f64 = 5.0;

fn hamiltonian(cfg: &RunConfig) -> Result<Arc<Hamiltonian>> {
    Ok(Arc::new(Hamiltonian::new(cfg.manifold.clone(), cfg.potential.clone())?))
}

pub fn flow(cfg: &RunConfig) -> Result<Flow> {
    let tol = IntegratorTolerances {
        rtol: cfg.tolerances.integrate_rel,
        atol: 0.1 * cfg.tolerances.integrate_rel,
        ..IntegratorTolerances::default()
    };
    Ok(Flow::new(hamiltonian(cfg)?, cfg.alpha).with_tolerances(tol))
}

pub fn synthesis_options(cfg: &RunConfig, guaranteed: Option<bool>) -> SynthesisOptions {
    SynthesisOptions {
        density: cfg.grid_density,
        schedule: cfg.tau_schedule.clone(),
        tol: cfg.tolerances.horizon,
        shooting: ShootingOptions { tol: cfg.tolerances.shooting, ..ShootingOptions::default() },
        invariance_samples: cfg.validate.samples.max(1) * 2,
        invariance_time: INVARIANCE_TIME,
        guaranteed,
        ..SynthesisOptions::default()
    }
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

fn condition(cfg: &RunConfig, ham: &Hamiltonian) -> ConditionReport {
    check_condition(ham, cfg.alpha, SamplingDensity::default(), cfg.safety_margin)
}

/// Curvature condition and its coarse corollary; exit 3 when the sampled
/// condition fails.
pub fn check(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    cfg.require_positive_alpha()?;
    let ham = hamiltonian(cfg)?;
    let report = condition(cfg, &ham);
    let corollary = corollary_bound(&ham, cfg.alpha, SamplingDensity::default().q_points, cfg.safety_margin);
    let json = to_json(&report)?;
    write_file(&cfg.output_dir.join("condition.json"), &json)?;
    write_file(&cfg.output_dir.join("corollary.json"), &to_json(&corollary)?)?;
    emit(stdout, &json)?;
    Ok(if report.pass { Outcome::Pass } else { Outcome::ConditionFail })
}

/// Critical points of the potential with the linearized flow at each.
pub fn equilibria(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    let ham = hamiltonian(cfg)?;
    let n = cfg.manifold.dim;
    let sphere = cfg.manifold.kind == synthesol_core::ManifoldKind::Sphere;
    let mut header: Vec<String> = (1..=n).map(|k| format!("q{k}")).collect();
    if sphere {
        header.push("chart".into());
    }
    header.extend(["U", "kind", "blocks"].map(String::from));
    for k in 1..=2 * n {
        header.push(format!("re{k}"));
        header.push(format!("im{k}"));
    }
    let mut csv = header.join(",") + "\n";
    let mut table = String::new();
    for c in &ham.critical {
        let info = classify_critical(c, cfg.alpha)?;
        let mut cells: Vec<String> = info.q_star[..n].iter().map(|x| fmt_f64(*x)).collect();
        if sphere {
            cells.push(info.chart.name().into());
        }
        cells.push(fmt_f64(info.potential_value));
        cells.push(info.kind.label().into());
        cells.push(info.blocks.iter().map(|b| b.label()).collect::<Vec<_>>().join(";"));
        for (re, im) in &info.eigenvalues {
            cells.push(fmt_f64(*re));
            cells.push(fmt_f64(*im));
        }
        csv += &(cells.join(",") + "\n");
        let eig: Vec<String> = info
            .eigenvalues
            .iter()
            .map(|(re, im)| if *im == 0.0 { format!("{re:.6}") } else { format!("{re:.6}{im:+.6}i") })
            .collect();
        let q: Vec<String> = info.q_star[..n].iter().map(|x| format!("{x:.6}")).collect();
        table += &format!(
            "q = ({})  U = {:.6}  {}  [{}]  eig: {}\n",
            q.join(", "),
            info.potential_value,
            info.kind.label(),
            info.blocks.iter().map(|b| b.label()).collect::<Vec<_>>().join(", "),
            eig.join(" ")
        );
    }
    write_file(&cfg.output_dir.join("equilibria.csv"), &csv)?;
    emit(stdout, &table)?;
    Ok(Outcome::Pass)
}

fn field_paths(dir: &Path, partial: bool) -> (PathBuf, PathBuf) {
    let suffix = if partial { ".partial" } else { "" };
    (dir.join(format!("field.csv{suffix}")), dir.join(format!("field.json{suffix}")))
}

/// Horizon continuation of the synthesis with residuals. Exit 3 when the
/// condition fails without `force`, 4 when the schedule does not converge or
/// several Newton basins are found, 5 when a residual misses its tolerance.
pub fn synthesize(cfg: &RunConfig, force: bool, stdout: &mut dyn Write) -> Result<Outcome> {
    cfg.require_positive_alpha()?;
    let flow = flow(cfg)?;
    let report = condition(cfg, &flow.ham);
    if !report.pass && !force {
        eprintln!(
            "curvature condition fails: lambda_max = {} needs alpha > {}; use --force to synthesize anyway",
            fmt_f64(report.lambda_max),
            fmt_f64(report.alpha_critical)
        );
        return Ok(Outcome::ConditionFail);
    }
    let field = run_horizon_schedule(&flow, &synthesis_options(cfg, Some(report.pass)))?;
    let summary = FieldSummary::new(&field);
    let (csv_path, json_path) = field_paths(&cfg.output_dir, field.is_partial());
    let json = to_json(&summary)?;
    write_file(&csv_path, &field_csv(&field))?;
    write_file(&json_path, &json)?;
    emit(stdout, &json)?;
    for h in &field.history {
        eprintln!("tau = {}  sup change = {}  failed nodes = {}", h.tau, fmt_f64(h.sup_change), h.failed);
    }
    let tol = cfg.tolerances.validation;
    let r = field.residuals;
    Ok(if !field.converged || !field.multi_basin.is_empty() {
        if !field.multi_basin.is_empty() {
            eprintln!("several Newton basins at nodes {:?}", field.multi_basin);
        }
        Outcome::NoConvergence
    } else if !(r.hj_spread < tol && r.exactness < tol && r.invariance < tol) {
        Outcome::ValidationFail
    } else {
        Outcome::Pass
    })
}

/// Per-sample hyperbolicity diagnostics on the graph of the section.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub state: CotangentState,
    pub rate_minus: f64,
    pub rate_plus: f64,
    pub epsilon_gap: f64,
    pub curvature_identity_residual: f64,
    pub lyapunov_min_eig: f64,
    /// Angle between the flow direction and the stable subspace.
    pub flow_angle: f64,
    pub error: Option<String>,
}

fn diagnose(flow: &Flow, z: CotangentState) -> Diagnostic {
    let mut d = Diagnostic {
        state: z,
        rate_minus: f64::NAN,
        rate_plus: f64::NAN,
        epsilon_gap: f64::NAN,
        curvature_identity_residual: f64::NAN,
        lyapunov_min_eig: f64::NAN,
        flow_angle: f64::NAN,
        error: None,
    };
    let method =
        if flow.manifold().is_flat() { CurvatureMethod::Analytic } else { CurvatureMethod::FiniteDifference { h: 1e-2 } };
    let mut errors = Vec::new();
    match curvature_identity_residual(flow, &z, method) {
        Ok(r) => d.curvature_identity_residual = r,
        Err(e) => errors.push(e.to_string()),
    }
    match lyapunov_rate_check(flow, &z, 1e-4) {
        Ok(r) => d.lyapunov_min_eig = r,
        Err(e) => errors.push(e.to_string()),
    }
    match stable_unstable_split(flow, &z, SplitOptions::default()) {
        Ok(split) => {
            d.rate_minus = split.rate_minus;
            d.rate_plus = split.rate_plus;
            d.epsilon_gap = split.epsilon_gap;
            match corollary_angle(flow, &split) {
                Ok(a) => d.flow_angle = a,
                Err(e) => errors.push(e.to_string()),
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        d.error = Some(errors.join("; "));
    }
    d
}

/// One pass/fail line of a validation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn below(name: &'static str, value: f64, tolerance: f64) -> Criterion {
    Criterion { name, value, tolerance, pass: value < tolerance }
}

fn above(name: &'static str, value: f64, tolerance: f64) -> Criterion {
    Criterion { name, value, tolerance, pass: value > tolerance }
}

fn worst(values: impl Iterator<Item = f64>, pick: fn(f64, f64) -> f64, empty: f64) -> f64 {
    values.fold(empty, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { pick(acc, v) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub field: String,
    pub samples: Vec<usize>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
}

fn load_field(cfg: &RunConfig, flow: &Flow, path: &Path) -> Result<SynthesisField> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let rows = read_field_csv(&cfg.manifold, &text)?;
    let tau = *cfg.tau_schedule.last().expect("schedule is nonempty");
    let opts = SynthesisOptions { invariance_samples: cfg.validate.samples, ..synthesis_options(cfg, Some(true)) };
    let psi = rows.iter().map(|r| r.psi).collect();
    let field = field_from_section(flow, psi, tau, &opts)
        .map_err(|e| CliError::Input(format!("{} does not match the configured grid: {e}", path.display())))?;
    for (i, (row, node)) in rows.iter().zip(&field.grid.nodes).enumerate() {
        let n = cfg.manifold.dim;
        if row.chart != node.chart || (0..n).any(|k| (row.q[k] - node.q[k]).abs() > 1e-12) {
            return Err(CliError::Input(format!(
                "{} row {} is not at grid node {:?}",
                path.display(),
                i + 2,
                &node.q[..n]
            )));
        }
    }
    Ok(field)
}

/// Recomputes the residuals of a stored field, runs the hyperbolicity
/// diagnostics at sampled nodes and compares against the oracle; exit 5 when
/// any criterion fails.
pub fn validate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    cfg.require_positive_alpha()?;
    let flow = flow(cfg)?;
    let path = cfg.validate.field.clone().unwrap_or_else(|| cfg.output_dir.join("field.csv"));
    let field = load_field(cfg, &flow, &path)?;
    let samples = sample_nodes(&field, cfg.validate.samples);
    let diagnostics: Vec<Diagnostic> = samples
        .par_iter()
        .map(|&id| {
            let node = field.grid.nodes[id];
            diagnose(&flow, CotangentState::in_chart(node.q, field.psi[id], node.chart))
        })
        .collect();
    let tangency = tangency_defect(&flow, &field, &samples).unwrap_or(f64::NAN);
    let oracle_ids = sample_nodes(&field, cfg.validate.oracle_points);
    let opts = OracleOptions { seed: cfg.seed, ..OracleOptions::default() };
    let comparisons: Vec<std::result::Result<ComparisonReport, String>> = oracle_ids
        .par_iter()
        .map(|&id| {
            let node = field.grid.nodes[id];
            compare_with_synthesis(&flow, &field, node.q, node.chart, cfg.validate.oracle_tau, cfg.validate.oracle_knots, &opts)
                .map_err(|e| e.to_string())
        })
        .collect();
    let reports: Vec<&ComparisonReport> = comparisons.iter().filter_map(|c| c.as_ref().ok()).collect();
    let oracle_failed = comparisons.iter().any(|c| c.is_err());
    let oracle_worst = |f: fn(&ComparisonReport) -> f64| {
        if oracle_failed {
            f64::NAN
        } else {
            worst(reports.iter().map(|r| f(r)), f64::max, 0.0)
        }
    };

    let tol = cfg.tolerances.validation;
    let r = field.residuals;
    let half = 0.5 * flow.alpha;
    let criteria = vec![
        below("invariance", r.invariance, tol),
        below("exactness", r.exactness, tol),
        below("hj_spread", r.hj_spread, tol),
        above("epsilon_gap", worst(diagnostics.iter().map(|d| d.epsilon_gap), f64::min, f64::INFINITY), 0.0),
        below("rate_minus", worst(diagnostics.iter().map(|d| d.rate_minus), f64::max, f64::NEG_INFINITY), half),
        above("rate_plus", worst(diagnostics.iter().map(|d| d.rate_plus), f64::min, f64::INFINITY), half),
        below("curvature_identity_residual", worst(diagnostics.iter().map(|d| d.curvature_identity_residual), f64::max, 0.0), CURVATURE_IDENTITY_TOL),
        above("lyapunov_min_eig", worst(diagnostics.iter().map(|d| d.lyapunov_min_eig), f64::min, f64::INFINITY), 0.0),
        below("tangency", tangency, TANGENCY_TOL),
        below("flow_angle", worst(diagnostics.iter().map(|d| d.flow_angle), f64::max, 0.0), FLOW_ANGLE_TOL),
        below("oracle_delta_value", oracle_worst(|c| c.delta_value), ORACLE_VALUE_TOL),
        below("oracle_delta_traj_sup", oracle_worst(|c| c.delta_traj_sup), ORACLE_TRAJ_TOL),
        below("oracle_gain_over_quadrature", oracle_worst(|c| c.oracle_gain - c.quadrature_tol), ORACLE_SLACK),
    ];
    let pass = criteria.iter().all(|c| c.pass);
    let summary = ValidationSummary { field: path.display().to_string(), samples, criteria, pass };
    let dir = &cfg.output_dir;
    write_file(&dir.join("diagnostics.json"), &to_json(&diagnostics)?)?;
    let comparison_json: Vec<serde_json::Value> = comparisons
        .iter()
        .map(|c| match c {
            Ok(r) => serde_json::to_value(r).expect("report serializes"),
            Err(e) => serde_json::json!({ "error": e }),
        })
        .collect();
    write_file(&dir.join("comparison.json"), &to_json(&comparison_json)?)?;
    let json = to_json(&summary)?;
    write_file(&dir.join("validation.json"), &json)?;
    emit(stdout, &json)?;
    for c in summary.criteria.iter().filter(|c| !c.pass) {
        eprintln!("{} = {} misses {}", c.name, fmt_f64(c.value), fmt_f64(c.tolerance));
    }
    Ok(if pass { Outcome::Pass } else { Outcome::ValidationFail })
}

fn spread(range: [f64; 2], count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (range[0] + range[1])];
    }
    (0..count).map(|k| range[0] + (range[1] - range[0]) * k as f64 / (count - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct PortraitSummary {
    trajectories: usize,
    separatrix_branches: usize,
    escape_energy: f64,
}

/// A fan of trajectories over the `(q, xi)` window and the stable branches
/// of every saddle, traced backward from `E-`.
pub fn portrait(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Outcome> {
    if cfg.manifold.dim != 1 {
        return Err(ConfigError::Unsupported("portrait needs a one-dimensional manifold".into()).into());
    }
    let flow = flow(cfg)?;
    let ham = &flow.ham;
    let p = &cfg.portrait;
    let escape = p.escape_energy.unwrap_or(ham.u_max + 4.0 * (ham.u_max - ham.u_min) + 1.0);
    let opts = RunOptions { switch_charts: true, escape_level: Some(escape), record: true };
    let dir = cfg.output_dir.join("portrait");
    let starts: Vec<CotangentState> = spread(p.q_range, p.q_count)
        .into_iter()
        .flat_map(|q| spread(p.xi_range, p.xi_count).into_iter().map(move |xi| CotangentState::new([q, 0.0], [xi, 0.0])))
        .collect();
    let runs: Vec<_> = starts.par_iter().map(|z| flow.run(z, 0.0, p.span, None, &opts, |_, _, _| false)).collect();
    let mut index = String::from("id,q1,xi1,t_end,stop\n");
    for (k, (z, run)) in starts.iter().zip(runs).enumerate() {
        let out = run?;
        let stop = match out.stop {
            StopReason::Completed => "completed",
            StopReason::Escaped => "escaped",
            StopReason::Blowup => "blowup",
            StopReason::Monitor => "monitor",
        };
        index += &format!("{k},{},{},{},{stop}\n", fmt_f64(z.q[0]), fmt_f64(z.xi[0]), fmt_f64(out.t_end));
        write_file(&dir.join(format!("trajectory_{k:04}.csv")), &trajectory_csv(&cfg.manifold, &out.trajectory))?;
    }
    write_file(&dir.join("index.csv"), &index)?;

    let mut separatrix = String::from("branch,t,q1,xi1,H\n");
    let mut branch = 0;
    for c in &ham.critical {
        if classify_critical(c, cfg.alpha)?.kind != EquilibriumKind::Saddle {
            continue;
        }
        let z0 = CotangentState::zero_section(c.q, c.chart);
        let split = stable_unstable_split(&flow, &z0, SplitOptions::default())?;
        let (dq, dxi) = (split.e_minus[(0, 0)], split.e_minus[(1, 0)]);
        let norm = dq.hypot(dxi);
        for side in [1.0, -1.0] {
            let eps = 1e-6 * side / norm;
            let z = CotangentState::in_chart([c.q[0] + eps * dq, 0.0], [eps * dxi, 0.0], c.chart);
            let out = flow.run(&z, 0.0, -p.separatrix_span, None, &opts, |_, _, _| false)?;
            for line in trajectory_csv(&cfg.manifold, &out.trajectory).lines().skip(1) {
                separatrix += &format!("{branch},{line}\n");
            }
            branch += 1;
        }
    }
    write_file(&dir.join("separatrix.csv"), &separatrix)?;
    let summary = PortraitSummary { trajectories: starts.len(), separatrix_branches: branch, escape_energy: escape };
    emit(stdout, &to_json(&summary)?)?;
    Ok(Outcome::Pass)
}
