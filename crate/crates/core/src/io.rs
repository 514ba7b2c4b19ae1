//! Artifact serialization: every float is written with 17 significant digits
//! so that outputs round-trip exactly and are byte-identical across runs.

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{ChartId, ManifoldKind, ManifoldSpec, V2};
use crate::synthesis::{HorizonStep, SynthesisField};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io::{self, Write};
use std::path::Path;

/// Scientific notation with 17 significant digits; non-finite values as
/// `nan`, `inf` and `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON whose floats carry 17 significant digits. serde_json maps
/// non-finite floats to `null` before they reach the formatter.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}{k}"))
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = cells.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// `t,q1[,q2],xi1[,xi2],H`, one row per recorded state, with a trailing
/// `chart` column on the sphere.
pub fn trajectory_csv(manifold: &ManifoldSpec, traj: &Trajectory) -> String {
    let n = manifold.dim;
    let sphere = manifold.kind == ManifoldKind::Sphere;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(numbered("q", n));
    header.extend(numbered("xi", n));
    header.push("H".into());
    if sphere {
        header.push("chart".into());
    }
    let mut out = row(header);
    for ((t, s), h) in traj.times.iter().zip(&traj.states).zip(&traj.energies) {
        let mut cells = vec![fmt_f64(*t)];
        cells.extend(s.q[..n].iter().map(|x| fmt_f64(*x)));
        cells.extend(s.xi[..n].iter().map(|x| fmt_f64(*x)));
        cells.push(fmt_f64(*h));
        if sphere {
            cells.push(s.chart.name().into());
        }
        out.push_str(&row(cells));
    }
    out
}

/// `q1[,q2],psi1[,psi2],u,V1[,V2]`, one row per grid node, with a trailing
/// `chart` column on the sphere.
pub fn field_csv(field: &SynthesisField) -> String {
    let m = &field.grid.manifold;
    let n = m.dim;
    let sphere = m.kind == ManifoldKind::Sphere;
    let mut header: Vec<String> = numbered("q", n).collect();
    header.extend(numbered("psi", n));
    header.push("u".into());
    header.extend(numbered("V", n));
    if sphere {
        header.push("chart".into());
    }
    let mut out = row(header);
    for (i, node) in field.grid.nodes.iter().enumerate() {
        let mut cells: Vec<String> = node.q[..n].iter().map(|x| fmt_f64(*x)).collect();
        cells.extend(field.psi[i][..n].iter().map(|x| fmt_f64(*x)));
        cells.push(fmt_f64(field.u[i]));
        cells.extend(field.v[i][..n].iter().map(|x| fmt_f64(*x)));
        if sphere {
            cells.push(node.chart.name().into());
        }
        out.push_str(&row(cells));
    }
    out
}

/// One row of a stored field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRow {
    pub q: V2,
    pub chart: ChartId,
    pub psi: V2,
}

fn parse_chart(s: &str) -> Option<ChartId> {
    match s {
        "main" => Some(ChartId::Main),
        "alt" => Some(ChartId::Alt),
        _ => None,
    }
}

/// Parses a field CSV written by [`field_csv`] for a manifold of dimension `n`.
pub fn read_field_csv(manifold: &ManifoldSpec, text: &str) -> Result<Vec<FieldRow>> {
    let n = manifold.dim;
    let sphere = manifold.kind == ManifoldKind::Sphere;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Io(format!("field csv lacks column {name}")))
    };
    let q_cols: Vec<usize> = numbered("q", n).map(|c| column(&c)).collect::<Result<_>>()?;
    let psi_cols: Vec<usize> = numbered("psi", n).map(|c| column(&c)).collect::<Result<_>>()?;
    let chart_col = if sphere { Some(column("chart")?) } else { None };
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        let cell = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse().map_err(|_| Error::Io(format!("field csv row {}: bad number {raw:?}", line + 2)))
        };
        let mut r = FieldRow { q: [0.0; 2], chart: ChartId::Main, psi: [0.0; 2] };
        for k in 0..n {
            r.q[k] = cell(q_cols[k])?;
            r.psi[k] = cell(psi_cols[k])?;
        }
        if let Some(c) = chart_col {
            let raw = record.get(c).unwrap_or("");
            r.chart = parse_chart(raw).ok_or_else(|| Error::Io(format!("field csv row {}: bad chart {raw:?}", line + 2)))?;
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Residual sidecar written next to a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSummary {
    pub tau_final: f64,
    pub hj_spread: f64,
    pub exactness: f64,
    pub invariance: f64,
    pub failed_nodes: Vec<usize>,
    pub alpha: f64,
    pub density: usize,
    pub nodes: usize,
    pub converged: bool,
    pub guaranteed: bool,
    pub multi_basin: Vec<usize>,
    pub history: Vec<HorizonStep>,
}

impl FieldSummary {
    pub fn new(field: &SynthesisField) -> Self {
        Self {
            tau_final: field.tau_final,
            hj_spread: field.residuals.hj_spread,
            exactness: field.residuals.exactness,
            invariance: field.residuals.invariance,
            failed_nodes: field.failed_nodes.clone(),
            alpha: field.alpha,
            density: field.grid.density,
            nodes: field.grid.len(),
            converged: field.converged,
            guaranteed: field.guaranteed,
            multi_basin: field.multi_basin.clone(),
            history: field.history.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Flow, Hamiltonian};
    use crate::geometry::{CotangentState, PotentialSpec};
    use crate::synthesis::{build_field, SynthesisOptions};
    use std::sync::Arc;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_uses_the_same_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            c: f64,
        }
        let text = to_json(&S { a: 0.5, b: vec![1.0 / 3.0], c: f64::NAN }).unwrap();
        assert!(text.contains("\"a\": 5.0000000000000000e-1"), "{text}");
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        assert!(text.contains("\"c\": null"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["b"][0].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn field_csv_round_trips() {
        let ham = Hamiltonian::new(ManifoldSpec::circle(), PotentialSpec::pendulum()).unwrap();
        let flow = Flow::new(Arc::new(ham), 3.0);
        let opts = SynthesisOptions { density: 16, invariance_samples: 2, ..Default::default() };
        let field = build_field(&flow, 4.0, &opts).unwrap();
        let text = field_csv(&field);
        assert!(text.starts_with("q1,psi1,u,V1\n"));
        assert_eq!(text.lines().count(), 17);
        let rows = read_field_csv(&ManifoldSpec::circle(), &text).unwrap();
        for (r, (node, psi)) in rows.iter().zip(field.grid.nodes.iter().zip(&field.psi)) {
            assert_eq!(r.q[0], node.q[0]);
            assert_eq!(r.psi[0], psi[0]);
        }
    }

    #[test]
    fn sphere_rows_carry_the_chart() {
        let mut traj = Trajectory::new(2);
        traj.push(0.0, CotangentState::in_chart([1.0, 2.0], [0.5, 0.25], ChartId::Alt), 0.3, [0.0; 4], [0.0; 4]);
        let text = trajectory_csv(&ManifoldSpec::sphere(), &traj);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,q1,q2,xi1,xi2,H,chart"));
        assert!(lines.next().unwrap().ends_with(",alt"));
    }

    #[test]
    fn malformed_field_is_rejected() {
        let m = ManifoldSpec::circle();
        assert!(read_field_csv(&m, "q1,u\n0,0\n").is_err());
        assert!(read_field_csv(&m, "q1,psi1\n0,abc\n").is_err());
    }
}
