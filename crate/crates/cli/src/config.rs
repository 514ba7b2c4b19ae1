//! Run configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! file   := line*
//! line   := entry? comment? '\n'
//! entry  := key '=' value
//! key    := word ('.' word)*
//! value  := number | word | list
//! list   := '[' (item (',' item)* ','?)? ']'
//! item   := number | word | tuple
//! tuple  := '(' item (',' item)* ')'
//! comment := '#' any*
//! ```
//!
//! Words are `[A-Za-z_][A-Za-z0-9_./-]*`; numbers follow Rust float syntax.
//! Each key may appear once.

use std::f64::consts::TAU;
use std::path::PathBuf;
use synthesol_core::{ManifoldSpec, PotentialSpec, SphereBasis, TrigTerm};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{line}:{column}: {message}")]
    At { line: usize, column: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("cannot read {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("{0}")]
    Unsupported(String),
}

fn at(line: usize, column: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::At { line, column, message: message.into() }
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Number(f64),
    Word(String),
    List(Vec<Item>),
    Tuple(Vec<Item>),
}

/// A value with the 1-based column where it starts.
#[derive(Clone, Debug, PartialEq)]
struct Item {
    value: Value,
    column: usize,
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key: String,
    key_column: usize,
    value: Item,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(text: &str, line: usize) -> Self {
        Self { chars: text.chars().collect(), pos: 0, line }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t' || c == '\r') {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek(), None | Some('#'))
    }

    fn error(&self, message: impl Into<String>) -> ConfigError {
        at(self.line, self.column(), message)
    }

    fn expect(&mut self, c: char) -> Result<(), ConfigError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn word(&mut self) -> Option<String> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.pos += 1,
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || "_./-".contains(c)) {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn key(&mut self) -> Result<(String, usize), ConfigError> {
        self.skip_ws();
        let column = self.column();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            self.pos += 1;
        }
        let key: String = self.chars[start..self.pos].iter().collect();
        if key.is_empty() || key.starts_with('.') || key.ends_with('.') || key.contains("..") {
            return Err(at(self.line, column, "expected a key"));
        }
        Ok((key, column))
    }

    fn item(&mut self) -> Result<Item, ConfigError> {
        self.skip_ws();
        let column = self.column();
        let value = match self.peek() {
            Some('[') => Value::List(self.sequence('[', ']', true)?),
            Some('(') => Value::Tuple(self.sequence('(', ')', false)?),
            Some(c) if c.is_ascii_digit() || "+-.".contains(c) => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || "+-.".contains(c)) {
                    self.pos += 1;
                }
                let raw: String = self.chars[start..self.pos].iter().collect();
                match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Number(x),
                    _ => return Err(at(self.line, column, format!("invalid number `{raw}`"))),
                }
            }
            _ => match self.word() {
                Some(w) => Value::Word(w),
                None => return Err(self.error("expected a value")),
            },
        };
        Ok(Item { value, column })
    }

    fn sequence(&mut self, open: char, close: char, allow_empty: bool) -> Result<Vec<Item>, ConfigError> {
        self.expect(open)?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(close) && (allow_empty || !items.is_empty()) {
                self.pos += 1;
                return Ok(items);
            }
            items.push(self.item()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(self.error(format!("expected `,` or `{close}`"))),
            }
        }
    }
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut c = Cursor::new(raw, line);
        if c.at_end() {
            continue;
        }
        let (key, key_column) = c.key()?;
        c.expect('=')?;
        let item = c.item()?;
        if !c.at_end() {
            return Err(c.error("unexpected text after value"));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(at(line, key_column, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        entries.push(Entry { line, key, key_column, value: item });
    }
    Ok(entries)
}

/// Tolerances that govern each stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative tolerance of the flow integrator.
    pub integrate_rel: f64,
    /// Newton tolerance of the shooting solver.
    pub shooting: f64,
    /// Sup-norm change of the section that ends the horizon schedule.
    pub horizon: f64,
    /// Bound on the synthesis residuals.
    pub validation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { integrate_rel: 1e-12, shooting: 1e-11, horizon: 1e-6, validation: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidateSettings {
    /// Nodes sampled for the invariance and hyperbolicity diagnostics.
    pub samples: usize,
    /// Nodes compared against the direct-minimization oracle.
    pub oracle_points: usize,
    pub oracle_tau: f64,
    pub oracle_knots: usize,
    pub field: Option<PathBuf>,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self { samples: 16, oracle_points: 3, oracle_tau: 10.0, oracle_knots: 2000, field: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortraitSettings {
    pub q_range: [f64; 2],
    pub xi_range: [f64; 2],
    pub q_count: usize,
    pub xi_count: usize,
    pub span: f64,
    pub separatrix_span: f64,
    /// Energy at which fan trajectories stop; defaults to a multiple of the
    /// potential oscillation above its maximum.
    pub escape_energy: Option<f64>,
}

impl Default for PortraitSettings {
    fn default() -> Self {
        Self {
            q_range: [0.0, TAU],
            xi_range: [-2.5, 2.5],
            q_count: 9,
            xi_count: 5,
            span: 10.0,
            separatrix_span: 60.0,
            escape_energy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    pub potential: PotentialSpec,
    pub alpha: f64,
    /// Line and column of the `alpha` value.
    pub alpha_at: (usize, usize),
    pub grid_density: usize,
    pub tau_schedule: Vec<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub safety_margin: f64,
    pub validate: ValidateSettings,
    pub portrait: PortraitSettings,
}

impl RunConfig {
    /// Error pointing at the `alpha` value when a command needs `alpha > 0`.
    pub fn require_positive_alpha(&self) -> Result<(), ConfigError> {
        if self.alpha > 0.0 {
            Ok(())
        } else {
            Err(at(self.alpha_at.0, self.alpha_at.1, "alpha must be positive for this command"))
        }
    }
}

struct Reader<'a> {
    entries: &'a [Entry],
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    fn take(&mut self, key: &str) -> Option<(&'a Entry, &'a Item)> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some((&self.entries[i], &self.entries[i].value))
    }

    fn number(&mut self, key: &str) -> Result<Option<(f64, (usize, usize))>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((e, item)) => match item.value {
                Value::Number(x) => Ok(Some((x, (e.line, item.column)))),
                _ => Err(at(e.line, item.column, format!("`{key}` expects a number"))),
            },
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.number(key)? {
            None => Ok(default),
            Some((x, _)) if x > 0.0 => Ok(x),
            Some((_, (l, c))) => Err(at(l, c, format!("`{key}` must be positive"))),
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        match self.number(key)? {
            None => Ok(default),
            Some((x, (l, c))) => {
                if x.fract() != 0.0 || x < min as f64 || x > u32::MAX as f64 {
                    Err(at(l, c, format!("`{key}` must be an integer of at least {min}")))
                } else {
                    Ok(x as usize)
                }
            }
        }
    }

    fn word(&mut self, key: &str) -> Result<Option<(String, (usize, usize))>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((e, item)) => match &item.value {
                Value::Word(w) => Ok(Some((w.clone(), (e.line, item.column)))),
                _ => Err(at(e.line, item.column, format!("`{key}` expects a word"))),
            },
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(usize, &'a [Item])>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((e, item)) => match &item.value {
                Value::List(items) => Ok(Some((e.line, items.as_slice()))),
                _ => Err(at(e.line, item.column, format!("`{key}` expects a list `[...]`"))),
            },
        }
    }

    fn numbers(&mut self, key: &str) -> Result<Option<(usize, Vec<(f64, usize)>)>, ConfigError> {
        let Some((line, items)) = self.list(key)? else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for it in items {
            match it.value {
                Value::Number(x) => out.push((x, it.column)),
                _ => return Err(at(line, it.column, format!("`{key}` expects numbers"))),
            }
        }
        Ok(Some((line, out)))
    }

    fn range(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2], ConfigError> {
        match self.numbers(key)? {
            None => Ok(default),
            Some((_, v)) if v.len() == 2 && v[0].0 < v[1].0 => Ok([v[0].0, v[1].0]),
            Some((line, v)) => Err(at(line, v.first().map_or(1, |x| x.1), format!("`{key}` expects [low, high]"))),
        }
    }
}

fn trig_terms(
    r: &mut Reader,
    key: &str,
    dim: usize,
    sine: bool,
    terms: &mut Vec<TrigTerm>,
) -> Result<(), ConfigError> {
    let Some((line, items)) = r.list(key)? else {
        return Ok(());
    };
    let shape = if dim == 1 { "(k, amplitude)" } else { "(k1, k2, amplitude)" };
    for it in items {
        let bad = || at(line, it.column, format!("`{key}` entries are {shape}"));
        let Value::Tuple(parts) = &it.value else {
            return Err(bad());
        };
        if parts.len() != dim + 1 {
            return Err(bad());
        }
        let mut nums = Vec::new();
        for p in parts {
            match p.value {
                Value::Number(x) => nums.push((x, p.column)),
                _ => return Err(bad()),
            }
        }
        let mut freq = [0i32; 2];
        for k in 0..dim {
            let (x, col) = nums[k];
            if x.fract() != 0.0 || x.abs() > 1e6 {
                return Err(at(line, col, "frequencies must be integers"));
            }
            freq[k] = x as i32;
        }
        let amp = nums[dim].0;
        match terms.iter_mut().find(|t| t.freq == freq) {
            Some(t) if sine => t.sin_amp += amp,
            Some(t) => t.cos_amp += amp,
            None => terms.push(TrigTerm {
                freq,
                cos_amp: if sine { 0.0 } else { amp },
                sin_amp: if sine { amp } else { 0.0 },
            }),
        }
    }
    Ok(())
}

fn sphere_terms(r: &mut Reader) -> Result<Vec<(SphereBasis, f64)>, ConfigError> {
    let Some((line, items)) = r.list("potential.sphere")? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for it in items {
        let bad = || at(line, it.column, "`potential.sphere` entries are (basis, coefficient)");
        let Value::Tuple(parts) = &it.value else {
            return Err(bad());
        };
        match parts.as_slice() {
            [Item { value: Value::Word(b), column }, Item { value: Value::Number(c), .. }] => {
                let basis = SphereBasis::parse(b)
                    .ok_or_else(|| at(line, *column, format!("unknown sphere basis `{b}` (x y z xx yy zz xy yz zx)")))?;
                out.push((basis, *c));
            }
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let entries = parse_entries(text)?;
    let mut r = Reader { entries: &entries, used: vec![false; entries.len()] };

    let (kind, kind_at) = r.word("manifold.kind")?.ok_or(ConfigError::Missing("manifold.kind"))?;
    let dim_entry = r.number("manifold.dim")?;
    let mut manifold = match kind.as_str() {
        "circle" => ManifoldSpec::circle(),
        "torus" | "flat_torus" => {
            let dim = match dim_entry {
                None => 2,
                Some((x, _)) if x == 1.0 || x == 2.0 => x as usize,
                Some((_, (l, c))) => return Err(at(l, c, "`manifold.dim` must be 1 or 2")),
            };
            ManifoldSpec::flat_torus(dim)
        }
        "sphere" => ManifoldSpec::sphere(),
        other => return Err(at(kind_at.0, kind_at.1, format!("unknown manifold `{other}` (circle, torus, sphere)"))),
    };
    if let Some((x, (l, c))) = dim_entry {
        if x != manifold.dim as f64 {
            return Err(at(l, c, format!("`manifold.dim` of a {kind} is {}", manifold.dim)));
        }
    }
    if let Some((line, v)) = r.numbers("manifold.periods")? {
        if kind == "sphere" {
            return Err(at(line, v.first().map_or(1, |x| x.1), "the sphere has no periods"));
        }
        if v.len() != manifold.dim || v.iter().any(|x| !(x.0 > 0.0)) {
            return Err(at(line, v.first().map_or(1, |x| x.1), "`manifold.periods` needs one positive period per dimension"));
        }
        let mut periods = manifold.periods;
        for (k, x) in v.iter().enumerate() {
            periods[k] = x.0;
        }
        if manifold.dim == 1 {
            periods[1] = periods[0];
        }
        manifold = manifold.with_periods(periods);
    }

    let mut potential = PotentialSpec::zero();
    trig_terms(&mut r, "potential.cos_coeffs", manifold.dim, false, &mut potential.trig)?;
    trig_terms(&mut r, "potential.sin_coeffs", manifold.dim, true, &mut potential.trig)?;
    potential.sphere = sphere_terms(&mut r)?;
    if let Some((x, _)) = r.number("potential.constant")? {
        potential.constant = x;
    }
    if let Err(e) = potential.validate(&manifold) {
        let line = entries.iter().find(|e| e.key.starts_with("potential.")).map_or(1, |e| e.line);
        return Err(at(line, 1, e.to_string()));
    }

    let (alpha, alpha_at) = r.number("alpha")?.ok_or(ConfigError::Missing("alpha"))?;
    if alpha < 0.0 {
        return Err(at(alpha_at.0, alpha_at.1, "alpha must be nonnegative"));
    }
    let grid_density = r.count("grid_density", 256, 16)?;
    let tau_schedule = match r.numbers("tau_schedule")? {
        None => vec![2.0, 4.0, 8.0, 16.0, 32.0],
        Some((line, v)) => {
            if v.is_empty() {
                return Err(at(line, 1, "`tau_schedule` is empty"));
            }
            for (k, (x, col)) in v.iter().enumerate() {
                if !(*x > 0.0) || (k > 0 && !(*x > v[k - 1].0)) {
                    return Err(at(line, *col, "`tau_schedule` must be positive and increasing"));
                }
            }
            v.into_iter().map(|x| x.0).collect()
        }
    };
    let defaults = Tolerances::default();
    let tolerances = Tolerances {
        integrate_rel: r.positive("tolerances.integrate_rel", defaults.integrate_rel)?,
        shooting: r.positive("tolerances.shooting", defaults.shooting)?,
        horizon: r.positive("tolerances.horizon", defaults.horizon)?,
        validation: r.positive("tolerances.validation", defaults.validation)?,
    };
    let seed = r.count("seed", 0, 0)? as u64;
    let output_dir = r.word("output_dir")?.map_or_else(|| PathBuf::from("out"), |(w, _)| PathBuf::from(w));
    let safety_margin = match r.number("check.safety_margin")? {
        None => 1e-6,
        Some((x, _)) if x >= 0.0 => x,
        Some((_, (l, c))) => return Err(at(l, c, "`check.safety_margin` must be nonnegative")),
    };

    let vd = ValidateSettings::default();
    let validate = ValidateSettings {
        samples: r.count("validate.samples", vd.samples, 1)?,
        oracle_points: r.count("validate.oracle_points", vd.oracle_points, 0)?,
        oracle_tau: r.positive("validate.oracle_tau", vd.oracle_tau)?,
        oracle_knots: r.count("validate.oracle_knots", vd.oracle_knots, 100)?,
        field: r.word("validate.field")?.map(|(w, _)| PathBuf::from(w)),
    };

    let pd = PortraitSettings::default();
    let portrait = PortraitSettings {
        q_range: r.range("portrait.q_range", pd.q_range)?,
        xi_range: r.range("portrait.xi_range", pd.xi_range)?,
        q_count: r.count("portrait.q_count", pd.q_count, 1)?,
        xi_count: r.count("portrait.xi_count", pd.xi_count, 1)?,
        span: r.positive("portrait.span", pd.span)?,
        separatrix_span: r.positive("portrait.separatrix_span", pd.separatrix_span)?,
        escape_energy: r.number("portrait.escape_energy")?.map(|(x, _)| x),
    };

    if let Some(i) = r.used.iter().position(|u| !u) {
        let e = &entries[i];
        return Err(at(e.line, e.key_column, format!("unknown key `{}`", e.key)));
    }

    Ok(RunConfig {
        manifold,
        potential,
        alpha,
        alpha_at,
        grid_density,
        tau_schedule,
        tolerances,
        seed,
        output_dir,
        safety_margin,
        validate,
        portrait,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = "# pendulum\nmanifold.kind = circle\npotential.cos_coeffs = [(1, 1.0)]\nalpha = 3\n";

    fn err(text: &str) -> (usize, usize, String) {
        match parse(text).unwrap_err() {
            ConfigError::At { line, column, message } => (line, column, message),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn pendulum_defaults() {
        let c = parse(PENDULUM).unwrap();
        assert_eq!(c.manifold, ManifoldSpec::circle());
        assert_eq!(c.potential, PotentialSpec::pendulum());
        assert_eq!(c.alpha, 3.0);
        assert_eq!(c.alpha_at, (4, 9));
        assert_eq!(c.grid_density, 256);
        assert_eq!(c.tau_schedule, vec![2.0, 4.0, 8.0, 16.0, 32.0]);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn full_torus_config() {
        let text = "manifold.kind=torus\nmanifold.dim=2\nmanifold.periods=[6.283185307179586, 3.0]\n\
                    potential.cos_coeffs=[(1,0,1.0),(0,1,1.0),]  # two modes\npotential.sin_coeffs=[(1,0,0.5)]\n\
                    potential.constant=-2\nalpha=3\ngrid_density=32\ntau_schedule=[1,2.5,5]\n\
                    tolerances.shooting=1e-10\nseed=9\noutput_dir=runs/t2\nvalidate.oracle_points=0\n\
                    portrait.q_range=[-1,1]\n";
        let c = parse(text).unwrap();
        assert_eq!(c.manifold.periods, [std::f64::consts::TAU, 3.0]);
        assert_eq!(c.potential.trig.len(), 2);
        assert_eq!(c.potential.trig[0], TrigTerm { freq: [1, 0], cos_amp: 1.0, sin_amp: 0.5 });
        assert_eq!(c.potential.constant, -2.0);
        assert_eq!(c.tau_schedule, vec![1.0, 2.5, 5.0]);
        assert_eq!(c.tolerances.shooting, 1e-10);
        assert_eq!(c.seed, 9);
        assert_eq!(c.output_dir, PathBuf::from("runs/t2"));
        assert_eq!(c.validate.oracle_points, 0);
        assert_eq!(c.portrait.q_range, [-1.0, 1.0]);
    }

    #[test]
    fn sphere_basis_terms() {
        let c = parse("manifold.kind = sphere\npotential.sphere = [(z, 0.5), (xx, -0.25)]\nalpha = 2\ngrid_density=32\n")
            .unwrap();
        assert_eq!(c.potential.sphere, vec![(SphereBasis::Z, 0.5), (SphereBasis::Xx, -0.25)]);
        assert_eq!(err("manifold.kind = sphere\npotential.sphere = [(w, 1)]\nalpha = 2\n").0, 2);
        assert_eq!(err("manifold.kind = sphere\npotential.cos_coeffs = [(1, 0, 1)]\nalpha = 2\n").0, 2);
    }

    #[test]
    fn diagnostics_carry_line_and_column() {
        assert_eq!(err("manifold.kind = circle\nalpha = 3x\n"), (2, 9, "invalid number `3x`".into()));
        assert_eq!(err("manifold.kind = circle\nalpha 3\n").0, 2);
        assert_eq!(err("manifold.kind = circle\nalpha = 3\nalpha = 4\n").0, 3);
        let (l, c, m) = err("manifold.kind = circle\nalpha = 3\n  colour = red\n");
        assert_eq!((l, c), (3, 3));
        assert!(m.contains("unknown key"));
        assert_eq!(err("manifold.kind = circle\nalpha = 3\ntau_schedule = [4, 2]\n"), (3, 20, "`tau_schedule` must be positive and increasing".into()));
        assert_eq!(err("manifold.kind = circle\nalpha = 3\ngrid_density = 8\n").1, 16);
        assert_eq!(err("manifold.kind = circle\nalpha = 3\npotential.cos_coeffs = [(1, 1.0, 2.0)]\n"), (3, 25, "`potential.cos_coeffs` entries are (k, amplitude)".into()));
        assert_eq!(err("manifold.kind = circle\nalpha = -1\n").1, 9);
        assert_eq!(err("manifold.kind = circle\nalpha = [1\n").0, 2);
        assert_eq!(err("manifold.kind = klein\nalpha = 1\n"), (1, 17, "unknown manifold `klein` (circle, torus, sphere)".into()));
        assert_eq!(err("manifold.kind = circle\nalpha = 1 2\n").1, 11);
    }

    #[test]
    fn missing_keys() {
        assert_eq!(parse("alpha = 1\n").unwrap_err(), ConfigError::Missing("manifold.kind"));
        assert_eq!(parse("manifold.kind = circle\n").unwrap_err(), ConfigError::Missing("alpha"));
    }

    #[test]
    fn zero_alpha_is_rejected_where_needed() {
        let c = parse("manifold.kind = circle\nalpha = 0\n").unwrap();
        let e = c.require_positive_alpha().unwrap_err();
        assert_eq!(e, at(2, 9, "alpha must be positive for this command"));
    }
}
