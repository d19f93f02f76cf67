//! Map mini-language and the report-producing runner behind the
//! `conformal-energy` binary.
//!
//! Grammar:
//!
//! ```text
//! expr := identity | square
//!       | mobius:a=<re><+|-><im>i,rot=<r>
//!       | pwl:lambda=<x>
//!       | inv(<expr>) | comp(<outer>,<inner>)
//!       | pert(<expr>;<c1>,<c2>,...)
//!       | table:<path.csv>
//! ```
//!
//! Reports are written once, at completion. JSON reports carry the resolved
//! configuration under `config`; CSV reports carry it on a `# config:` line.
//! Either form can be fed back through `--config` to reproduce the run.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::acceptance::{self, default_lambdas};
use crate::bounds::{bound_vs_energy, cr_distortion_scan, qm_energy_bound, DistortionGauge};
use crate::disk::{
    boundary_fourier, deformation_bound_curve, douglas_energy, poisson_field, uniform_t_grid,
    DEFAULT_TRUNCATION,
};
use crate::energy::{conformal_energy, QuadratureSpec, Scheme};
use crate::error::{Error, Result};
use crate::maps::{validate, AngleMap, Table};
use crate::variational::{descend, first_variation, residual_profile, Perturbation};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "CONFORMAL_ENERGY_WORKERS";

/// Samples used to validate every parsed map.
pub const VALIDATE_SAMPLES: usize = 2048;

/// Gauss order of each panel of the bound integral.
const BOUND_ORDER: usize = 32;

/// Step of the central finite difference reported by `variation`.
const FD_STEP: f64 = 1e-4;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

struct MapParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> MapParser<'a> {
    fn err(&self, pos: usize, message: impl Into<String>) -> Error {
        Error::parse(self.src, pos, message)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.err(self.pos, format!("expected '{lit}'")))
        }
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..start + len]
    }

    /// Decimal literal with optional sign and exponent.
    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let mantissa = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i == mantissa {
            return Err(self.err(start, "expected a number"));
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            let digits = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits {
                i = j;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text
            .parse()
            .map_err(|_| self.err(start, format!("malformed number '{text}'")))?;
        self.pos = i;
        Ok(value)
    }

    fn at(&self, pos: usize, r: Result<AngleMap>) -> Result<AngleMap> {
        r.map_err(|e| match e {
            Error::Domain(msg) => self.err(pos, msg),
            e @ Error::Validation { .. } => self.err(pos, e.to_string()),
            other => other,
        })
    }

    fn expr(&mut self) -> Result<AngleMap> {
        self.skip_ws();
        let start = self.pos;
        match self.ident() {
            "identity" => Ok(AngleMap::identity()),
            "square" => Ok(AngleMap::square()),
            "mobius" => {
                self.expect(":")?;
                self.expect("a=")?;
                let re = self.number()?;
                self.skip_ws();
                if !(self.rest().starts_with('+') || self.rest().starts_with('-')) {
                    return Err(self.err(self.pos, "expected '+' or '-' before the imaginary part"));
                }
                let im = self.number()?;
                self.expect("i")?;
                self.expect(",")?;
                self.expect("rot=")?;
                let rot = self.number()?;
                self.at(start, AngleMap::moebius(Complex64::new(re, im), rot))
            }
            "pwl" => {
                self.expect(":")?;
                self.expect("lambda=")?;
                let lambda = self.number()?;
                self.at(start, AngleMap::pwl(lambda))
            }
            "inv" => {
                self.expect("(")?;
                let inner = self.expr()?;
                self.expect(")")?;
                Ok(inner.invert())
            }
            "comp" => {
                self.expect("(")?;
                let outer = self.expr()?;
                self.expect(",")?;
                let inner = self.expr()?;
                self.expect(")")?;
                Ok(AngleMap::compose(outer, inner))
            }
            "pert" => {
                self.expect("(")?;
                let base = self.expr()?;
                self.expect(";")?;
                let mut coeffs = vec![self.number()?];
                loop {
                    self.skip_ws();
                    if self.rest().starts_with(',') {
                        self.pos += 1;
                        coeffs.push(self.number()?);
                    } else {
                        break;
                    }
                }
                self.expect(")")?;
                self.at(start, AngleMap::perturbed(base, coeffs))
            }
            "table" => {
                self.expect(":")?;
                let path_start = self.pos;
                let len = self
                    .rest()
                    .find([',', ')', ';'])
                    .unwrap_or(self.rest().len());
                let path = self.src[path_start..path_start + len].trim();
                if path.is_empty() {
                    return Err(self.err(path_start, "expected a CSV path"));
                }
                self.pos += len;
                let table = read_table(Path::new(path)).map_err(|e| match e {
                    Error::Io(msg) => self.err(path_start, format!("cannot read '{path}': {msg}")),
                    other => self.err(path_start, other.to_string()),
                })?;
                Ok(AngleMap::tabulated(table))
            }
            "" => Err(self.err(start, "expected a map expression")),
            other => Err(self.err(
                start,
                format!("unknown map '{other}' (expected identity, square, mobius, pwl, inv, comp, pert or table)"),
            )),
        }
    }
}

/// Parse and validate a map expression.
pub fn parse_map(expr: &str) -> Result<AngleMap> {
    let mut parser = MapParser { src: expr, pos: 0 };
    let map = parser.expr()?;
    parser.skip_ws();
    if parser.pos != expr.len() {
        return Err(parser.err(parser.pos, "unexpected trailing input"));
    }
    validate(&map, VALIDATE_SAMPLES).map_err(|e| Error::parse(expr, 0, e.to_string()))?;
    Ok(map)
}

/// Two numeric columns `t,θ`; a non-numeric first line is taken as a header.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let (t, theta) = read_columns(&text, path)?;
    Table::new(t, theta)
}

fn read_columns(text: &str, path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<(f64, f64)> = match fields.as_slice() {
            [a, b] => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((x, y)) => {
                xs.push(x);
                ys.push(y);
            }
            None if xs.is_empty() && lineno == 0 => {}
            None => {
                return Err(Error::Config(format!(
                    "{}: line {} is not two numeric columns",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok((xs, ys))
}

/// Parse a gauge: `identity`, `linear:alpha=<x>` or `table:<path.csv>`
/// with columns `t,η`.
pub fn parse_gauge(expr: &str) -> Result<DistortionGauge> {
    let expr = expr.trim();
    if expr == "identity" {
        return Ok(DistortionGauge::Identity);
    }
    if let Some(rest) = expr.strip_prefix("linear:") {
        let Some(value) = rest.strip_prefix("alpha=") else {
            return Err(Error::parse(expr, "linear:".len(), "expected 'alpha='"));
        };
        let alpha: f64 = value
            .parse()
            .map_err(|_| Error::parse(expr, "linear:alpha=".len(), format!("malformed number '{value}'")))?;
        return DistortionGauge::linear(alpha);
    }
    if let Some(path) = expr.strip_prefix("table:") {
        let path = Path::new(path);
        let text = std::fs::read_to_string(path)?;
        let (t, eta) = read_columns(&text, path)?;
        let pairs: Vec<(f64, f64)> = t.into_iter().zip(eta).collect();
        return DistortionGauge::tabulated(&pairs);
    }
    Err(Error::parse(expr, 0, "unknown gauge (expected identity, linear:alpha=<x> or table:<path>)"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Energy,
    Oracle,
    Bound,
    Scan,
    Residual,
    Variation,
    Descend,
    Douglas,
    DeformCurve,
    StudyPwl,
    StudySquare,
    Suite,
}

impl Subcommand {
    fn needs_map(self) -> bool {
        !matches!(
            self,
            Subcommand::Bound | Subcommand::StudyPwl | Subcommand::StudySquare | Subcommand::Suite
        )
    }

    fn default_n(self) -> usize {
        match self {
            Subcommand::Residual | Subcommand::StudyPwl => 4096,
            Subcommand::Descend | Subcommand::Variation => 512,
            _ => 1024,
        }
    }

    fn default_format(self) -> Format {
        match self {
            Subcommand::Scan
            | Subcommand::Residual
            | Subcommand::Descend
            | Subcommand::Douglas
            | Subcommand::DeformCurve
            | Subcommand::StudyPwl => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Everything that determines a run. Unset fields take subcommand defaults
/// in [`RunConfig::resolved`], and the resolved form is what reports embed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub subcommand: Subcommand,
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    /// Grid halvings behind the error estimate.
    #[serde(default)]
    pub refine: Option<usize>,
    /// Fourier truncation `M`.
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Gauge for `bound`.
    #[serde(default)]
    pub eta: Option<String>,
    /// Random quadruples for `scan`.
    #[serde(default)]
    pub quadruples: Option<usize>,
    /// Residual grid size.
    #[serde(default)]
    pub points: Option<usize>,
    /// Sine coefficients of the `variation` direction.
    #[serde(default)]
    pub phi: Option<Vec<f64>>,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Radial and angular node counts of the disk field.
    #[serde(default)]
    pub radii: Option<usize>,
    #[serde(default)]
    pub angles: Option<usize>,
    /// Deformation parameter grid size.
    #[serde(default)]
    pub t_points: Option<usize>,
    /// Adds wall-clock timings, which makes reports non-reproducible.
    #[serde(default)]
    pub timings: bool,
}

impl RunConfig {
    pub fn new(subcommand: Subcommand) -> Self {
        Self {
            subcommand,
            map: None,
            n: None,
            scheme: None,
            refine: None,
            truncation: None,
            format: None,
            output: None,
            seed: None,
            eta: None,
            quadruples: None,
            points: None,
            phi: None,
            modes: None,
            max_steps: None,
            lambdas: None,
            radii: None,
            angles: None,
            t_points: None,
            timings: false,
        }
    }

    pub fn with_map(mut self, map: &str) -> Self {
        self.map = Some(map.to_string());
        self
    }

    /// Fill every unset field with its default for this subcommand.
    pub fn resolved(&self) -> Result<RunConfig> {
        let sub = self.subcommand;
        if sub.needs_map() && self.map.is_none() {
            return Err(Error::Config(format!("subcommand {} needs --map", sub.name())));
        }
        let truncation = self.truncation.unwrap_or(DEFAULT_TRUNCATION);
        let mut r = self.clone();
        r.n = Some(self.n.unwrap_or(sub.default_n()));
        r.scheme = Some(self.scheme.unwrap_or(Scheme::MidpointSubtracted));
        r.refine = Some(self.refine.unwrap_or(2));
        r.truncation = Some(truncation);
        r.format = Some(self.format.unwrap_or(sub.default_format()));
        r.seed = Some(self.seed.unwrap_or(0));
        match sub {
            Subcommand::Bound => r.eta = Some(self.eta.clone().unwrap_or_else(|| "identity".into())),
            Subcommand::Scan => r.quadruples = Some(self.quadruples.unwrap_or(10_000)),
            Subcommand::Residual => r.points = Some(self.points.unwrap_or(32)),
            Subcommand::Variation => r.phi = Some(self.phi.clone().unwrap_or_else(|| vec![0.0, 1.0])),
            Subcommand::Descend => {
                r.modes = Some(self.modes.unwrap_or(8));
                r.max_steps = Some(self.max_steps.unwrap_or(200));
            }
            Subcommand::DeformCurve => {
                r.radii = Some(self.radii.unwrap_or(truncation));
                r.angles = Some(self.angles.unwrap_or(2 * truncation));
                r.t_points = Some(self.t_points.unwrap_or(32));
            }
            Subcommand::StudyPwl => r.lambdas = Some(self.lambdas.clone().unwrap_or_else(default_lambdas)),
            _ => {}
        }
        Ok(r)
    }

    fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec::new(self.n.unwrap_or(self.subcommand.default_n()))
            .with_scheme(self.scheme.unwrap_or(Scheme::MidpointSubtracted))
            .with_refine(self.refine.unwrap_or(2))
    }

    fn parsed_map(&self) -> Result<AngleMap> {
        match &self.map {
            Some(expr) => parse_map(expr),
            None => Err(Error::Config(format!("subcommand {} needs --map", self.subcommand.name()))),
        }
    }

    /// Recover the configuration embedded in a JSON or CSV report, or parse
    /// a bare JSON configuration.
    pub fn from_report(text: &str) -> Result<RunConfig> {
        let bad = |e: serde_json::Error| Error::Config(format!("invalid configuration: {e}"));
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let value: Value = serde_json::from_str(trimmed).map_err(bad)?;
            return match value.get("config") {
                Some(embedded) if value.get("subcommand").is_none() => {
                    serde_json::from_value(embedded.clone()).map_err(bad)
                }
                _ => serde_json::from_value(value).map_err(bad),
            };
        }
        let line = text
            .lines()
            .find_map(|l| l.strip_prefix("# config: "))
            .ok_or_else(|| Error::Config("no embedded '# config:' line".into()))?;
        serde_json::from_str(line).map_err(bad)
    }
}

impl Subcommand {
    pub fn name(self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

/// Finished report and the exit status it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: i32,
    pub report: String,
}

/// Result of one subcommand before formatting.
struct Body {
    json: Value,
    /// Header-less CSV rows.
    csv: String,
    /// Extra `# key=value` summary for the CSV header.
    csv_summary: Option<String>,
    passed: bool,
}

impl Body {
    fn new(json: Value, csv: String) -> Self {
        Self {
            json,
            csv,
            csv_summary: None,
            passed: true,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn execute(cfg: &RunConfig) -> Result<Body> {
    let q = cfg.quadrature();
    match cfg.subcommand {
        Subcommand::Energy | Subcommand::Oracle => {
            let q = if cfg.subcommand == Subcommand::Oracle {
                q.with_scheme(Scheme::MidpointExcluded)
            } else {
                q
            };
            let e = conformal_energy(&cfg.parsed_map()?, &q)?;
            let csv = format!("value,err,n_used,method\n{:?},{:?},{},{}\n", e.value, e.err, e.n_used, e.method);
            Ok(Body::new(to_value(&e), csv))
        }
        Subcommand::Bound => {
            let eta = cfg.eta.as_deref().unwrap_or("identity");
            let bound = qm_energy_bound(&parse_gauge(eta)?, BOUND_ORDER)?;
            let csv = format!("eta,bound\n{eta},{bound:?}\n");
            Ok(Body::new(json!({ "eta": eta, "bound": bound }), csv))
        }
        Subcommand::Scan => {
            let map = cfg.parsed_map()?;
            let scan = cr_distortion_scan(&map, cfg.quadruples.unwrap_or(10_000), cfg.seed.unwrap_or(0))?;
            let comparison = bound_vs_energy(&map, &q, &scan)?;
            let mut body = Body::new(
                json!({ "envelope": to_value(&scan), "comparison": to_value(&comparison) }),
                scan.to_csv(),
            );
            body.csv_summary = Some(format!(
                "alpha_hat={:?},energy={:?},envelope_bound={:?},linear_bound={:?}",
                scan.alpha_hat, comparison.energy.value, comparison.envelope_bound, comparison.linear_bound
            ));
            Ok(body)
        }
        Subcommand::Residual => {
            let profile = residual_profile(&cfg.parsed_map()?, cfg.points.unwrap_or(32), &q)?;
            let mut body = Body::new(to_value(&profile), profile.to_csv());
            body.csv_summary = Some(format!("max_abs={:?}", profile.max_abs));
            Ok(body)
        }
        Subcommand::Variation => {
            let map = cfg.parsed_map()?;
            let phi = Perturbation::new(cfg.phi.clone().unwrap_or_else(|| vec![0.0, 1.0]));
            let analytic = first_variation(&map, &phi, &q)?;
            let fd_spec = q.with_refine(0);
            let plus = conformal_energy(&phi.apply(&map, FD_STEP), &fd_spec)?.value;
            let minus = conformal_energy(&phi.apply(&map, -FD_STEP), &fd_spec)?.value;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let csv = format!("first_variation,finite_difference,step\n{analytic:?},{fd:?},{FD_STEP:?}\n");
            Ok(Body::new(
                json!({
                    "first_variation": analytic,
                    "finite_difference": fd,
                    "step": FD_STEP,
                    "abs_gap": (analytic - fd).abs(),
                }),
                csv,
            ))
        }
        Subcommand::Descend => {
            let trace = descend(
                &cfg.parsed_map()?,
                cfg.modes.unwrap_or(8),
                cfg.max_steps.unwrap_or(200),
                &q,
            )?;
            let mut body = Body::new(to_value(&trace), trace.to_csv());
            body.csv_summary = Some(format!(
                "converged={},stalled={},fit_a={:?},fit_rot={:?},sup_distance={:?}",
                trace.converged, trace.stalled, trace.fit.a, trace.fit.rot, trace.fit.sup_distance
            ));
            Ok(body)
        }
        Subcommand::Douglas => {
            let map = cfg.parsed_map()?;
            let fb = boundary_fourier(&map.invert(), cfg.truncation.unwrap_or(DEFAULT_TRUNCATION))?;
            let value = douglas_energy(&fb)?;
            let mut body = Body::new(
                json!({
                    "value": value,
                    "err": fb.tail_energy,
                    "winding_sum": fb.winding_sum(),
                    "parseval": fb.parseval(),
                    "boundary": to_value(&fb),
                }),
                fb.to_csv(),
            );
            body.csv_summary = Some(format!("energy={value:?},tail={:?}", fb.tail_energy));
            Ok(body)
        }
        Subcommand::DeformCurve => {
            let map = cfg.parsed_map()?;
            let truncation = cfg.truncation.unwrap_or(DEFAULT_TRUNCATION);
            let fb = boundary_fourier(&map.invert(), truncation)?;
            let field = poisson_field(
                &fb,
                cfg.radii.unwrap_or(truncation),
                cfg.angles.unwrap_or(2 * truncation),
            )?;
            let curve = deformation_bound_curve(&field, &uniform_t_grid(cfg.t_points.unwrap_or(32)))?;
            let summary = field.summary();
            let mut body = Body::new(
                json!({ "field": to_value(&summary), "curve": to_value(&curve) }),
                curve.to_csv(),
            );
            body.csv_summary = Some(format!(
                "b_zero={:?},b_limit={:?},strictly_increasing={},max_nu={:?},min_jacobian={:?}",
                curve.b_zero, curve.b_limit, curve.strictly_increasing, summary.max_nu, summary.min_jacobian
            ));
            Ok(body)
        }
        Subcommand::StudyPwl => {
            let lambdas = cfg.lambdas.clone().unwrap_or_else(default_lambdas);
            let study = acceptance::pwl_study(&lambdas, &q)?;
            let mut csv = String::from("lambda,log_inv_lambda,n,energy,err,inverse_energy,inverse_err,inverse_oracle\n");
            for r in &study.rows {
                let _ = writeln!(
                    csv,
                    "{:?},{:?},{},{:?},{:?},{:?},{:?},{:?}",
                    r.lambda,
                    (1.0 / r.lambda).ln(),
                    r.n,
                    r.forward.value,
                    r.forward.err,
                    r.inverse.value,
                    r.inverse.err,
                    r.inverse_oracle
                );
            }
            let mut body = Body::new(to_value(&study), csv);
            body.csv_summary = Some(format!(
                "inverse_slope={:?},oracle_slope={:?},expected_slope={:?},forward_spread={:?}",
                study.inverse_slope, study.oracle_slope, study.expected_slope, study.forward_spread
            ));
            Ok(body)
        }
        Subcommand::StudySquare => {
            let study = acceptance::square_study(&q)?;
            let mut csv = String::from("map,n,energy,err,doubled_energy,doubling_gap,converged\n");
            for e in &study.energies {
                let _ = writeln!(
                    csv,
                    "{},{},{:?},{:?},{:?},{:?},{}",
                    e.map, e.coarse.n_used, e.coarse.value, e.coarse.err, e.fine.value, e.doubling_gap, e.converged
                );
            }
            let mut body = Body::new(to_value(&study), csv);
            body.csv_summary = Some(format!("trend_exponent={:?}", study.trend_exponent));
            Ok(body)
        }
        Subcommand::Suite => {
            let outcomes = acceptance::run_all();
            let passed = outcomes.iter().all(|o| o.passed);
            let mut csv = String::from("criterion,title,passed,detail\n");
            for o in &outcomes {
                let _ = writeln!(csv, "{},{},{},\"{}\"", o.id, o.title, o.passed, o.detail.replace('"', "'"));
            }
            Ok(Body {
                json: json!({ "passed": passed, "criteria": to_value(&outcomes) }),
                csv,
                csv_summary: None,
                passed,
            })
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings_ms: Option<f64>,
}

/// Run one configuration and format its report. Nothing is written to disk.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let cfg = config.resolved()?;
    let started = Instant::now();
    let body = execute(&cfg)?;
    let elapsed = cfg.timings.then(|| started.elapsed().as_secs_f64() * 1e3);
    let report = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => {
            let report = JsonReport {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                config: &cfg,
                result: body.json,
                timings_ms: elapsed,
            };
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
            text.push('\n');
            text
        }
        Format::Csv => {
            let config_line = serde_json::to_string(&cfg)
                .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
            let mut text = format!(
                "# {} {}\n# config: {config_line}\n",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION")
            );
            if let Some(summary) = &body.csv_summary {
                let _ = writeln!(text, "# {summary}");
            }
            if let Some(ms) = elapsed {
                let _ = writeln!(text, "# timings_ms={ms:.3}");
            }
            text.push_str(&body.csv);
            text
        }
    };
    Ok(RunOutput {
        status: if body.passed { EXIT_OK } else { EXIT_ASSERTION },
        report,
    })
}

/// Command-line flags; any flag given overrides the same key of `--config`.
#[derive(Debug, Parser)]
#[command(name = "conformal-energy", version, about = "Conformal energy of circle homeomorphisms")]
struct Cli {
    /// Subcommand to run; may come from --config instead.
    #[arg(value_enum)]
    subcommand: Option<Subcommand>,
    /// JSON configuration or a previous report to re-run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Map expression in the mini-language.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long)]
    refine: Option<usize>,
    /// Fourier truncation M.
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gauge: identity, linear:alpha=<x> or table:<path.csv>.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    quadruples: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    /// Comma-separated sine coefficients of the perturbation.
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<f64>>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    radii: Option<usize>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    t_points: Option<usize>,
    /// Record wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Cli {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_report(&std::fs::read_to_string(path)?)?,
            None => match self.subcommand {
                Some(sub) => RunConfig::new(sub),
                None => return Err(Error::Config("no subcommand given (and no --config)".into())),
            },
        };
        if let Some(sub) = self.subcommand {
            cfg.subcommand = sub;
        }
        macro_rules! overlay {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* };
        }
        overlay!(
            map, n, scheme, refine, truncation, format, output, seed, eta, quadruples, points, phi,
            modes, max_steps, lambdas, radii, angles, t_points
        );
        cfg.timings |= self.timings;
        Ok(cfg)
    }
}

/// Size the global worker pool from [`WORKERS_ENV`] when set.
pub fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|w| *w > 0)
        .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer (got '{raw}')")))?;
    // a pool built earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e.exit_code() {
        2 => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Entry point of the binary: parse arguments, run, write the report.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = configure_workers()
        .and_then(|_| cli.into_config())
        .and_then(|cfg| {
            let out = run(&cfg)?;
            match &cfg.output {
                Some(path) => std::fs::write(path, &out.report)?,
                None => print!("{}", out.report),
            }
            Ok(out.status)
        });
    match outcome {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn parses_the_basic_families() {
        assert!(parse_map("identity").unwrap().eval(1.0) == 1.0);
        assert_eq!(parse_map("square").unwrap().to_string(), "square");
        let m = parse_map("mobius:a=0.5+0i,rot=0").unwrap();
        assert_eq!(m.moebius_params(), Some((Complex64::new(0.5, 0.0), 0.0)));
        let m = parse_map(" mobius:a=-0.2-3e-1i, rot=1.5 ").unwrap();
        assert_eq!(m.moebius_params(), Some((Complex64::new(-0.2, -0.3), 1.5)));
        assert_eq!(parse_map("pwl:lambda=0.01").unwrap().to_string(), "pwl:lambda=0.01");
    }

    #[test]
    fn nesting_matches_direct_construction() {
        let parsed = parse_map("comp(mobius:a=0.3+0i,rot=0,square)").unwrap();
        let built = AngleMap::compose(
            AngleMap::moebius(Complex64::new(0.3, 0.0), 0.0).unwrap(),
            AngleMap::square(),
        );
        for i in 0..50 {
            let t = TAU * i as f64 / 50.0;
            assert_eq!(parsed.eval(t), built.eval(t));
        }
        let inv = parse_map("inv(pwl:lambda=0.01)").unwrap();
        let f = AngleMap::pwl(0.01).unwrap();
        assert!((inv.eval(f.eval(2.0)) - 2.0).abs() < 1e-9);
        let deep = parse_map("inv(comp(inv(square),pert(identity;0,0.1)))").unwrap();
        assert!(deep.eval(TAU) - deep.eval(0.0) - TAU < 1e-9);
    }

    #[test]
    fn display_round_trips() {
        for expr in [
            "identity",
            "mobius:a=0.3-0.1i,rot=2",
            "inv(comp(pwl:lambda=0.1,square))",
            "pert(square;0.01,0,0.02)",
        ] {
            let m = parse_map(expr).unwrap();
            let again = parse_map(&m.to_string()).unwrap();
            assert_eq!(again.to_string(), m.to_string());
            for i in 0..20 {
                let t = 0.3 * i as f64;
                assert_eq!(again.eval(t), m.eval(t));
            }
        }
    }

    #[test]
    fn syntax_errors_carry_a_caret() {
        let err = parse_map("comp(square,pwl:lambda=abc)").unwrap_err();
        match &err {
            Error::Parse { pos, caret, .. } => {
                assert_eq!(*pos, 23);
                assert_eq!(caret, &format!("{}^", " ".repeat(23)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(parse_map("squares"), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!(parse_map("square)"), Err(Error::Parse { pos: 6, .. })));
        assert!(matches!(parse_map("mobius:a=0.5,rot=0"), Err(Error::Parse { pos: 12, .. })));
        assert!(matches!(parse_map("inv(square"), Err(Error::Parse { pos: 10, .. })));
    }

    #[test]
    fn domain_errors_point_at_the_term() {
        assert!(matches!(parse_map("comp(square,pwl:lambda=7)"), Err(Error::Parse { pos: 12, .. })));
        assert!(matches!(parse_map("mobius:a=1.5+0i,rot=0"), Err(Error::Parse { pos: 0, .. })));
    }

    #[test]
    fn validation_failures_are_reported() {
        let err = parse_map("pert(identity;0,0.9)").unwrap_err();
        assert!(matches!(err, Error::Parse { pos: 0, .. }), "{err:?}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn table_maps_load_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half.csv");
        std::fs::write(&path, format!("t,theta\n0,0\n{},{}\n{TAU},{TAU}\n", TAU / 2.0, TAU / 4.0)).unwrap();
        let m = parse_map(&format!("table:{}", path.display())).unwrap();
        assert!((m.eval(TAU / 4.0) - TAU / 8.0).abs() < 1e-12);
        let missing = parse_map("table:/nonexistent/x.csv").unwrap_err();
        assert!(matches!(missing, Error::Parse { pos: 6, .. }));
        std::fs::write(&path, "0,0\n1,2\n0.5,3\n").unwrap();
        assert!(parse_map(&format!("table:{}", path.display())).is_err());
    }

    #[test]
    fn gauges_parse() {
        assert_eq!(parse_gauge("identity").unwrap(), DistortionGauge::Identity);
        assert_eq!(parse_gauge("linear:alpha=2").unwrap(), DistortionGauge::linear(2.0).unwrap());
        assert!(matches!(parse_gauge("linear:beta=2"), Err(Error::Parse { pos: 7, .. })));
        assert!(parse_gauge("linear:alpha=0.5").is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = RunConfig::from_report(r#"{"subcommand":"energy","map":"square","nn":3}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let ok = RunConfig::from_report(r#"{"subcommand":"energy","map":"square","n":256}"#).unwrap();
        assert_eq!(ok.n, Some(256));
    }

    #[test]
    fn resolution_records_defaults() {
        let cfg = RunConfig::new(Subcommand::StudyPwl).resolved().unwrap();
        assert_eq!(cfg.n, Some(4096));
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.lambdas.as_ref().map(Vec::len), Some(5));
        assert!(RunConfig::new(Subcommand::Energy).resolved().is_err());
    }

    #[test]
    fn bound_with_unit_linear_gauge_is_one() {
        let mut cfg = RunConfig::new(Subcommand::Bound);
        cfg.eta = Some("linear:alpha=1".into());
        let out = run(&cfg).unwrap();
        let v: Value = serde_json::from_str(&out.report).unwrap();
        assert!((v["result"]["bound"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(out.status, EXIT_OK);
    }

    #[test]
    fn energy_report_embeds_a_reproducing_config() {
        let cfg = RunConfig::new(Subcommand::Energy).with_map("mobius:a=0.5+0i,rot=0");
        let first = run(&cfg).unwrap();
        let v: Value = serde_json::from_str(&first.report).unwrap();
        assert!((v["result"]["value"].as_f64().unwrap() - 1.0).abs() < 5e-4);
        assert_eq!(v["result"]["n_used"], 1024);
        let again = run(&RunConfig::from_report(&first.report).unwrap()).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn csv_report_round_trips_through_its_header() {
        let mut cfg = RunConfig::new(Subcommand::Residual).with_map("mobius:a=0.3+0i,rot=0");
        cfg.points = Some(8);
        cfg.n = Some(1024);
        let first = run(&cfg).unwrap();
        assert!(first.report.contains("\ny,R\n"));
        let again = run(&RunConfig::from_report(&first.report).unwrap()).unwrap();
        assert_eq!(first.report, again.report);
    }

    #[test]
    fn numerical_failures_map_to_exit_three() {
        let mut cfg = RunConfig::new(Subcommand::Variation).with_map("comp(square,square)");
        cfg.n = Some(256);
        let err = run(&cfg).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_NUMERICAL);
    }

    #[test]
    fn command_line_exit_codes() {
        assert_eq!(main_with_args(["conformal-energy", "bound", "--eta", "linear:alpha=1"]), EXIT_OK);
        assert_eq!(main_with_args(["conformal-energy", "energy", "--map", "sqare"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["conformal-energy", "energy"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["conformal-energy", "frobnicate"]), EXIT_CONFIG);
    }
}
