//! Run configuration, verification reports and their JSON/CSV serializations.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, CatalogEntry, OracleReport};
use crate::error::{Error, Result};
use crate::invariants::{FrameJets, FramePoint};
use crate::numeric::Spread;
use crate::parallel::{
    admissibility_margin, admissible_range, constancy_check, default_mu_values, reverse_check, ConstancyReport,
    ParallelRecord, ReverseCheck,
};
use crate::tube::{
    chart_for_grid, constant_principal_detector, level_set_spreads, tube_sample, CMode, Certificate, DetectorReport,
    LevelSetSpread, TubeSample, Verdict,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_JET_ORDER: usize = 4;
pub const MAX_JET_ORDER: usize = 10;
pub const DEFAULT_JET_ORDER: usize = 5;
/// Default grid: this many samples per axis over the central part of the chart domain.
pub const DEFAULT_GRID_COUNT: usize = 5;
pub const DEFAULT_GRID_SHRINK: f64 = 0.75;
/// Finite-difference limited checks.
pub const HESSIAN_TOL: f64 = 1e-4;
pub const HESSIAN_ANGLE_TOL: f64 = 1e-5;
pub const CHRISTOFFEL_TOL: f64 = 1e-5;
pub const METRIC_SPLIT_TOL: f64 = 1e-5;

pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Format> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format `{other}` (expected json or csv)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tight: f64,
    pub loose: f64,
    pub gray: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances { tight: 1e-8, loose: 1e-6, gray: 1e-3 }
    }
}

/// Tensor grid: sample count and closed interval per parameter axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub bounds: Vec<[f64; 2]>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn size(&self) -> usize {
        self.counts.iter().product()
    }

    /// Points in row-major order, last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .counts
            .iter()
            .zip(&self.bounds)
            .map(|(&k, &[lo, hi])| {
                if k == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
                }
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// `DEFAULT_GRID_COUNT` samples per axis over the central part of the domain.
    pub fn default_for(domain: &[(f64, f64)]) -> GridSpec {
        GridSpec {
            counts: vec![DEFAULT_GRID_COUNT; domain.len()],
            bounds: domain
                .iter()
                .map(|&(lo, hi)| {
                    let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo) * DEFAULT_GRID_SHRINK);
                    [m - h, m + h]
                })
                .collect(),
        }
    }

    pub fn validate(&self, entry: &CatalogEntry) -> Result<()> {
        if self.counts.len() != self.bounds.len() {
            return Err(Error::Config("grid has different numbers of counts and bounds".into()));
        }
        if self.dim() != entry.dim() {
            return Err(Error::Config(format!(
                "grid has {} axes but `{}` has {} parameters",
                self.dim(),
                entry.name,
                entry.dim()
            )));
        }
        for (axis, (&k, &[lo, hi])) in self.counts.iter().zip(&self.bounds).enumerate() {
            if k == 0 {
                return Err(Error::Config(format!("grid axis {axis} has no samples")));
            }
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("grid axis {axis} has invalid bounds [{lo}, {hi}]")));
            }
            let (dlo, dhi) = entry.chart_domain[axis];
            if lo < dlo - 1e-12 || hi > dhi + 1e-12 {
                return Err(Error::Config(format!(
                    "grid axis {axis} bounds [{lo}, {hi}] leave the chart domain [{dlo}, {dhi}] of `{}`",
                    entry.name
                )));
            }
        }
        Ok(())
    }
}

fn split_axes(s: &str) -> Vec<&str> {
    s.split(['x', 'X', '×']).map(str::trim).collect()
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `5x5@[-0.3,0.3]x[-0.3,0.3]`; `×` and `x` are both accepted as separators.
    fn from_str(s: &str) -> Result<GridSpec> {
        let bad = |why: &str| Error::Config(format!("invalid grid `{s}`: {why}"));
        let (counts, bounds) = s.split_once('@').ok_or_else(|| bad("expected COUNTS@BOUNDS"))?;
        let counts = split_axes(counts)
            .into_iter()
            .map(|c| c.parse::<usize>().map_err(|_| bad(&format!("bad sample count `{c}`"))))
            .collect::<Result<Vec<_>>>()?;
        let mut rest = bounds.trim();
        let mut intervals = Vec::new();
        loop {
            let body = rest.strip_prefix('[').ok_or_else(|| bad("expected `[`"))?;
            let close = body.find(']').ok_or_else(|| bad("expected `]`"))?;
            let (a, b) = body[..close].split_once(',').ok_or_else(|| bad("expected `[lo,hi]`"))?;
            let parse =
                |t: &str| t.trim().replace('−', "-").parse::<f64>().map_err(|_| bad(&format!("bad bound `{t}`")));
            intervals.push([parse(a)?, parse(b)?]);
            rest = body[close + 1..].trim_start();
            if rest.is_empty() {
                break;
            }
            let sep = rest.chars().next().unwrap_or(' ');
            if !matches!(sep, 'x' | 'X' | '×') {
                return Err(bad("expected an axis separator between intervals"));
            }
            rest = rest[sep.len_utf8()..].trim_start();
        }
        if counts.len() != intervals.len() {
            return Err(bad("number of counts and intervals differ"));
        }
        Ok(GridSpec { counts, bounds: intervals })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        let bounds: Vec<String> = self.bounds.iter().map(|[a, b]| format!("[{a},{b}]")).collect();
        write!(f, "{}@{}", counts.join("x"), bounds.join("x"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything a run depends on; mirrored by the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: String,
    /// `None` picks the default grid of the surface.
    pub grid: Option<GridSpec>,
    /// `None` picks the default values clipped to the admissible range.
    pub mu_values: Option<Vec<f64>>,
    pub jet_order: usize,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    /// Worker threads, 0 for one per core.
    pub parallelism: usize,
    pub c_mode: CMode,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            surface: "sphere(1)".into(),
            grid: None,
            mu_values: None,
            jet_order: DEFAULT_JET_ORDER,
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
            parallelism: 0,
            c_mode: CMode::Exact,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))
    }

    /// Checks that do not need any geometry.
    pub fn validate(&self) -> Result<()> {
        if !(MIN_JET_ORDER..=MAX_JET_ORDER).contains(&self.jet_order) {
            return Err(Error::Config(format!(
                "jet_order {} outside [{MIN_JET_ORDER}, {MAX_JET_ORDER}]",
                self.jet_order
            )));
        }
        let t = &self.tolerances;
        if ![t.tight, t.loose, t.gray].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(mus) = &self.mu_values {
            if mus.iter().any(|m| !m.is_finite()) {
                return Err(Error::Config("mu values must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Parse `0.25,0.5` style lists.
pub fn parse_mu_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim().replace('−', "-");
            t.parse::<f64>().map_err(|_| Error::Config(format!("bad mu value `{t}`")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Invariants,
    Parallel,
    Isoparametric,
    VerifyAll,
}

impl Command {
    fn wants_parallel(self) -> bool {
        matches!(self, Command::Parallel | Command::VerifyAll)
    }

    fn wants_tube(self) -> bool {
        matches!(self, Command::Isoparametric | Command::VerifyAll)
    }
}

/// One pass/fail line of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// Largest observed value, `null` when the check could not be evaluated.
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub passed: bool,
    pub detail: Option<String>,
}

impl Check {
    fn max(name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check { name: name.into(), value: Some(value), limit: Some(limit), passed: value <= limit, detail: None }
    }

    fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), value: None, limit: None, passed, detail: Some(detail.into()) }
    }

    fn error(name: impl Into<String>, err: &Error) -> Check {
        Check::flag(name, false, err.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceInfo {
    pub name: String,
    pub dimension: usize,
    pub chart_domain: Vec<[f64; 2]>,
    pub expected_verdict: Option<bool>,
    pub description: String,
}

/// Residuals of one grid point; Gauss/Codazzi are `null` below jet order 5.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SampleResiduals {
    pub volume: f64,
    pub apolarity: f64,
    pub gauss_y: f64,
    pub weingarten_normal: f64,
    pub b_symmetry: f64,
    pub gauss: Option<f64>,
    pub codazzi_a: Option<f64>,
    pub codazzi_b: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleSummary {
    pub u: Vec<f64>,
    pub orientation: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub det_h: f64,
    pub lambda: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub pick_norm_sq: f64,
    pub residuals: SampleResiduals,
}

impl SampleSummary {
    fn from_frame(p: &FramePoint, gc: Option<(f64, f64, f64)>) -> SampleSummary {
        let r = &p.residuals;
        SampleSummary {
            u: p.u.clone(),
            orientation: p.orientation,
            x: p.x.clone(),
            y: p.y.clone(),
            g: p.g.clone(),
            det_h: p.det_h,
            lambda: p.lambda.clone(),
            l: p.l.clone(),
            pick_norm_sq: p.pick_norm_sq(),
            residuals: SampleResiduals {
                volume: r.volume,
                apolarity: r.apolarity,
                gauss_y: r.gauss_y,
                weingarten_normal: r.weingarten_normal,
                b_symmetry: r.b_symmetry,
                gauss: gc.map(|g| g.0),
                codazzi_a: gc.map(|g| g.1),
                codazzi_b: gc.map(|g| g.2),
            },
        }
    }
}

/// Tube chart data shared by all tube samples.
#[derive(Clone, Debug, Serialize)]
pub struct TubeChartInfo {
    pub center: Vec<f64>,
    /// Half-width of the admissible `μ` interval; null when every `μ` is admissible.
    pub delta: Option<f64>,
    pub c_mode: CMode,
    pub lambda_center: Vec<f64>,
    /// Coefficients of the polynomial fit of `c`, lowest degree first.
    pub c_fit: Vec<f64>,
    pub c_fit_residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub stages: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub command: Command,
    /// Echo with the resolved grid and `μ` values.
    pub config: RunConfig,
    pub surface: SurfaceInfo,
    pub samples: Vec<SampleSummary>,
    pub parallel: Vec<ParallelRecord>,
    pub constancy: Vec<ConstancyReport>,
    pub reverse: Vec<ReverseCheck>,
    pub tube_chart: Option<TubeChartInfo>,
    pub tube: Vec<TubeSample>,
    pub level_sets: Vec<LevelSetSpread>,
    pub oracle: Option<OracleReport>,
    pub detector: Option<DetectorReport>,
    /// `null` unless the detector ran.
    pub verdict: Option<Verdict>,
    pub certificate: Option<Certificate>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub timings: Timings,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))
    }

    /// Plot-ready table for the command: grid rows for `invariants`, grid × `μ` rows otherwise.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.surface.dimension;
        let coords: Vec<String> =
            if n == 2 { vec!["u".into(), "v".into()] } else { (1..=n).map(|i| format!("u{i}")).collect() };
        let numbered = |p: &'static str| (1..=n).map(move |i| format!("{p}_{i}"));
        let io = |e: csv::Error| Error::Numerical(format!("csv output failed: {e}"));
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        match self.command {
            Command::Invariants => {
                let mut head = coords.clone();
                head.extend(numbered("lambda"));
                head.extend(numbered("L"));
                head.extend(
                    ["apolarity_residual", "gauss_residual", "codazzi_A_residual", "codazzi_B_residual"]
                        .map(String::from),
                );
                w.write_record(&head).map_err(io)?;
                for s in &self.samples {
                    let mut row: Vec<String> = s.u.iter().map(|v| v.to_string()).collect();
                    row.extend(s.lambda.iter().map(|v| v.to_string()));
                    row.extend(s.l.iter().map(|v| v.to_string()));
                    let r = &s.residuals;
                    row.extend([r.apolarity.to_string(), opt(r.gauss), opt(r.codazzi_a), opt(r.codazzi_b)]);
                    w.write_record(&row).map_err(io)?;
                }
            }
            Command::Parallel | Command::VerifyAll => {
                let keys: Vec<String> = self.parallel.first().map_or(vec![], |r| r.residuals.keys().cloned().collect());
                let mut head = coords.clone();
                head.extend(["mu", "detT", "c", "h_ratio", "g_ratio"].map(String::from));
                head.extend(numbered("lambda_mu"));
                head.extend(keys.iter().map(|k| format!("{k}_residual")));
                w.write_record(&head).map_err(io)?;
                for r in &self.parallel {
                    let mut row: Vec<String> = r.u.iter().map(|v| v.to_string()).collect();
                    row.extend([r.mu, r.det_t, r.c, r.h_ratio, r.g_ratio].map(|v| v.to_string()));
                    row.extend(r.lambda_mu.iter().map(|v| v.to_string()));
                    row.extend(keys.iter().map(|k| r.residuals.get(k).map_or(String::new(), |v| v.to_string())));
                    w.write_record(&row).map_err(io)?;
                }
            }
            Command::Isoparametric => {
                let keys: Vec<String> = self.tube.first().map_or(vec![], |s| s.residuals.keys().cloned().collect());
                let mut head = coords.clone();
                head.extend(["mu", "c", "dc", "norm_grad_f", "lap_f", "lap_f_levi_civita"].map(String::from));
                head.extend(keys.iter().map(|k| format!("{k}_residual")));
                w.write_record(&head).map_err(io)?;
                for s in &self.tube {
                    let mut row: Vec<String> = s.u.iter().map(|v| v.to_string()).collect();
                    row.extend(
                        [s.mu, s.c, s.dc, s.level.norm_grad_f, s.level.lap_f_formula, s.level.lap_f_numeric]
                            .map(|v| v.to_string()),
                    );
                    row.extend(keys.iter().map(|k| s.residuals.get(k).map_or(String::new(), |v| v.to_string())));
                    w.write_record(&row).map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv output failed: {e}")))
    }
}

struct Stopwatch {
    start: Instant,
    stages: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.stages.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }
}

/// Tube residual keys gated by the run, with their limits; other keys are diagnostics.
fn tube_limits(tol: &Tolerances) -> Vec<(&'static str, f64)> {
    vec![
        ("volume_surrogate", tol.loose),
        ("grad_norm", tol.loose),
        ("g_tilde_normal", tol.loose),
        ("c_local", tol.loose),
        ("christoffel_formula_vs_levi_civita", CHRISTOFFEL_TOL),
        ("christoffel_corrected_vs_levi_civita", tol.loose),
        ("laplacian_corrected_vs_levi_civita", tol.loose),
        ("normal_transport_formula", tol.loose),
        ("half_shape_formula", tol.loose),
        ("mu_line_straightness", tol.loose),
        ("mu_line_geodesic", tol.loose),
        ("hessian_formula_vs_numeric", HESSIAN_TOL),
        ("hessian_null_angle", HESSIAN_ANGLE_TOL),
        ("metric_split", METRIC_SPLIT_TOL),
    ]
}

fn max_over<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(*v) })
}

fn resolve_mus(cfg: &RunConfig, frames: &[FramePoint]) -> Result<Vec<f64>> {
    let range = admissible_range(frames.iter().flat_map(|f| f.lambda.iter()));
    match &cfg.mu_values {
        Some(mus) => {
            for &mu in mus {
                if let Some(bad) =
                    frames.iter().find(|f| admissibility_margin(&f.lambda, mu) < crate::parallel::ADMISSIBILITY_MARGIN)
                {
                    return Err(Error::Inadmissible { mu, margin: admissibility_margin(&bad.lambda, mu) });
                }
            }
            Ok(mus.clone())
        }
        None => Ok(default_mu_values(&range)),
    }
}

/// Usage-level failures map to exit code 2, everything else found during a run to 1.
pub fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Parse { .. } | Error::UnknownSurface(_) | Error::Inadmissible { .. })
}

/// Gauss, Codazzi A and Codazzi B residuals at one point.
type GaussCodazzi = (f64, f64, f64);
type ResidualGetter = dyn Fn(&SampleResiduals) -> Option<f64>;

/// Run the analyses of `command`. Returns `Err` only for configuration problems;
/// numerical failures become failed checks in the report.
pub fn run(command: Command, config: &RunConfig) -> Result<VerificationReport> {
    let mut watch = Stopwatch { start: Instant::now(), stages: BTreeMap::new() };
    config.validate()?;
    let entry = catalog::get(&config.surface)?;
    let grid_spec = config.grid.clone().unwrap_or_else(|| GridSpec::default_for(&entry.chart_domain));
    grid_spec.validate(&entry)?;
    let grid = grid_spec.points();
    let order = config.jet_order;
    let tol = config.tolerances;
    let imm = entry.immersion.clone();
    let mut checks = Vec::new();

    // base invariants at every grid point
    let computed: Vec<Result<(FramePoint, Option<GaussCodazzi>)>> = watch.time("invariants", || {
        grid.par_iter()
            .map(|u| {
                let jets = FrameJets::compute(imm.as_ref(), u, order)?;
                let gc = if order >= 5 {
                    let r = jets.gauss_codazzi()?;
                    Some((r.gauss, r.codazzi_a, r.codazzi_b))
                } else {
                    None
                };
                Ok((jets.point(), gc))
            })
            .collect()
    });
    let mut frames = Vec::new();
    let mut samples = Vec::new();
    for (u, res) in grid.iter().zip(computed) {
        match res {
            Ok((p, gc)) => {
                samples.push(SampleSummary::from_frame(&p, gc));
                frames.push(p);
            }
            Err(e) => checks.push(Check::error(format!("invariants.frame at u = {u:?}"), &e)),
        }
    }
    let frames_ok = frames.len() == grid.len();
    if !samples.is_empty() {
        let col = |f: &dyn Fn(&SampleResiduals) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = samples.iter().filter_map(|s| f(&s.residuals)).collect();
            (!vals.is_empty()).then(|| max_over(&vals))
        };
        let keyed: [(&str, &ResidualGetter); 8] = [
            ("volume", &|r| Some(r.volume)),
            ("apolarity", &|r| Some(r.apolarity)),
            ("gauss_y", &|r| Some(r.gauss_y)),
            ("weingarten_normal", &|r| Some(r.weingarten_normal)),
            ("b_symmetry", &|r| Some(r.b_symmetry)),
            ("gauss", &|r| r.gauss),
            ("codazzi_a", &|r| r.codazzi_a),
            ("codazzi_b", &|r| r.codazzi_b),
        ];
        for (key, f) in keyed {
            if let Some(v) = col(f) {
                checks.push(Check::max(format!("invariants.{key}"), v, tol.loose));
            }
        }
    }

    // μ values need the curvatures; a user-supplied inadmissible μ is a usage error
    let mus = if frames_ok && (command.wants_parallel() || command.wants_tube()) {
        resolve_mus(config, &frames)?
    } else {
        config.mu_values.clone().unwrap_or_default()
    };

    let mut oracle = None;
    let oracle_mus: Vec<f64> = if command.wants_tube() { mus.clone() } else { Vec::new() };
    if frames_ok {
        match watch.time("oracle", || catalog::oracle_check(&entry, &grid, &oracle_mus, order)) {
            Ok(rep) => {
                let fields = [
                    ("y", rep.y),
                    ("lambda", rep.lambda),
                    ("c", rep.c),
                    ("f", rep.f),
                    ("y_position_angle", rep.y_position_angle),
                    ("lambda_equality", rep.lambda_equality),
                    ("lambda_grid_spread", rep.lambda_grid_spread),
                ];
                for (key, v) in fields {
                    if let Some(v) = v {
                        checks.push(Check::max(format!("oracle.{key}"), v, tol.loose));
                    }
                }
                oracle = Some(rep);
            }
            Err(e) => checks.push(Check::error("oracle", &e)),
        }
    }

    let mut parallel = Vec::new();
    let mut constancy = Vec::new();
    let mut reverse = Vec::new();
    if command.wants_parallel() && frames_ok {
        let base_lambda_constant = (0..entry.dim())
            .all(|i| Spread::of(&frames.iter().map(|f| f.lambda[i]).collect::<Vec<_>>()).spread <= tol.tight);
        for &mu in &mus {
            let tag = format!("parallel.mu={mu}");
            match watch.time("parallel", || constancy_check(&imm, &grid, mu, order)) {
                Ok((rep, records)) => {
                    let keys: Vec<String> = records[0].residuals.keys().cloned().collect();
                    for key in keys {
                        let v = max_over(records.iter().map(|r| &r.residuals[&key]));
                        checks.push(Check::max(format!("{tag}.{key}"), v, tol.loose));
                    }
                    checks.push(Check::flag(
                        format!("{tag}.verdicts_agree"),
                        rep.verdicts_agree,
                        format!("detT {:?}, H ratio {:?}", rep.det_t.verdict, rep.h_ratio.verdict),
                    ));
                    checks.push(Check::max(format!("{tag}.detT_spread"), rep.det_t.spread, tol.loose));
                    if base_lambda_constant {
                        let spread = (0..entry.dim())
                            .map(|i| Spread::of(&records.iter().map(|r| r.lambda_mu[i]).collect::<Vec<_>>()).spread)
                            .fold(0.0, f64::max);
                        checks.push(Check::max(format!("{tag}.lambda_mu_spread"), spread, tol.loose));
                    }
                    if rep.is_parallel() {
                        let center = &grid[grid.len() / 2];
                        match reverse_check(&imm, center, mu, order) {
                            Ok(r) => {
                                checks.push(Check::max(format!("{tag}.reverse"), r.max(), tol.loose));
                                reverse.push(r);
                            }
                            Err(e) => checks.push(Check::error(format!("{tag}.reverse"), &e)),
                        }
                    }
                    constancy.push(rep);
                    parallel.extend(records);
                }
                Err(e) => checks.push(Check::error(tag, &e)),
            }
        }
    }

    let mut tube = Vec::new();
    let mut level_sets = Vec::new();
    let mut tube_chart = None;
    let mut detector = None;
    if command.wants_tube() && frames_ok {
        let chart = watch
            .time("tube_chart", || chart_for_grid(&imm, &grid, order, config.c_mode, Some(entry.chart_domain.clone())));
        match chart {
            Ok(chart) => {
                tube_chart = Some(TubeChartInfo {
                    center: chart.center.clone(),
                    delta: chart.delta.is_finite().then_some(chart.delta),
                    c_mode: chart.c_profile.mode,
                    lambda_center: chart.c_profile.lambda_center.clone(),
                    c_fit: chart.c_profile.fit.clone(),
                    c_fit_residual: chart.c_profile.fit_residual,
                });
                let jobs: Vec<(&Vec<f64>, f64)> =
                    mus.iter().flat_map(|&mu| grid.iter().map(move |u| (u, mu))).collect();
                let results: Vec<Result<TubeSample>> =
                    watch.time("tube", || jobs.par_iter().map(|(u, mu)| tube_sample(&chart, u, *mu, true)).collect());
                for ((u, mu), r) in jobs.iter().zip(results) {
                    match r {
                        Ok(s) => tube.push(s),
                        Err(e) => checks.push(Check::error(format!("tube at u = {u:?}, mu = {mu}"), &e)),
                    }
                }
                if !tube.is_empty() {
                    for (key, limit) in tube_limits(&tol) {
                        let v = max_over(tube.iter().filter_map(|s| s.residuals.get(key)));
                        checks.push(Check::max(format!("tube.{key}"), v, limit));
                    }
                    level_sets = level_set_spreads(&tube);
                    for ls in &level_sets {
                        checks.push(Check::max(format!("tube.mu={}.lap_f_spread", ls.mu), ls.lap_f.spread, tol.loose));
                        checks.push(Check::max(
                            format!("tube.mu={}.norm_grad_f_spread", ls.mu),
                            ls.norm_grad_f.spread,
                            tol.loose,
                        ));
                    }
                }
            }
            Err(e) => checks.push(Check::error("tube.chart", &e)),
        }
        match watch.time("detector", || constant_principal_detector(&imm, &grid, order)) {
            Ok(rep) => {
                checks.push(Check::flag(
                    "detector.conclusive",
                    rep.verdict != Verdict::Inconclusive,
                    format!("direct {:?}, power sums {:?}", rep.direct_verdict, rep.power_sum_verdict),
                ));
                if let Some(expected) = entry.expected_verdict {
                    let got = rep.verdict == Verdict::Isoparametric;
                    checks.push(Check::flag(
                        "detector.expected_verdict",
                        rep.verdict == Verdict::Inconclusive || got == expected,
                        format!("expected isoparametric = {expected}, got {:?}", rep.verdict),
                    ));
                }
                detector = Some(rep);
            }
            Err(e) => checks.push(Check::error("detector", &e)),
        }
    }

    let verdict = detector.as_ref().map(|d| d.verdict);
    let certificate = detector.as_ref().and_then(|d| d.certificate.clone());
    let mut echo = config.clone();
    echo.grid = Some(grid_spec);
    echo.mu_values = Some(mus);
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        command,
        config: echo,
        surface: SurfaceInfo {
            name: entry.name.clone(),
            dimension: entry.dim(),
            chart_domain: entry.chart_domain.iter().map(|&(a, b)| [a, b]).collect(),
            expected_verdict: entry.expected_verdict,
            description: entry.description.clone(),
        },
        samples,
        parallel,
        constancy,
        reverse,
        tube_chart,
        tube,
        level_sets,
        oracle,
        detector,
        verdict,
        certificate,
        checks,
        passed,
        timings: Timings { total_seconds: watch.start.elapsed().as_secs_f64(), stages: watch.stages },
    })
}

/// Does the run meet the exit-0 contract: every check passed and a conclusive verdict if any.
pub fn is_success(report: &VerificationReport) -> bool {
    report.passed && report.verdict != Some(Verdict::Inconclusive)
}

/// Summary lines for humans.
pub fn summary(report: &VerificationReport) -> String {
    let mut s = format!(
        "{} on {}: {} samples, {} parallel records, {} tube samples, {} checks, {} failed",
        serde_json::to_value(report.command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        report.surface.name,
        report.samples.len(),
        report.parallel.len(),
        report.tube.len(),
        report.checks.len(),
        report.failures().count()
    );
    if let Some(v) = report.verdict {
        s.push_str(&format!(
            "\nverdict: {}",
            serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        ));
    }
    if let Some(c) = &report.certificate {
        s.push_str(&format!("\ncertificate: lambda = {:?}, power sums = {:?}", c.lambda, c.power_sums));
    }
    for c in report.failures() {
        let detail = match (c.value, c.limit, &c.detail) {
            (Some(v), Some(l), _) => format!("{v:e} > {l:e}"),
            (_, _, Some(d)) => d.clone(),
            _ => String::new(),
        };
        s.push_str(&format!("\nFAIL {}: {}", c.name, detail));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let g: GridSpec = "5x3@[-0.3,0.3]×[0,1]".parse().unwrap();
        assert_eq!(g.counts, vec![5, 3]);
        assert_eq!(g.bounds, vec![[-0.3, 0.3], [0.0, 1.0]]);
        assert_eq!(g.size(), 15);
        let again: GridSpec = g.to_string().parse().unwrap();
        assert_eq!(again, g);
        let pts = g.points();
        assert_eq!(pts[0], vec![-0.3, 0.0]);
        assert_eq!(pts[1], vec![-0.3, 0.5]);
        assert_eq!(pts[14], vec![0.3, 1.0]);
    }

    #[test]
    fn grid_errors() {
        for bad in ["5x5", "5x@[0,1]x[0,1]", "5x5@[0,1]", "5x5@[0,1]x[0,", "5x5@[0;1]x[0,1]", "2@[0,1]y[0,1]"] {
            assert!(matches!(bad.parse::<GridSpec>(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn grid_outside_domain_is_config_error() {
        let entry = catalog::get("sphere(1)").unwrap();
        let g: GridSpec = "2x2@[-0.5,0.5]x[-0.1,0.1]".parse().unwrap();
        assert!(matches!(g.validate(&entry), Err(Error::Config(_))));
        let d = GridSpec::default_for(&entry.chart_domain);
        assert!(d.validate(&entry).is_ok());
        assert!((d.bounds[0][1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = RunConfig::from_json(r#"{"surface": "paraboloid", "jet_order": 6}"#).unwrap();
        assert_eq!(c.jet_order, 6);
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(RunConfig::from_json(r#"{"surfce": "x"}"#).is_err());
        let bad = RunConfig { jet_order: 11, ..RunConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn sphere_invariants_run_passes() {
        let cfg = RunConfig { grid: Some("3x3@[-0.3,0.3]x[-0.3,0.3]".parse().unwrap()), ..RunConfig::default() };
        let rep = run(Command::Invariants, &cfg).unwrap();
        assert!(is_success(&rep), "{}", summary(&rep));
        assert_eq!(rep.samples.len(), 9);
        assert!(rep.verdict.is_none());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("u,v,lambda_1,lambda_2,L_1,L_2,apolarity_residual,gauss_residual"));
    }

    #[test]
    fn inadmissible_mu_is_usage_error() {
        let cfg = RunConfig { mu_values: Some(vec![0.99]), ..RunConfig::default() };
        let err = run(Command::Parallel, &cfg).unwrap_err();
        assert!(is_usage_error(&err));
    }

    #[test]
    fn perturbed_parallel_fails() {
        let cfg = RunConfig { surface: "perturbed(0.1)".into(), mu_values: Some(vec![0.1]), ..RunConfig::default() };
        let rep = run(Command::Parallel, &cfg).unwrap();
        assert!(!is_success(&rep));
        let spread = rep.checks.iter().find(|c| c.name == "parallel.mu=0.1.detT_spread").unwrap();
        assert!(!spread.passed && spread.value.unwrap() >= 1e-3);
    }
}
