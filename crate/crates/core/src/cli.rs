//! Command implementations behind the `litfit2d` binary: JSON fit configs,
//! approximant files, error tables, sweeps and demos.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::basis::{AxisBasisSpec, PolyFamily};
use crate::curved::{fit_curved, fit_diagonal, trace_curve, BivariatePoly, CurvedFitSpec, CurvedGridSpec, Rect};
use crate::error::{Error, Result};
use crate::harness::{
    builtin, convergence_sweep, curved_spec, fit_rate, preset, tensor_specs, visit_errors, Approximant, ConvergenceRow,
    ErrorStats, Geometry, GridKind, Overrides, Preset, PresetGeometry, PresetName, TRACE_RESOLUTION,
};
use crate::piecewise::{diagonal_mesh, fit_piecewise, QuadPatch};
use crate::poles::{ClusterSpec, DEFAULT_SIGMA};
use crate::solver::{TsvdMode, TsvdOptions, DEFAULT_EPSILON};
use crate::tensor::{fit_tensor, fit_tensor_samples, GridSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Tensor,
    Piecewise,
    Curved,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesRef {
    /// CSV file with header `x,y,f` covering a full product grid.
    pub samples: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionRef {
    Builtin(String),
    Samples(SamplesRef),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub mode: Option<TsvdMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub poly: PolyFamily,
    #[serde(default)]
    pub clusters: Vec<ClusterSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorConfig {
    pub x: AxisConfig,
    pub y: AxisConfig,
}

/// Either inline patches or a path to a JSON file holding a patch array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConfig {
    #[serde(default)]
    pub patches: Option<Vec<QuadPatch>>,
    #[serde(default)]
    pub mesh: Option<PathBuf>,
}

/// Settings of the curved and diagonal schemes. Unset grid counts follow the
/// usual doubling rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvedConfig {
    /// Zero set carrying the singularity. Omitted for the diagonal scheme.
    #[serde(default)]
    pub q: Option<BivariatePoly>,
    pub domain: Rect,
    pub nq: usize,
    pub np: usize,
    pub ns: usize,
    #[serde(default)]
    pub m_curve: Option<usize>,
    #[serde(default)]
    pub m_cluster: Option<usize>,
    #[serde(default)]
    pub m_cheb: Option<usize>,
    /// Offset spacing of the samples normal to the curve.
    #[serde(default)]
    pub sample_sigma: Option<f64>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub memory_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub scheme: Scheme,
    pub function: FunctionRef,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tensor: Option<TensorConfig>,
    #[serde(default)]
    pub piecewise: Option<PiecewiseConfig>,
    #[serde(default)]
    pub curved: Option<CurvedConfig>,
    #[serde(default)]
    pub diagonal: Option<CurvedConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Solver and pole settings given on the command line; they win over the config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CliOverrides {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub mode: Option<TsvdMode>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("sigma must be positive, got {sigma}")))
    }
}

/// Resolved fit settings, checked before any computation starts.
struct Plan {
    sigma: Option<f64>,
    opts: TsvdOptions,
}

impl FitConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text)
    }

    fn plan(&self, cli: &CliOverrides) -> Result<Plan> {
        let sigma = cli.sigma.or(self.sigma);
        if let Some(s) = sigma {
            check_sigma(s)?;
        }
        let opts = TsvdOptions {
            epsilon: cli.epsilon.or(self.solver.epsilon).unwrap_or(DEFAULT_EPSILON),
            mode: cli.mode.or(self.solver.mode).unwrap_or_default(),
        };
        opts.validate().map_err(|e| config_err(e.to_string()))?;
        self.grid.validate().map_err(|e| config_err(e.to_string()))?;

        let sections = [
            (Scheme::Tensor, self.tensor.is_some()),
            (Scheme::Piecewise, self.piecewise.is_some()),
            (Scheme::Curved, self.curved.is_some()),
            (Scheme::Diagonal, self.diagonal.is_some()),
        ];
        for (scheme, present) in sections {
            if present && scheme != self.scheme {
                return Err(config_err(format!(
                    "section '{}' does not belong to scheme '{}'",
                    scheme_name(scheme),
                    scheme_name(self.scheme)
                )));
            }
        }
        match &self.function {
            FunctionRef::Builtin(name) => {
                let p = builtin(name).map_err(|e| config_err(e.to_string()))?;
                let has_section = sections.iter().any(|s| s.1);
                if !has_section && !preset_matches(&p, self.scheme) {
                    return Err(config_err(format!(
                        "function '{name}' has no default '{}' setup; give the scheme section explicitly",
                        scheme_name(self.scheme)
                    )));
                }
            }
            FunctionRef::Samples(_) => {
                if self.scheme != Scheme::Tensor || self.tensor.is_none() {
                    return Err(config_err("tabulated samples need the tensor scheme with explicit axes"));
                }
            }
        }
        if let Some(t) = &self.tensor {
            for c in t.x.clusters.iter().chain(&t.y.clusters) {
                c.validate().map_err(|e| config_err(e.to_string()))?;
            }
        }
        if let Some(pc) = &self.piecewise {
            if pc.patches.is_some() == pc.mesh.is_some() {
                return Err(config_err("piecewise needs exactly one of 'patches' or 'mesh'"));
            }
            if let Some(ps) = &pc.patches {
                for (i, p) in ps.iter().enumerate() {
                    p.validate().map_err(|e| config_err(format!("patch {i}: {e}")))?;
                }
            }
        }
        for c in [&self.curved, &self.diagonal].into_iter().flatten() {
            c.domain.validate().map_err(|e| config_err(e.to_string()))?;
            if let Some(s) = c.sample_sigma {
                check_sigma(s)?;
            }
            if c.resolution.is_some_and(|r| r < 32) {
                return Err(config_err("resolution must be at least 32"));
            }
        }
        if self.scheme == Scheme::Curved && self.curved.as_ref().is_some_and(|c| c.q.is_none()) {
            return Err(config_err("the curved scheme needs 'q'"));
        }
        if let Some(d) = &self.diagonal {
            if d.q.as_ref().is_some_and(|q| *q != BivariatePoly::diagonal()) {
                return Err(config_err("the diagonal scheme fixes q = x - y"));
            }
        }
        Ok(Plan { sigma, opts })
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Tensor => "tensor",
        Scheme::Piecewise => "piecewise",
        Scheme::Curved => "curved",
        Scheme::Diagonal => "diagonal",
    }
}

fn preset_matches(p: &Preset, scheme: Scheme) -> bool {
    matches!(
        (p.geometry, scheme),
        (PresetGeometry::Square | PresetGeometry::Disk, Scheme::Tensor)
            | (PresetGeometry::PiecewiseDiagonal, Scheme::Piecewise)
            | (PresetGeometry::CurvedElliptic, Scheme::Curved)
            | (PresetGeometry::CurvedDiagonal, Scheme::Diagonal)
    )
}

/// Reads `x,y,f` rows that together cover a product grid.
pub fn read_product_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Mat<c64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y", "f"] {
        return Err(config_err(format!("{}: header must be x,y,f", path.display())));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<(f64, f64, f64)>() {
        rows.push(rec.map_err(|e| csv_err(path, e))?);
    }
    let axis = |pick: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = axis(|r| r.0);
    let ys = axis(|r| r.1);
    if xs.len() * ys.len() != rows.len() {
        return Err(config_err(format!(
            "{}: {} rows do not form a product grid ({} x values, {} y values)",
            path.display(),
            rows.len(),
            xs.len(),
            ys.len()
        )));
    }
    let index = |v: &[f64], t: f64| v.binary_search_by(|a| a.total_cmp(&t)).unwrap_or(usize::MAX);
    let mut values = Mat::<c64>::zeros(xs.len(), ys.len());
    let mut seen = vec![false; rows.len()];
    for &(x, y, f) in &rows {
        if !f.is_finite() {
            return Err(Error::NonFiniteSample { x, y, value: f });
        }
        let (i, j) = (index(&xs, x), index(&ys, y));
        let k = j * xs.len() + i;
        if seen[k] {
            return Err(config_err(format!("{}: duplicate sample at ({x}, {y})", path.display())));
        }
        seen[k] = true;
        values[(i, j)] = c64::new(f, 0.0);
    }
    Ok((xs, ys, values))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => io_err(path, source),
            _ => unreachable!(),
        }
    } else {
        config_err(format!("{}: {e}", path.display()))
    }
}

fn axis_spec(a: &AxisConfig, sigma: Option<f64>) -> Result<AxisBasisSpec> {
    let clusters: Vec<ClusterSpec> = a
        .clusters
        .iter()
        .map(|c| ClusterSpec {
            sigma: sigma.unwrap_or(c.sigma),
            ..*c
        })
        .collect();
    AxisBasisSpec::new(a.poly, &clusters)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn curved_fit_spec(c: &CurvedConfig, sigma: f64, epsilon: f64) -> CurvedFitSpec {
    let mut spec = CurvedFitSpec::new(c.nq, c.np, c.ns, sigma);
    if let Some(m) = c.m_curve {
        spec.grid.m_curve = m;
    }
    if let Some(m) = c.m_cheb {
        spec.grid.m_cheb = m;
    }
    if let Some(m) = c.m_cluster {
        spec.grid.m_cluster = m;
    }
    spec.grid.sigma = c
        .sample_sigma
        .unwrap_or_else(|| CurvedGridSpec::matched_sigma(c.nq, sigma, spec.grid.m_cluster));
    if let Some(cap) = c.memory_cap {
        spec.memory_cap = cap;
    }
    spec.epsilon = epsilon;
    spec
}

/// Serialized approximant together with the coordinates it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximantFile {
    pub format_version: u32,
    /// Built-in function the model was fitted to, if any.
    #[serde(default)]
    pub function: Option<String>,
    pub geometry: Geometry,
    pub approximant: Approximant,
}

impl ApproximantFile {
    pub fn new(approximant: Approximant, function: Option<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            function,
            geometry: approximant.geometry(),
            approximant,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(config_err(format!("unsupported format_version {v}"))),
            None => return Err(config_err("missing format_version")),
        }
        let file: Self = serde_json::from_value(value).map_err(|e| config_err(e.to_string()))?;
        file.approximant.check_shape().map_err(|e| config_err(e.to_string()))?;
        if file.geometry != file.approximant.geometry() {
            return Err(config_err("stored geometry disagrees with the approximant"));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io_err(path, std::io::Error::other("not a file path")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSummary {
    pub residual_max: f64,
    pub coeff_frobenius: f64,
    pub seconds: f64,
}

/// Runs a validated config. Relative paths inside it resolve against `base`.
pub fn run_fit(cfg: &FitConfig, base: &Path, cli: &CliOverrides) -> Result<(ApproximantFile, FitSummary)> {
    let plan = cfg.plan(cli)?;
    let sigma = plan.sigma;
    let opts = plan.opts;
    let start = Instant::now();
    let approx = match &cfg.function {
        FunctionRef::Samples(s) => {
            let t = cfg.tensor.as_ref().expect("checked in plan");
            let (xs, ys, values) = read_product_samples(&resolve(base, &s.samples))?;
            let (x, y) = (axis_spec(&t.x, sigma)?, axis_spec(&t.y, sigma)?);
            Approximant::Tensor(fit_tensor_samples(&xs, &ys, values.as_ref(), &x, &y, &opts)?)
        }
        FunctionRef::Builtin(name) => {
            let p = builtin(name)?;
            let f = p.function();
            let s = sigma.unwrap_or(DEFAULT_SIGMA);
            let approx = match cfg.scheme {
                Scheme::Tensor => {
                    let (x, y) = match &cfg.tensor {
                        Some(t) => (axis_spec(&t.x, sigma)?, axis_spec(&t.y, sigma)?),
                        None => tensor_specs(&p, p.nq, p.np, s)?,
                    };
                    Approximant::Tensor(fit_tensor(f, &x, &y, &cfg.grid, &opts)?)
                }
                Scheme::Piecewise => {
                    let patches = match &cfg.piecewise {
                        Some(PiecewiseConfig { patches: Some(ps), .. }) => ps.clone(),
                        Some(PiecewiseConfig { mesh: Some(m), .. }) => load_mesh(&resolve(base, m))?,
                        _ => diagonal_mesh(p.nq, p.np),
                    };
                    Approximant::Piecewise(fit_piecewise(f, &patches, s, &cfg.grid, &opts)?)
                }
                Scheme::Curved => {
                    let (q, domain, spec, res) = match &cfg.curved {
                        Some(c) => (
                            c.q.clone().expect("checked in plan"),
                            c.domain,
                            curved_fit_spec(c, s, opts.epsilon),
                            c.resolution.unwrap_or(TRACE_RESOLUTION),
                        ),
                        None => (
                            BivariatePoly::elliptic(),
                            preset_rect(&p),
                            curved_spec(&p, p.nq, p.np, s, opts.epsilon),
                            TRACE_RESOLUTION,
                        ),
                    };
                    let curve = trace_curve(&q, domain, res)?;
                    Approximant::Curved(fit_curved(f, &curve, &spec)?)
                }
                Scheme::Diagonal => {
                    let (domain, spec, res) = match &cfg.diagonal {
                        Some(c) => (
                            c.domain,
                            curved_fit_spec(c, s, opts.epsilon),
                            c.resolution.unwrap_or(TRACE_RESOLUTION),
                        ),
                        None => (preset_rect(&p), curved_spec(&p, p.nq, p.np, s, opts.epsilon), TRACE_RESOLUTION),
                    };
                    Approximant::Curved(fit_diagonal(f, domain, res, &spec)?)
                }
            };
            if !p.domain().covers(&approx.geometry()) {
                return Err(config_err(format!("the fit region lies outside the domain of '{name}'")));
            }
            approx
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let (residual_max, coeff_frobenius) = approx.summary();
    let function = match &cfg.function {
        FunctionRef::Builtin(n) => Some(PresetName::parse(n)?.as_str().to_string()),
        FunctionRef::Samples(_) => None,
    };
    Ok((
        ApproximantFile::new(approx, function),
        FitSummary {
            residual_max,
            coeff_frobenius,
            seconds,
        },
    ))
}

fn preset_rect(p: &Preset) -> Rect {
    match p.domain() {
        Geometry::Rectangle { x, y } => Rect::new(x, y),
        Geometry::Disk => Rect::new((-1.0, 1.0), (-1.0, 1.0)),
    }
}

pub fn load_mesh(path: &Path) -> Result<Vec<QuadPatch>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let patches: Vec<QuadPatch> =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    for (i, p) in patches.iter().enumerate() {
        p.validate().map_err(|e| config_err(format!("patch {i}: {e}")))?;
    }
    Ok(patches)
}

/// Where the reference values of an error table come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Builtin(String),
    /// Tabulated `x,y,f` points; errors are measured at exactly these points.
    Samples(PathBuf),
}

/// Error table: one `(x, y, |f - r|)` row per kept grid point plus statistics.
pub struct ErrorTable {
    pub rows: Vec<(f64, f64, f64)>,
    pub stats: ErrorStats,
}

/// Compares an approximant with reference values. `every` keeps one row in
/// `every` for the table; statistics always use every point.
pub fn run_eval(file: &ApproximantFile, reference: &Reference, kind: GridKind, every: usize) -> Result<ErrorTable> {
    if every == 0 {
        return Err(config_err("downsampling stride must be positive"));
    }
    let mut rows = Vec::new();
    let mut counter = 0usize;
    let mut keep = |x: f64, y: f64, e: f64| {
        if counter % every == 0 {
            rows.push((x, y, e));
        }
        counter += 1;
    };
    let stats = match reference {
        Reference::Builtin(name) => {
            let p = builtin(name)?;
            if !p.domain().covers(&file.geometry) {
                return Err(config_err(format!(
                    "approximant geometry does not match the domain of '{}'",
                    p.name.as_str()
                )));
            }
            visit_errors(&file.approximant, p.function(), kind, &mut keep)?
        }
        Reference::Samples(path) => {
            let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
            let (mut max, mut sum, mut n) = (0.0f64, 0.0, 0usize);
            for rec in rdr.deserialize::<(f64, f64, f64)>() {
                let (x, y, f) = rec.map_err(|e| csv_err(path, e))?;
                if !f.is_finite() {
                    continue;
                }
                let r = file
                    .approximant
                    .eval(x, y)
                    .map_err(|e| config_err(format!("sample ({x}, {y}): {e}")))?
                    .ok_or_else(|| config_err(format!("sample ({x}, {y}) lies outside the mesh")))?;
                let e = (r - c64::new(f, 0.0)).norm();
                max = max.max(e);
                sum += e;
                n += 1;
                keep(x, y, e);
            }
            ErrorStats {
                max_error: max,
                mean_error: if n == 0 { 0.0 } else { sum / n as f64 },
                n_points: n,
            }
        }
    };
    Ok(ErrorTable { rows, stats })
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    fill(&mut w).map_err(|e| Error::Numerical(format!("csv encoding failed: {e}")))?;
    w.into_inner().map_err(|e| Error::Numerical(format!("csv encoding failed: {e}")))
}

impl ErrorTable {
    pub fn points_csv(&self) -> Result<Vec<u8>> {
        csv_bytes(|w| {
            w.write_record(["x", "y", "abs_error"])?;
            self.rows.iter().try_for_each(|r| w.serialize(r))
        })
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let s = &self.stats;
        csv_bytes(|w| {
            w.write_record(["max_error", "mean_error", "n_points"])?;
            w.serialize((s.max_error, s.mean_error, s.n_points))
        })
    }
}

/// Summary file written next to an error table.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.csv");
    PathBuf::from(s)
}

/// Parses a degree list: `a:b:sqrt` (perfect squares from `a` to `b`),
/// `a:b:step`, `a:b` or `a,b,c`.
pub fn parse_nq_list(s: &str) -> Result<Vec<usize>> {
    let bad = || config_err(format!("cannot parse degree list '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let list = match parts.as_slice() {
        [one] => one
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        [a, b, rest @ ..] if rest.len() <= 1 => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            match rest.first().map(|r| r.trim()) {
                Some("sqrt") => {
                    let lo = (a as f64).sqrt().ceil() as usize;
                    (lo..).map(|k| k * k).take_while(|&n| n <= b).filter(|&n| n >= a).collect()
                }
                Some(step) => {
                    let step: usize = step.parse().map_err(|_| bad())?;
                    if step == 0 {
                        return Err(bad());
                    }
                    (a..=b).step_by(step).collect()
                }
                None => (a..=b).collect(),
            }
        }
        _ => return Err(bad()),
    };
    if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!("degree list '{s}' must be nonempty and ascending")));
    }
    Ok(list)
}

fn parse_real(t: &str) -> Option<f64> {
    let t = t.trim();
    if let Some(k) = t.strip_suffix("pi") {
        let k = if k.is_empty() { 1.0 } else { k.trim_end_matches('*').parse().ok()? };
        return Some(k * PI);
    }
    t.parse().ok()
}

/// Parses sweep values: `a,b,c` (entries may be multiples of `pi`, e.g. `2pi`)
/// or an integer range `a:b`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || config_err(format!("cannot parse value list '{s}'"));
    let list: Vec<f64> = if let Some((a, b)) = s.split_once(':') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).map(|v| v as f64).collect()
    } else {
        s.split(',').map(|t| parse_real(t).ok_or_else(bad)).collect::<Result<_>>()?
    };
    if list.is_empty() || list.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(list)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Sigma,
    Epsilon,
}

pub struct ConvergeRequest {
    pub preset: PresetName,
    /// Defaults to the preset's `nq` when absent.
    pub nq: Option<Vec<usize>>,
    pub np: Option<usize>,
    pub sweep: Option<(SweepParam, Vec<f64>)>,
    pub grid: GridKind,
    pub overrides: CliOverrides,
}

/// One block of rows sharing a swept parameter value.
pub struct ConvergeGroup {
    pub label: Option<(SweepParam, f64)>,
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(usize, String)>,
    pub rate: Option<(f64, f64)>,
}

pub fn run_converge(req: &ConvergeRequest) -> Result<Vec<ConvergeGroup>> {
    let p = preset(req.preset);
    let base = Overrides {
        nq: None,
        np: req.np,
        sigma: req.overrides.sigma,
        epsilon: req.overrides.epsilon,
        mode: req.overrides.mode,
    };
    let values: Vec<Option<(SweepParam, f64)>> = match &req.sweep {
        None => vec![None],
        Some((param, vals)) => vals.iter().map(|&v| Some((*param, v))).collect(),
    };
    let nq = req.nq.clone().unwrap_or_else(|| vec![p.nq]);
    let mut groups = Vec::with_capacity(values.len());
    for label in values {
        let mut o = base;
        match label {
            Some((SweepParam::Sigma, v)) => {
                check_sigma(v)?;
                o.sigma = Some(v);
            }
            Some((SweepParam::Epsilon, v)) => o.epsilon = Some(v),
            None => {}
        }
        o.solver().validate().map_err(|e| config_err(e.to_string()))?;
        if let Some(s) = o.sigma {
            check_sigma(s)?;
        }
        let sweep = convergence_sweep(&p, &nq, &o, req.grid)?;
        groups.push(ConvergeGroup {
            label,
            rate: fit_rate(&sweep.rows),
            rows: sweep.rows,
            failures: sweep.failures,
        });
    }
    Ok(groups)
}

/// CSV table of a sweep with `#` comment lines for groups, failures and rates.
pub fn converge_csv(groups: &[ConvergeGroup]) -> Result<String> {
    let mut out = String::from("nq,np,max_error,residual,coeff_norm,seconds\n");
    for g in groups {
        if let Some((param, v)) = g.label {
            let name = match param {
                SweepParam::Sigma => "sigma",
                SweepParam::Epsilon => "epsilon",
            };
            out.push_str(&format!("# {name}={v:e}\n"));
        }
        let body = csv_bytes(|w| g.rows.iter().try_for_each(|r| w.serialize(r)))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        for (nq, msg) in &g.failures {
            out.push_str(&format!("# failed nq={nq}: {}\n", msg.replace('\n', " ")));
        }
    }
    // The rate of the last group closes the table.
    for (i, g) in groups.iter().enumerate() {
        let line = match g.rate {
            Some((c, r2)) => format!("# rate C={c:.6} r2={r2:.6}"),
            None => "# rate C=undefined".to_string(),
        };
        if groups.len() > 1 {
            out.push_str(&format!("{line} group={i}\n"));
        } else {
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemoOutcome {
    pub max_error: f64,
    pub reference_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

/// Fits a preset, measures it on its evaluation grid and compares with the
/// preset tolerance.
pub fn run_demo(name: PresetName, cli: &CliOverrides) -> Result<(ApproximantFile, DemoOutcome)> {
    let p = preset(name);
    let o = Overrides {
        sigma: cli.sigma,
        epsilon: cli.epsilon,
        mode: cli.mode,
        ..Overrides::default()
    };
    if let Some(s) = o.sigma {
        check_sigma(s)?;
    }
    o.solver().validate().map_err(|e| config_err(e.to_string()))?;
    let start = Instant::now();
    let approx = crate::harness::fit_preset(&p, &o)?;
    let stats = crate::harness::error_stats(&approx, p.function(), GridKind::Equispaced(p.eval_points))?;
    let seconds = start.elapsed().as_secs_f64();
    let outcome = DemoOutcome {
        max_error: stats.max_error,
        reference_error: p.reference_error,
        tolerance: p.tolerance,
        passed: stats.max_error <= p.tolerance,
        seconds,
    };
    Ok((ApproximantFile::new(approx, Some(name.as_str().to_string())), outcome))
}
