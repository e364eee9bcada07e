//! Built-in test problems, error measurement and convergence sweeps.

use std::f64::consts::PI;
use std::time::Instant;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::basis::{AxisBasisSpec, PolyFamily, PolyKind};
use crate::curved::{fit_curved, fit_diagonal, trace_curve, BivariatePoly, CurvedApproximant, CurvedFitSpec, Rect};
use crate::error::{Error, Result};
use crate::piecewise::{bilinear_map, diagonal_mesh, fit_piecewise, PiecewiseApproximant};
use crate::poles::{ClusterSpec, DEFAULT_SIGMA};
use crate::solver::{TsvdMode, TsvdOptions};
use crate::tensor::{axis_nodes, fit_tensor, GridSpec, TensorApproximant};

/// Marching-squares resolution used by the curved presets.
pub const TRACE_RESOLUTION: usize = 512;

/// Errors at or below this level count as stagnated when fitting rates.
pub const STAGNATION_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetGeometry {
    Square,
    Disk,
    PiecewiseDiagonal,
    CurvedElliptic,
    CurvedDiagonal,
}

/// Coordinates an approximant (or a target function) lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Cartesian `(x, y)` on a rectangle.
    Rectangle { x: (f64, f64), y: (f64, f64) },
    /// Polar `(r, theta)` on the unit disk, `theta` in `[-pi, pi)`.
    Disk,
}

impl Geometry {
    pub const UNIT_SQUARE: Geometry = Geometry::Rectangle { x: (0.0, 1.0), y: (0.0, 1.0) };

    /// Whether a function defined on `self` can be evaluated everywhere on `inner`.
    pub fn covers(&self, inner: &Geometry) -> bool {
        let tol = 1e-12;
        match (self, inner) {
            (Geometry::Disk, Geometry::Disk) => true,
            (Geometry::Rectangle { x, y }, Geometry::Rectangle { x: ix, y: iy }) => {
                ix.0 >= x.0 - tol && ix.1 <= x.1 + tol && iy.0 >= y.0 - tol && iy.1 <= y.1 + tol
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    F1,
    F2,
    F3,
    Piecewise,
    Elliptic,
    Diagonal,
}

impl PresetName {
    pub const ALL: [PresetName; 6] = [
        PresetName::F1,
        PresetName::F2,
        PresetName::F3,
        PresetName::Piecewise,
        PresetName::Elliptic,
        PresetName::Diagonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::F1 => "f1",
            PresetName::F2 => "f2",
            PresetName::F3 => "f3",
            PresetName::Piecewise => "piecewise",
            PresetName::Elliptic => "elliptic",
            PresetName::Diagonal => "diagonal",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))
    }
}

/// `(x(1-x))^(1/4+y) sqrt(y(1-y))`, singular on all four edges of the unit square.
pub fn f1(x: f64, y: f64) -> f64 {
    (x * (1.0 - x)).powf(0.25 + y) * (y * (1.0 - y)).sqrt()
}

/// `sqrt(x+y)`, singular at the origin.
pub fn f2(x: f64, y: f64) -> f64 {
    (x + y).sqrt()
}

/// Polar test function with a jump at `r = 3/4` and a square-root branch at `r = 1`.
pub fn f3(r: f64, theta: f64) -> f64 {
    if r <= 0.75 {
        (10.0 * r + 10.0 * theta).cos()
    } else {
        -(1.0 - r).max(0.0).sqrt() * (10.0 * r - 10.0 * theta).cos()
    }
}

/// `cos(5 pi (x+y)) sqrt|x-y|`.
pub fn diagonal_sqrt(x: f64, y: f64) -> f64 {
    (5.0 * PI * (x + y)).cos() * (x - y).abs().sqrt()
}

/// `|x^3 - 2x + 1 - y^2|`.
pub fn elliptic_abs(x: f64, y: f64) -> f64 {
    (x * x * x - 2.0 * x + 1.0 - y * y).abs()
}

/// `(1 + xy) log(1/|x-y|) + cos(x+y)`; infinite on the diagonal.
pub fn diagonal_log(x: f64, y: f64) -> f64 {
    (1.0 + x * y) * -(x - y).abs().ln() + (x + y).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub geometry: PresetGeometry,
    /// Clustering levels per singular line (or curve).
    pub nq: usize,
    /// Polynomial degree; numerator degree for the curved presets.
    pub np: usize,
    /// Smooth block degree of the curved presets.
    pub ns: usize,
    /// Angular Fourier degree of the disk preset.
    pub fourier_degree: usize,
    /// Curve points per component for the curved presets.
    pub m_curve: usize,
    /// Chebyshev points per axis for the curved presets.
    pub m_cheb: usize,
    /// Points per axis (or per patch axis) of the equispaced error grid.
    pub eval_points: usize,
    /// Maximum error of the reference run this preset reproduces.
    pub reference_error: f64,
    /// Error level the demo must reach.
    pub tolerance: f64,
}

pub fn builtin(name: &str) -> Result<Preset> {
    Ok(preset(PresetName::parse(name)?))
}

pub fn preset(name: PresetName) -> Preset {
    let base = Preset {
        name,
        geometry: PresetGeometry::Square,
        nq: 150,
        np: 16,
        ns: 0,
        fourier_degree: 0,
        m_curve: 0,
        m_cheb: 0,
        eval_points: 1000,
        reference_error: 0.0,
        tolerance: 0.0,
    };
    match name {
        PresetName::F1 => Preset {
            reference_error: 4.6e-15,
            tolerance: 1e-12,
            ..base
        },
        PresetName::F2 => Preset {
            reference_error: 1.6e-13,
            tolerance: 1e-10,
            ..base
        },
        PresetName::F3 => Preset {
            geometry: PresetGeometry::Disk,
            np: 20,
            fourier_degree: 40,
            reference_error: 3.6e-13,
            tolerance: 1e-8,
            ..base
        },
        PresetName::Piecewise => Preset {
            geometry: PresetGeometry::PiecewiseDiagonal,
            np: 25,
            eval_points: 500,
            reference_error: 1.4e-8,
            tolerance: 1e-6,
            ..base
        },
        PresetName::Elliptic => Preset {
            geometry: PresetGeometry::CurvedElliptic,
            nq: 50,
            np: 3,
            ns: 60,
            m_curve: 20,
            m_cheb: 120,
            eval_points: 400,
            reference_error: 1.9e-8,
            tolerance: 1e-5,
            ..base
        },
        PresetName::Diagonal => Preset {
            geometry: PresetGeometry::CurvedDiagonal,
            nq: 25,
            np: 5,
            ns: 15,
            m_curve: 10,
            m_cheb: 30,
            eval_points: 1000,
            reference_error: 2.25e-4,
            tolerance: 1e-3,
            ..base
        },
    }
}

impl Preset {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.name {
            PresetName::F1 => f1(x, y),
            PresetName::F2 => f2(x, y),
            PresetName::F3 => f3(x, y),
            PresetName::Piecewise => diagonal_sqrt(x, y),
            PresetName::Elliptic => elliptic_abs(x, y),
            PresetName::Diagonal => diagonal_log(x, y),
        }
    }

    pub fn function(&self) -> impl Fn(f64, f64) -> f64 + Copy + '_ {
        move |x, y| self.eval(x, y)
    }

    pub fn domain(&self) -> Geometry {
        match self.geometry {
            PresetGeometry::Disk => Geometry::Disk,
            PresetGeometry::CurvedElliptic => Geometry::Rectangle {
                x: (-2.0, 2.0),
                y: (-2.0, 2.0),
            },
            _ => Geometry::UNIT_SQUARE,
        }
    }
}

/// Parameters overriding a preset's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub nq: Option<usize>,
    pub np: Option<usize>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub mode: Option<TsvdMode>,
}

impl Overrides {
    pub fn solver(&self) -> TsvdOptions {
        let mut o = TsvdOptions::default();
        if let Some(e) = self.epsilon {
            o.epsilon = e;
        }
        if let Some(m) = self.mode {
            o.mode = m;
        }
        o
    }
}

/// Any fitted model, tagged by scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "data", rename_all = "snake_case")]
pub enum Approximant {
    Tensor(TensorApproximant),
    Piecewise(PiecewiseApproximant),
    Curved(CurvedApproximant),
}

impl Approximant {
    pub fn geometry(&self) -> Geometry {
        match self {
            Approximant::Tensor(t) => {
                if t.y_spec.poly.kind == PolyKind::Fourier {
                    Geometry::Disk
                } else {
                    Geometry::Rectangle {
                        x: t.x_spec.poly.interval,
                        y: t.y_spec.poly.interval,
                    }
                }
            }
            Approximant::Piecewise(p) => Geometry::Rectangle {
                x: (p.bounds[0], p.bounds[1]),
                y: (p.bounds[2], p.bounds[3]),
            },
            Approximant::Curved(c) => Geometry::Rectangle {
                x: c.curve.domain.x,
                y: c.curve.domain.y,
            },
        }
    }

    pub fn check_shape(&self) -> Result<()> {
        match self {
            Approximant::Tensor(t) => t.check_shape(),
            Approximant::Piecewise(p) => p.patches.iter().try_for_each(|f| f.approximant.check_shape()),
            Approximant::Curved(c) => c.check_shape(),
        }
    }

    /// Value at one point; `None` outside a piecewise mesh.
    pub fn eval(&self, x: f64, y: f64) -> Result<Option<c64>> {
        match self {
            Approximant::Tensor(t) => t.eval(x, y).map(Some),
            Approximant::Piecewise(p) => p.eval(x, y),
            Approximant::Curved(c) => c.eval(x, y).map(Some),
        }
    }

    pub fn report(&self) -> Vec<&crate::solver::FitReport> {
        match self {
            Approximant::Tensor(t) => vec![&t.report],
            Approximant::Piecewise(p) => p.patches.iter().map(|f| &f.approximant.report).collect(),
            Approximant::Curved(c) => vec![&c.report],
        }
    }

    /// Largest sample residual and coefficient norm (over all patches).
    pub fn summary(&self) -> (f64, f64) {
        let reports = self.report();
        let residual = reports.iter().map(|r| r.residual_max).fold(0.0, f64::max);
        let coeff = reports.iter().map(|r| r.coeff_frobenius * r.coeff_frobenius).sum::<f64>().sqrt();
        (residual, coeff)
    }
}

/// Axis specs of the square and disk presets.
pub fn tensor_specs(p: &Preset, nq: usize, np: usize, sigma: f64) -> Result<(AxisBasisSpec, AxisBasisSpec)> {
    let unit = PolyFamily::chebyshev(np, (0.0, 1.0));
    match p.name {
        PresetName::F1 => {
            let edges = [ClusterSpec::new(0.0, nq, sigma), ClusterSpec::new(1.0, nq, sigma)];
            Ok((AxisBasisSpec::new(unit, &edges)?, AxisBasisSpec::new(unit, &edges)?))
        }
        PresetName::F2 => {
            let origin = [ClusterSpec::new(0.0, nq, sigma)];
            Ok((AxisBasisSpec::new(unit, &origin)?, AxisBasisSpec::new(unit, &origin)?))
        }
        PresetName::F3 => {
            let radial = [ClusterSpec::new(0.75, nq, sigma), ClusterSpec::new(1.0, nq, sigma)];
            Ok((
                AxisBasisSpec::new(unit, &radial)?,
                AxisBasisSpec::polynomial(PolyFamily::fourier(p.fourier_degree)),
            ))
        }
        _ => Err(Error::param(format!("preset '{}' is not a tensor problem", p.name.as_str()))),
    }
}

/// Curved fit settings of the curved presets.
pub fn curved_spec(p: &Preset, nq: usize, np: usize, sigma: f64, epsilon: f64) -> CurvedFitSpec {
    let mut spec = CurvedFitSpec::new(nq, np, p.ns, sigma);
    spec.grid.m_curve = p.m_curve;
    spec.grid.m_cheb = p.m_cheb;
    spec.epsilon = epsilon;
    spec
}

pub fn fit_preset(p: &Preset, o: &Overrides) -> Result<Approximant> {
    let nq = o.nq.unwrap_or(p.nq);
    let np = o.np.unwrap_or(p.np);
    let sigma = o.sigma.unwrap_or(DEFAULT_SIGMA);
    let opts = o.solver();
    opts.validate()?;
    let f = p.function();
    match p.geometry {
        PresetGeometry::Square | PresetGeometry::Disk => {
            let (xs, ys) = tensor_specs(p, nq, np, sigma)?;
            fit_tensor(f, &xs, &ys, &GridSpec::default(), &opts).map(Approximant::Tensor)
        }
        PresetGeometry::PiecewiseDiagonal => {
            fit_piecewise(f, &diagonal_mesh(nq, np), sigma, &GridSpec::default(), &opts).map(Approximant::Piecewise)
        }
        PresetGeometry::CurvedElliptic => {
            let domain = Rect::new((-2.0, 2.0), (-2.0, 2.0));
            let curve = trace_curve(&BivariatePoly::elliptic(), domain, TRACE_RESOLUTION)?;
            fit_curved(f, &curve, &curved_spec(p, nq, np, sigma, opts.epsilon)).map(Approximant::Curved)
        }
        PresetGeometry::CurvedDiagonal => {
            let domain = Rect::new((0.0, 1.0), (0.0, 1.0));
            fit_diagonal(f, domain, TRACE_RESOLUTION, &curved_spec(p, nq, np, sigma, opts.epsilon))
                .map(Approximant::Curved)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum GridKind {
    /// `n x n` cell-centered points (per patch for piecewise models).
    Equispaced(usize),
    /// Nodes laid out like the fit samples, three times denser.
    SamplingLike,
}

/// Cell-centered points `a + (b-a)(i + 1/2)/n`.
pub fn cell_centers(n: usize, (a, b): (f64, f64)) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub max_error: f64,
    pub mean_error: f64,
    pub n_points: usize,
}

#[derive(Default)]
struct Accumulator {
    max: f64,
    sum: f64,
    n: usize,
}

impl Accumulator {
    fn push(&mut self, e: f64) {
        self.max = self.max.max(e);
        self.sum += e;
        self.n += 1;
    }

    fn finish(self) -> ErrorStats {
        ErrorStats {
            max_error: self.max,
            mean_error: if self.n == 0 { 0.0 } else { self.sum / self.n as f64 },
            n_points: self.n,
        }
    }
}

/// Visits `(x, y, |f - r|)` over an error grid; points where `f` is not
/// finite are skipped.
pub fn visit_errors<F, V>(approx: &Approximant, f: F, kind: GridKind, mut visit: V) -> Result<ErrorStats>
where
    F: Fn(f64, f64) -> f64,
    V: FnMut(f64, f64, f64),
{
    approx.check_shape()?;
    let mut acc = Accumulator::default();
    let mut record = |x: f64, y: f64, r: c64| {
        let v = f(x, y);
        if v.is_finite() {
            let e = (r - c64::new(v, 0.0)).norm();
            acc.push(e);
            visit(x, y, e);
        }
    };
    match approx {
        Approximant::Tensor(t) => {
            let (xs, ys) = tensor_error_nodes(t, kind)?;
            let values = t.eval_grid(&xs, &ys)?;
            for (j, &y) in ys.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    record(x, y, values[(i, j)]);
                }
            }
        }
        Approximant::Piecewise(p) => {
            for fit in &p.patches {
                let t = &fit.approximant;
                let (ss, ts) = tensor_error_nodes(t, kind)?;
                let values = t.eval_grid(&ss, &ts)?;
                for (j, &tt) in ts.iter().enumerate() {
                    for (i, &s) in ss.iter().enumerate() {
                        let (x, y) = bilinear_map(&fit.patch, s, tt);
                        record(x, y, values[(i, j)]);
                    }
                }
            }
        }
        Approximant::Curved(c) => {
            let points: Vec<(f64, f64)> = match kind {
                GridKind::Equispaced(n) => {
                    let xs = cell_centers(n, c.curve.domain.x);
                    let ys = cell_centers(n, c.curve.domain.y);
                    ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
                }
                GridKind::SamplingLike => {
                    let g = c.grid;
                    crate::curved::build_curved_grid(&c.curve, 3 * g.m_curve, 3 * g.m_cluster, 3 * g.m_cheb, g.sigma)?
                }
            };
            let values = crate::curved::eval_curved(c, &points)?;
            for (&(x, y), &r) in points.iter().zip(&values) {
                record(x, y, r);
            }
        }
    }
    Ok(acc.finish())
}

fn tensor_error_nodes(t: &TensorApproximant, kind: GridKind) -> Result<(Vec<f64>, Vec<f64>)> {
    let interval = |s: &AxisBasisSpec| match s.poly.kind {
        PolyKind::Chebyshev => s.poly.interval,
        PolyKind::Fourier => (-PI, PI),
    };
    Ok(match kind {
        GridKind::Equispaced(n) => (cell_centers(n, interval(&t.x_spec)), cell_centers(n, interval(&t.y_spec))),
        GridKind::SamplingLike => {
            let dense = GridSpec {
                oversample_q: 9.0,
                oversample_p: 6.0,
                ..GridSpec::default()
            };
            (axis_nodes(&t.x_spec, &dense)?, axis_nodes(&t.y_spec, &dense)?)
        }
    })
}

pub fn error_stats<F>(approx: &Approximant, f: F, kind: GridKind) -> Result<ErrorStats>
where
    F: Fn(f64, f64) -> f64,
{
    visit_errors(approx, f, kind, |_, _, _| {})
}

pub fn max_error_grid(approx: &Approximant, p: &Preset, kind: GridKind) -> Result<f64> {
    Ok(error_stats(approx, p.function(), kind)?.max_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub nq: usize,
    pub np: usize,
    pub max_error: f64,
    pub residual: f64,
    pub coeff_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Default)]
pub struct Sweep {
    pub rows: Vec<ConvergenceRow>,
    /// Rows that failed, with the requested degree and the error message.
    pub failures: Vec<(usize, String)>,
}

/// One fit and error measurement per entry of `nq_list`.
pub fn convergence_sweep(p: &Preset, nq_list: &[usize], o: &Overrides, kind: GridKind) -> Result<Sweep> {
    if nq_list.is_empty() {
        return Err(Error::param("empty degree list"));
    }
    let mut sweep = Sweep::default();
    for &nq in nq_list {
        let row_overrides = Overrides { nq: Some(nq), ..*o };
        match run_row(p, &row_overrides, kind) {
            Ok(row) => sweep.rows.push(row),
            Err(e) => sweep.failures.push((nq, e.to_string())),
        }
    }
    Ok(sweep)
}

/// Fits and measures one configuration.
pub fn run_row(p: &Preset, o: &Overrides, kind: GridKind) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let approx = fit_preset(p, o)?;
    let seconds = start.elapsed().as_secs_f64();
    let max_error = max_error_grid(&approx, p, kind)?;
    let (residual, coeff_norm) = approx.summary();
    Ok(ConvergenceRow {
        nq: o.nq.unwrap_or(p.nq),
        np: o.np.unwrap_or(p.np),
        max_error,
        residual,
        coeff_norm,
        seconds,
    })
}

/// Decay constant `C` of `max_error ~ exp(-C sqrt(nq))` and the `r^2` of the
/// log-linear fit. Rows at or below the stagnation floor are ignored; fewer
/// than three remaining rows give `None`.
pub fn fit_rate(rows: &[ConvergenceRow]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_error > STAGNATION_FLOOR && r.max_error.is_finite())
        .map(|r| ((r.nq as f64).sqrt(), r.max_error.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((-slope, r2))
}
