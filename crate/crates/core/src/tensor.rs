//! Tensor-product rational approximants on rectangles (and polar rectangles).
//!
//! `r(x, y) = a(x)^T C b(y)` where `a` and `b` are the rows of the two axis
//! design matrices. Samples live on a product grid so the coefficient matrix
//! follows from the structured truncated-SVD solver.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::basis::{axis_design_matrix, axis_row, AxisBasisSpec, PolyKind};
use crate::error::{Error, Result};
use crate::poles::{clustered_samples, DEFAULT_DECADES};
use crate::solver::{tsvd_solve, FitReport, TsvdOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Explicit Chebyshev (or equispaced) node count per axis.
    pub m_cheb: Option<usize>,
    /// Explicit clustered node count per singular line.
    pub m_cluster: Option<usize>,
    pub oversample_q: f64,
    pub oversample_p: f64,
    pub decades: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            m_cheb: None,
            m_cluster: None,
            oversample_q: 3.0,
            oversample_p: 2.0,
            decades: DEFAULT_DECADES,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("oversample_q", self.oversample_q),
            ("oversample_p", self.oversample_p),
            ("decades", self.decades),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m_cheb == Some(0) || matches!(self.m_cluster, Some(m) if m < 2) {
            return Err(Error::param("explicit node counts must be positive (m_cluster >= 2)"));
        }
        Ok(())
    }

    /// Chebyshev (or trigonometric) node count for one axis. An axis without
    /// clusters of its own receives twice the base count.
    pub fn cheb_count(&self, spec: &AxisBasisSpec) -> usize {
        let ncols = spec.poly.ncols();
        let base = match self.m_cheb {
            Some(m) => m,
            None => {
                let n = match spec.poly.kind {
                    PolyKind::Chebyshev => spec.poly.degree,
                    PolyKind::Fourier => ncols,
                };
                ((self.oversample_p * n as f64).round() as usize).max(ncols)
            }
        };
        if spec.clusters.is_empty() && spec.poly.kind == PolyKind::Chebyshev {
            2 * base
        } else {
            base
        }
    }

    pub fn cluster_count(&self, n_levels: usize) -> usize {
        self.m_cluster
            .unwrap_or_else(|| (self.oversample_q * n_levels as f64).round() as usize)
            .max(2)
    }
}

/// Chebyshev extreme points on `[a, b]`, ascending, endpoints exact.
pub fn chebyshev_points(m: usize, (a, b): (f64, f64)) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..m)
            .map(|k| {
                if k == 0 {
                    a
                } else if k == m - 1 {
                    b
                } else {
                    let t = -(std::f64::consts::PI * k as f64 / (m - 1) as f64).cos();
                    0.5 * (a + b) + 0.5 * (b - a) * t
                }
            })
            .collect(),
    }
}

/// `m` equispaced angles in `[-pi, pi)`.
pub fn trigonometric_points(m: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..m).map(|k| -PI + 2.0 * PI * k as f64 / m as f64).collect()
}

/// Nodes clustering towards `location` from inside `interval`: both sides for
/// interior locations (scaled by the distance to the nearer edge, capped at 1),
/// one side for edge locations.
pub fn cluster_nodes(location: f64, interval: (f64, f64), m: usize, decades: f64) -> Result<Vec<f64>> {
    let (a, b) = interval;
    let tol = 1e-12 * (b - a);
    let left = location - a > tol;
    let right = b - location > tol;
    let scale = if left && right {
        (location - a).min(b - location).min(1.0)
    } else {
        (b - a).min(1.0)
    };
    let offsets = clustered_samples(m, decades)?;
    let mut out = Vec::with_capacity(2 * m);
    for &d in &offsets {
        if right {
            out.push(location + scale * d);
        }
        if left {
            out.push(location - scale * d);
        }
    }
    out.retain(|&x| x >= a && x <= b);
    Ok(out)
}

fn sort_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// Sample abscissae for one axis, before deduplication.
pub fn axis_nodes_raw(spec: &AxisBasisSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    let m = grid.cheb_count(spec);
    let mut nodes = match spec.poly.kind {
        PolyKind::Chebyshev => chebyshev_points(m, spec.poly.interval),
        PolyKind::Fourier => trigonometric_points(m),
    };
    for c in &spec.clusters {
        let mq = grid.cluster_count(c.poles.spec.n_levels);
        nodes.extend(cluster_nodes(c.location, spec.poly.interval, mq, grid.decades)?);
    }
    Ok(nodes)
}

pub fn axis_nodes(spec: &AxisBasisSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    Ok(sort_dedup(axis_nodes_raw(spec, grid)?))
}

pub fn build_sample_grid(
    x_spec: &AxisBasisSpec,
    y_spec: &AxisBasisSpec,
    grid: &GridSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    Ok((axis_nodes(x_spec, grid)?, axis_nodes(y_spec, grid)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorApproximant {
    pub x_spec: AxisBasisSpec,
    pub y_spec: AxisBasisSpec,
    #[serde(with = "crate::io::complex_mat")]
    pub coeffs: Mat<c64>,
    pub report: FitReport,
}

/// Samples `f` on the product grid of `xs` and `ys`.
pub fn sample_product<F>(f: F, xs: &[f64], ys: &[f64]) -> Result<Mat<c64>>
where
    F: Fn(f64, f64) -> f64,
{
    let mut out = Mat::<c64>::zeros(xs.len(), ys.len());
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { x, y, value: v });
            }
            out[(i, j)] = c64::new(v, 0.0);
        }
    }
    Ok(out)
}

pub fn fit_tensor<F>(
    f: F,
    x_spec: &AxisBasisSpec,
    y_spec: &AxisBasisSpec,
    grid: &GridSpec,
    opts: &TsvdOptions,
) -> Result<TensorApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    let (xs, ys) = build_sample_grid(x_spec, y_spec, grid)?;
    let values = sample_product(f, &xs, &ys)?;
    fit_tensor_samples(&xs, &ys, values.as_ref(), x_spec, y_spec, opts)
}

/// Fits precomputed samples `values[(i, j)] = f(xs[i], ys[j])`.
pub fn fit_tensor_samples(
    xs: &[f64],
    ys: &[f64],
    values: faer::MatRef<'_, c64>,
    x_spec: &AxisBasisSpec,
    y_spec: &AxisBasisSpec,
    opts: &TsvdOptions,
) -> Result<TensorApproximant> {
    opts.validate()?;
    if values.nrows() != xs.len() || values.ncols() != ys.len() {
        return Err(Error::dim(format!(
            "sample matrix is {}x{}, grid is {}x{}",
            values.nrows(),
            values.ncols(),
            xs.len(),
            ys.len()
        )));
    }
    let a = axis_design_matrix(xs, x_spec)?;
    let b = axis_design_matrix(ys, y_spec)?;
    let (coeffs, report) = tsvd_solve(a.as_ref(), b.as_ref(), values, opts)?;
    Ok(TensorApproximant {
        x_spec: x_spec.clone(),
        y_spec: y_spec.clone(),
        coeffs,
        report,
    })
}

impl TensorApproximant {
    pub fn check_shape(&self) -> Result<()> {
        if self.coeffs.nrows() != self.x_spec.ncols() || self.coeffs.ncols() != self.y_spec.ncols() {
            return Err(Error::dim(format!(
                "coefficient matrix is {}x{}, specs require {}x{}",
                self.coeffs.nrows(),
                self.coeffs.ncols(),
                self.x_spec.ncols(),
                self.y_spec.ncols()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<c64> {
        let mut ra = vec![c64::new(0.0, 0.0); self.x_spec.ncols()];
        let mut rb = vec![c64::new(0.0, 0.0); self.y_spec.ncols()];
        axis_row(&self.x_spec, x, &mut ra)?;
        axis_row(&self.y_spec, y, &mut rb)?;
        let mut acc = c64::new(0.0, 0.0);
        for (l, &bl) in rb.iter().enumerate() {
            let mut col = c64::new(0.0, 0.0);
            for (k, &ak) in ra.iter().enumerate() {
                col += ak * self.coeffs[(k, l)];
            }
            acc += col * bl;
        }
        Ok(acc)
    }

    /// Values on the product grid `xs x ys`, as an `|xs| x |ys|` matrix.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Result<Mat<c64>> {
        self.check_shape()?;
        let a = axis_design_matrix(xs, &self.x_spec)?;
        let b = axis_design_matrix(ys, &self.y_spec)?;
        Ok(&a * &self.coeffs * b.transpose())
    }
}

pub fn eval_tensor(r: &TensorApproximant, points: &[(f64, f64)]) -> Result<Vec<c64>> {
    r.check_shape()?;
    points.iter().map(|&(x, y)| r.eval(x, y)).collect()
}

/// `round(1.3 sqrt(n_q))`.
pub fn default_poly_degree(n_q: usize) -> usize {
    (1.3 * (n_q as f64).sqrt()).round() as usize
}
