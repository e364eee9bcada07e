//! One-dimensional basis families and per-axis design matrices.
//!
//! An axis basis is a list of partial-fraction blocks, one per pole cluster,
//! followed by a polynomial block (scaled Chebyshev or real Fourier). Column
//! order is fixed: clusters in spec order, then the polynomial columns.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poles::{materialize_poles, ClusterSpec, Orientation, PoleSet};

/// Points this far outside an interval (in reference units) are clamped.
const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyKind {
    Chebyshev,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFamily {
    pub kind: PolyKind,
    pub degree: usize,
    /// Chebyshev interval, or the period cell `[-pi, pi]` for Fourier.
    pub interval: (f64, f64),
}

impl PolyFamily {
    pub fn chebyshev(degree: usize, interval: (f64, f64)) -> Self {
        Self {
            kind: PolyKind::Chebyshev,
            degree,
            interval,
        }
    }

    pub fn fourier(degree: usize) -> Self {
        Self {
            kind: PolyKind::Fourier,
            degree,
            interval: (-std::f64::consts::PI, std::f64::consts::PI),
        }
    }

    pub fn ncols(&self) -> usize {
        match self.kind {
            PolyKind::Chebyshev => self.degree + 1,
            PolyKind::Fourier => 2 * self.degree + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCluster {
    pub location: f64,
    pub poles: PoleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBasisSpec {
    pub poly: PolyFamily,
    pub clusters: Vec<AxisCluster>,
}

impl AxisBasisSpec {
    pub fn polynomial(poly: PolyFamily) -> Self {
        Self {
            poly,
            clusters: Vec::new(),
        }
    }

    /// Materializes every cluster spec. One-sided real poles at the upper end
    /// of the interval are mirrored so they stay outside the domain.
    pub fn new(poly: PolyFamily, clusters: &[ClusterSpec]) -> Result<Self> {
        let (a, b) = poly.interval;
        if !(a < b) {
            return Err(Error::param(format!("degenerate interval [{a}, {b}]")));
        }
        let mut out = Vec::with_capacity(clusters.len());
        for spec in clusters {
            let loc = spec.location;
            if loc < a - CLAMP_TOL * (b - a) || loc > b + CLAMP_TOL * (b - a) {
                return Err(Error::param(format!(
                    "cluster location {loc} outside axis interval [{a}, {b}]"
                )));
            }
            let mut poles = materialize_poles(spec)?;
            if spec.orientation == Orientation::RealOneside && (loc - b).abs() < (loc - a).abs() {
                poles = poles.mirrored();
            }
            out.push(AxisCluster {
                location: loc,
                poles,
            });
        }
        Ok(Self {
            poly,
            clusters: out,
        })
    }

    pub fn ncols(&self) -> usize {
        self.clusters.iter().map(|c| c.poles.len()).sum::<usize>() + self.poly.ncols()
    }

    pub fn rational_cols(&self) -> usize {
        self.ncols() - self.poly.ncols()
    }
}

/// Affine image of `x` in `[-1, 1]`, clamping points marginally outside.
pub fn to_reference(x: f64, interval: (f64, f64)) -> Result<f64> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::param(format!("degenerate interval [{a}, {b}]")));
    }
    let t = (2.0 * x - (a + b)) / (b - a);
    if t.abs() <= 1.0 {
        Ok(t)
    } else if t.abs() <= 1.0 + 2.0 * CLAMP_TOL {
        Ok(t.signum())
    } else {
        Err(Error::param(format!("point {x} outside interval [{a}, {b}]")))
    }
}

/// Fills `out[k] = T_k(t)` by the three-term recurrence.
pub fn chebyshev_row(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * t * out[k - 1] - out[k - 2];
    }
}

/// Fills `[1, cos t, sin t, ..., cos nt, sin nt]`.
pub fn fourier_row(theta: f64, out: &mut [f64]) {
    out[0] = 1.0;
    let degree = (out.len() - 1) / 2;
    for k in 1..=degree {
        let (s, c) = (k as f64 * theta).sin_cos();
        out[2 * k - 1] = c;
        out[2 * k] = s;
    }
}

pub fn chebyshev_matrix(points: &[f64], degree: usize, interval: (f64, f64)) -> Result<Mat<f64>> {
    let mut m = Mat::<f64>::zeros(points.len(), degree + 1);
    let mut row = vec![0.0; degree + 1];
    for (i, &x) in points.iter().enumerate() {
        chebyshev_row(to_reference(x, interval)?, &mut row);
        for (k, &v) in row.iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    Ok(m)
}

pub fn fourier_matrix(points: &[f64], degree: usize) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(points.len(), 2 * degree + 1);
    let mut row = vec![0.0; 2 * degree + 1];
    for (i, &theta) in points.iter().enumerate() {
        fourier_row(theta, &mut row);
        for (k, &v) in row.iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    m
}

/// `q / (d - q)` with a guard against an exact pole hit.
#[inline]
pub(crate) fn partial_fraction(d: f64, q: c64) -> Result<c64> {
    let den = c64::new(d - q.re, -q.im);
    if den.re == 0.0 && den.im == 0.0 {
        return Err(Error::Numerical(format!(
            "pole {q} coincides with a sample at offset {d}"
        )));
    }
    Ok(q / den)
}

pub fn partial_fraction_matrix(points: &[f64], location: f64, poles: &PoleSet) -> Result<Mat<c64>> {
    let mut m = Mat::<c64>::zeros(points.len(), poles.len());
    for (i, &x) in points.iter().enumerate() {
        let d = x - location;
        for (j, &q) in poles.offsets.iter().enumerate() {
            m[(i, j)] = partial_fraction(d, q)?;
        }
    }
    Ok(m)
}

fn poly_row(poly: &PolyFamily, x: f64, out: &mut [f64]) -> Result<()> {
    match poly.kind {
        PolyKind::Chebyshev => chebyshev_row(to_reference(x, poly.interval)?, out),
        PolyKind::Fourier => fourier_row(x, out),
    }
    Ok(())
}

/// Fills one row of the axis design matrix at abscissa `x`.
pub fn axis_row(spec: &AxisBasisSpec, x: f64, out: &mut [c64]) -> Result<()> {
    debug_assert_eq!(out.len(), spec.ncols());
    let mut col = 0;
    for cluster in &spec.clusters {
        let d = x - cluster.location;
        for &q in &cluster.poles.offsets {
            out[col] = partial_fraction(d, q)?;
            col += 1;
        }
    }
    let mut poly = vec![0.0; spec.poly.ncols()];
    poly_row(&spec.poly, x, &mut poly)?;
    for v in poly {
        out[col] = c64::new(v, 0.0);
        col += 1;
    }
    Ok(())
}

pub fn axis_design_matrix(points: &[f64], spec: &AxisBasisSpec) -> Result<Mat<c64>> {
    let n = spec.ncols();
    let mut m = Mat::<c64>::zeros(points.len(), n);
    let mut row = vec![c64::new(0.0, 0.0); n];
    for (i, &x) in points.iter().enumerate() {
        axis_row(spec, x, &mut row)?;
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}
