//! Approximation of functions singular along the zero set of a bivariate
//! polynomial `Q`.
//!
//! The general form uses rational columns `p_j P_k(x) P_l(y) / (Q(x,y) - p_j)`
//! plus a bivariate Chebyshev block. The diagonal form specializes to
//! `Q = x - y` with numerators `P_k(x + y)`, which needs far fewer columns.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::basis::{chebyshev_row, partial_fraction, to_reference};
use crate::error::{Error, Result};
use crate::poles::{materialize_poles, ClusterSpec, PoleSet};
use crate::solver::{tsvd_dense_solve, FitReport};
use crate::tensor::chebyshev_points;

/// Highest supported power of either variable in `Q`.
pub const MAX_Q_DEGREE: usize = 10;

/// Default cap on design-matrix entries (rows times columns).
pub const DEFAULT_MEMORY_CAP: usize = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermsRepr {
    terms: Vec<Term>,
}

/// `Q(x, y) = sum c[i][j] x^i y^j`, stored densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TermsRepr", into = "TermsRepr")]
pub struct BivariatePoly {
    coeffs: Vec<Vec<f64>>,
}

impl TryFrom<TermsRepr> for BivariatePoly {
    type Error = Error;

    fn try_from(repr: TermsRepr) -> Result<Self> {
        BivariatePoly::from_terms(&repr.terms)
    }
}

impl From<BivariatePoly> for TermsRepr {
    fn from(p: BivariatePoly) -> Self {
        TermsRepr { terms: p.terms() }
    }
}

impl BivariatePoly {
    pub fn from_terms(terms: &[Term]) -> Result<Self> {
        let (mut di, mut dj) = (0, 0);
        for t in terms {
            if t.i > MAX_Q_DEGREE || t.j > MAX_Q_DEGREE {
                return Err(Error::param(format!(
                    "term x^{} y^{} exceeds degree {MAX_Q_DEGREE}",
                    t.i, t.j
                )));
            }
            if !t.c.is_finite() {
                return Err(Error::param("polynomial coefficients must be finite"));
            }
            di = di.max(t.i);
            dj = dj.max(t.j);
        }
        let mut coeffs = vec![vec![0.0; dj + 1]; di + 1];
        for t in terms {
            coeffs[t.i][t.j] += t.c;
        }
        Ok(Self { coeffs })
    }

    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    out.push(Term { i, j, c });
                }
            }
        }
        out
    }

    /// `x - y`.
    pub fn diagonal() -> Self {
        Self::from_terms(&[Term { i: 1, j: 0, c: 1.0 }, Term { i: 0, j: 1, c: -1.0 }]).unwrap()
    }

    /// `x^3 - 2x + 1 - y^2`.
    pub fn elliptic() -> Self {
        Self::from_terms(&[
            Term { i: 3, j: 0, c: 1.0 },
            Term { i: 1, j: 0, c: -2.0 },
            Term { i: 0, j: 0, c: 1.0 },
            Term { i: 0, j: 2, c: -1.0 },
        ])
        .unwrap()
    }

    fn horner_y(row: &[f64], y: f64) -> f64 {
        row.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    fn horner_y_deriv(row: &[f64], y: f64) -> f64 {
        row.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, &c)| acc * y + j as f64 * c)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * x + Self::horner_y(row, y))
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let gx = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, row)| acc * x + i as f64 * Self::horner_y(row, y));
        let gy = self
            .coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * x + Self::horner_y_deriv(row, y));
        (gx, gy)
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x, y }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b) in [self.x, self.y] {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::param(format!("invalid domain interval [{a}, {b}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x.0 && x <= self.x.1 && y >= self.y.0 && y <= self.y.1
    }

    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.x.0)
            .min(self.x.1 - x)
            .min(y - self.y.0)
            .min(self.y.1 - y)
    }

    fn min_side(&self) -> f64 {
        (self.x.1 - self.x.0).min(self.y.1 - self.y.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitCurve {
    pub q: BivariatePoly,
    pub domain: Rect,
    /// Traced polylines; closed loops repeat their first point at the end.
    pub components: Vec<Vec<CurvePoint>>,
    /// Vertices discarded because Newton projection did not converge.
    pub dropped: usize,
    /// `max |Q|` over a coarse grid of the domain.
    pub scale: f64,
}

/// `max |Q|` over a 65 x 65 grid covering the domain.
pub fn q_scale(q: &BivariatePoly, domain: &Rect) -> f64 {
    let n = 64;
    let mut m: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            let x = domain.x.0 + (domain.x.1 - domain.x.0) * i as f64 / n as f64;
            let y = domain.y.0 + (domain.y.1 - domain.y.0) * j as f64 / n as f64;
            m = m.max(q.eval(x, y).abs());
        }
    }
    m
}

/// Newton iteration along the gradient onto `Q = 0`.
pub fn project_to_curve(q: &BivariatePoly, x: f64, y: f64, tol: f64) -> Option<[f64; 2]> {
    let (mut x, mut y) = (x, y);
    for _ in 0..=20 {
        let v = q.eval(x, y);
        if v.abs() <= tol {
            return Some([x, y]);
        }
        let (gx, gy) = q.grad(x, y);
        let g2 = gx * gx + gy * gy;
        if g2 == 0.0 || !g2.is_finite() {
            return None;
        }
        x -= v * gx / g2;
        y -= v * gy / g2;
    }
    None
}

fn unit_normal(q: &BivariatePoly, p: [f64; 2]) -> Option<[f64; 2]> {
    let (gx, gy) = q.grad(p[0], p[1]);
    let n = gx.hypot(gy);
    (n > 0.0 && n.is_finite()).then(|| [gx / n, gy / n])
}

fn key(p: [f64; 2]) -> (u64, u64) {
    // -0.0 and 0.0 must merge
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Zero crossing on the segment `a -> b` with values `va`, `vb` of opposite
/// sign. The segment is oriented canonically so that both cells sharing an
/// edge produce bit-identical points.
fn crossing(a: [f64; 2], b: [f64; 2], va: f64, vb: f64) -> [f64; 2] {
    let (a, b, va, vb) = if (a[0], a[1]) <= (b[0], b[1]) {
        (a, b, va, vb)
    } else {
        (b, a, vb, va)
    };
    if va == 0.0 {
        return a;
    }
    if vb == 0.0 {
        return b;
    }
    let t = va / (va - vb);
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Marching-squares extraction of `Q = 0` on a `resolution x resolution` cell
/// grid, followed by Newton projection of every vertex.
pub fn trace_curve(q: &BivariatePoly, domain: Rect, resolution: usize) -> Result<ImplicitCurve> {
    domain.validate()?;
    if resolution < 32 {
        return Err(Error::param(format!("resolution must be at least 32, got {resolution}")));
    }
    let scale = q_scale(q, &domain);
    let n = resolution;
    let vx: Vec<f64> = (0..=n)
        .map(|i| domain.x.0 + (domain.x.1 - domain.x.0) * i as f64 / n as f64)
        .collect();
    let vy: Vec<f64> = (0..=n)
        .map(|j| domain.y.0 + (domain.y.1 - domain.y.0) * j as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = (0..=n)
        .flat_map(|j| vx.iter().map(move |&x| (x, j)))
        .map(|(x, j)| (x, vy[j]))
        .map(|(x, y)| q.eval(x, y))
        .collect();
    let val = |i: usize, j: usize| vals[j * (n + 1) + i];
    let neg = |v: f64| v < 0.0;

    // nodes are crossing points, merged by exact position
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = Vec::new();
    let mut node_of = |p: [f64; 2], nodes: &mut Vec<[f64; 2]>, adjacency: &mut Vec<Vec<usize>>| {
        *index.entry(key(p)).or_insert_with(|| {
            nodes.push(p);
            adjacency.push(Vec::new());
            nodes.len() - 1
        })
    };

    for j in 0..n {
        for i in 0..n {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let pts = corners.map(|(a, b)| [vx[a], vy[b]]);
            let v = corners.map(|(a, b)| val(a, b));
            // edges: bottom, right, top, left
            let mut cross_pts: [Option<[f64; 2]>; 4] = [None; 4];
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if neg(v[a]) != neg(v[b]) {
                    cross_pts[e] = Some(crossing(pts[a], pts[b], v[a], v[b]));
                }
            }
            let hits: Vec<usize> = (0..4).filter(|&e| cross_pts[e].is_some()).collect();
            let pairs: Vec<(usize, usize)> = match hits.len() {
                2 => vec![(hits[0], hits[1])],
                4 => {
                    let centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    if neg(centre) == neg(v[0]) {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => Vec::new(),
            };
            for (ea, eb) in pairs {
                let a = node_of(cross_pts[ea].unwrap(), &mut nodes, &mut adjacency);
                let b = node_of(cross_pts[eb].unwrap(), &mut nodes, &mut adjacency);
                if a != b && !adjacency[a].contains(&b) {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                }
            }
        }
    }

    let polylines = chain(&adjacency);
    let tol = 1e-13 * scale;
    let mut dropped = 0;
    let mut components = Vec::new();
    for line in polylines {
        let mut pts: Vec<CurvePoint> = Vec::with_capacity(line.len());
        for &k in &line {
            let p = nodes[k];
            let projected = project_to_curve(q, p[0], p[1], tol)
                .filter(|r| (r[0] - p[0]).hypot(r[1] - p[1]) <= 2.0 * (vx[1] - vx[0]).hypot(vy[1] - vy[0]))
                .and_then(|r| unit_normal(q, r).map(|nrm| CurvePoint { point: r, normal: nrm }));
            match projected {
                Some(cp) => {
                    if pts.last().is_none_or(|last| last.point != cp.point) {
                        pts.push(cp);
                    }
                }
                None => dropped += 1,
            }
        }
        if pts.len() >= 2 {
            components.push(pts);
        }
    }
    Ok(ImplicitCurve {
        q: q.clone(),
        domain,
        components,
        dropped,
        scale,
    })
}

/// Splits a graph of maximum degree (usually) two into polylines. Open chains
/// start at endpoints; loops close on their starting node.
fn chain(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut used: HashMap<(usize, usize), ()> = HashMap::new();
    let edge = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut out = Vec::new();
    let walk = |start: usize, used: &mut HashMap<(usize, usize), ()>| {
        let mut line = vec![start];
        let mut cur = start;
        while let Some(&next) = adjacency[cur].iter().find(|&&nb| !used.contains_key(&edge(cur, nb))) {
            used.insert(edge(cur, next), ());
            line.push(next);
            cur = next;
        }
        line
    };
    // open chains first, from every node whose degree is not two
    for start in 0..adjacency.len() {
        if adjacency[start].len() != 2 {
            while adjacency[start].iter().any(|&nb| !used.contains_key(&edge(start, nb))) {
                out.push(walk(start, &mut used));
            }
        }
    }
    for start in 0..adjacency.len() {
        if adjacency[start].iter().any(|&nb| !used.contains_key(&edge(start, nb))) {
            out.push(walk(start, &mut used));
        }
    }
    out
}

fn is_closed(line: &[CurvePoint]) -> bool {
    line.len() > 2 && line.first().map(|p| p.point) == line.last().map(|p| p.point)
}

/// `m` points per component, uniform in arclength along the traced polyline
/// and projected back onto the curve.
pub fn resample_component(curve: &ImplicitCurve, line: &[CurvePoint], m: usize) -> Vec<CurvePoint> {
    if m == 0 || line.is_empty() {
        return Vec::new();
    }
    let mut cumulative = Vec::with_capacity(line.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in line.windows(2) {
        total += (w[1].point[0] - w[0].point[0]).hypot(w[1].point[1] - w[0].point[1]);
        cumulative.push(total);
    }
    let closed = is_closed(line);
    let targets: Vec<f64> = if closed {
        (0..m).map(|k| total * k as f64 / m as f64).collect()
    } else if m == 1 {
        vec![0.5 * total]
    } else {
        (0..m).map(|k| total * k as f64 / (m - 1) as f64).collect()
    };
    let tol = 1e-13 * curve.scale;
    targets
        .into_iter()
        .filter_map(|s| {
            let k = cumulative.partition_point(|&c| c < s).clamp(1, line.len() - 1);
            let (a, b) = (line[k - 1].point, line[k].point);
            let seg = cumulative[k] - cumulative[k - 1];
            let t = if seg > 0.0 { ((s - cumulative[k - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let r = project_to_curve(&curve.q, p[0], p[1], tol)?;
            let normal = unit_normal(&curve.q, r)?;
            Some(CurvePoint { point: r, normal })
        })
        .collect()
}

/// Sample layout for curved fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvedGridSpec {
    /// Arclength-uniform base points per traced component.
    pub m_curve: usize,
    /// Offsets per base point and normal direction.
    pub m_cluster: usize,
    /// Chebyshev points per axis of the background product grid.
    pub m_cheb: usize,
    /// Spacing parameter of the normal offsets.
    pub sigma: f64,
}

impl CurvedGridSpec {
    /// Offsets reaching down to the smallest level shift (relative to the
    /// local offset cap) with `m_cluster` points.
    pub fn matched_sigma(levels: usize, sigma: f64, m_cluster: usize) -> f64 {
        if m_cluster < 2 || levels < 2 {
            return sigma;
        }
        sigma * ((levels as f64).sqrt() - 1.0) / ((m_cluster as f64).sqrt() - 1.0)
    }
}

/// Background Chebyshev product grid plus offsets `p +/- d_i n` from each
/// resampled curve point, where `d_i = L exp(-sigma (sqrt(m) - sqrt(i)))` and
/// `L = min(min side / 2, distance to the boundary)`. Points outside the
/// domain and points lying exactly on `Q = 0` are dropped.
pub fn build_curved_grid(
    curve: &ImplicitCurve,
    m_curve: usize,
    m_cluster: usize,
    m_cheb: usize,
    sigma: f64,
) -> Result<Vec<(f64, f64)>> {
    let d = &curve.domain;
    let mut out = Vec::new();
    let xs = chebyshev_points(m_cheb, d.x);
    let ys = chebyshev_points(m_cheb, d.y);
    for &y in &ys {
        for &x in &xs {
            out.push((x, y));
        }
    }
    if m_curve > 0 && m_cluster > 0 {
        let offsets = crate::poles::tapered_offsets(m_cluster, sigma)?;
        for line in &curve.components {
            for cp in resample_component(curve, line, m_curve) {
                let [px, py] = cp.point;
                let cap = (0.5 * d.min_side()).min(d.boundary_distance(px, py));
                if cap <= 0.0 {
                    continue;
                }
                for &e in &offsets {
                    let dist = cap * e;
                    for sign in [1.0, -1.0] {
                        let p = (px + sign * dist * cp.normal[0], py + sign * dist * cp.normal[1]);
                        if p != (px, py) && d.contains(p.0, p.1) {
                            out.push(p);
                        }
                    }
                }
            }
        }
    }
    out.retain(|&(x, y)| curve.q.eval(x, y) != 0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvedForm {
    General,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvedApproximant {
    pub form: CurvedForm,
    pub curve: ImplicitCurve,
    pub levels: PoleSet,
    pub np: usize,
    pub ns: usize,
    /// Sample layout used for the fit.
    pub grid: CurvedGridSpec,
    #[serde(with = "crate::io::complex_vec")]
    pub coeffs: Vec<c64>,
    pub report: FitReport,
}

pub fn curved_ncols(form: CurvedForm, n_levels: usize, np: usize, ns: usize) -> usize {
    let numerators = match form {
        CurvedForm::General => (np + 1) * (np + 1),
        CurvedForm::Diagonal => np + 1,
    };
    n_levels * numerators + (ns + 1) * (ns + 1)
}

fn diagonal_range(d: &Rect) -> (f64, f64) {
    (d.x.0 + d.y.0, d.x.1 + d.y.1)
}

/// Fills one design row into `out` (length `curved_ncols`).
fn curved_row(
    form: CurvedForm,
    curve: &ImplicitCurve,
    levels: &PoleSet,
    np: usize,
    ns: usize,
    (x, y): (f64, f64),
    out: &mut [c64],
) -> Result<()> {
    let d = &curve.domain;
    let deg = np.max(ns);
    let mut px = vec![0.0; deg + 1];
    let mut py = vec![0.0; deg + 1];
    chebyshev_row(to_reference(x, d.x)?, &mut px);
    chebyshev_row(to_reference(y, d.y)?, &mut py);
    let qv = curve.q.eval(x, y);
    let mut col = 0;
    match form {
        CurvedForm::General => {
            for &p in &levels.offsets {
                let w = partial_fraction(qv, p)?;
                for &a in &px[..=np] {
                    let wa = w * a;
                    for &b in &py[..=np] {
                        out[col] = wa * b;
                        col += 1;
                    }
                }
            }
        }
        CurvedForm::Diagonal => {
            let mut pu = vec![0.0; np + 1];
            chebyshev_row(to_reference(x + y, diagonal_range(d))?, &mut pu);
            for &p in &levels.offsets {
                let w = partial_fraction(qv, p)?;
                for &a in &pu {
                    out[col] = w * a;
                    col += 1;
                }
            }
        }
    }
    for &a in &px[..=ns] {
        for &b in &py[..=ns] {
            out[col] = c64::new(a * b, 0.0);
            col += 1;
        }
    }
    Ok(())
}

fn check_form(form: CurvedForm, curve: &ImplicitCurve) -> Result<()> {
    if form == CurvedForm::Diagonal && curve.q != BivariatePoly::diagonal() {
        return Err(Error::param("the diagonal form requires Q = x - y"));
    }
    Ok(())
}

pub fn curved_design_matrix(
    form: CurvedForm,
    curve: &ImplicitCurve,
    levels: &PoleSet,
    np: usize,
    ns: usize,
    points: &[(f64, f64)],
) -> Result<Mat<c64>> {
    check_form(form, curve)?;
    let ncols = curved_ncols(form, levels.len(), np, ns);
    let mut a = Mat::<c64>::zeros(points.len(), ncols);
    let mut row = vec![c64::new(0.0, 0.0); ncols];
    for (i, &p) in points.iter().enumerate() {
        curved_row(form, curve, levels, np, ns, p, &mut row)?;
        for (k, &v) in row.iter().enumerate() {
            a[(i, k)] = v;
        }
    }
    Ok(a)
}

/// Numerator block width when the levels come as adjacent conjugate pairs.
fn conjugate_block(form: CurvedForm, levels: &PoleSet, np: usize) -> Option<usize> {
    let o = &levels.offsets;
    let paired = o.len() % 2 == 0 && o.chunks(2).all(|p| p[1] == p[0].conj() && p[0].im != 0.0);
    paired.then(|| curved_ncols(form, 1, np, 0) - 1)
}

fn real_design_matrix(
    form: CurvedForm,
    curve: &ImplicitCurve,
    levels: &PoleSet,
    np: usize,
    ns: usize,
    points: &[(f64, f64)],
    block: usize,
) -> Result<Mat<f64>> {
    let ncols = curved_ncols(form, levels.len(), np, ns);
    let rational = levels.len() * block;
    let mut a = Mat::<f64>::zeros(points.len(), ncols);
    let mut row = vec![c64::new(0.0, 0.0); ncols];
    for (i, &p) in points.iter().enumerate() {
        curved_row(form, curve, levels, np, ns, p, &mut row)?;
        for start in (0..rational).step_by(2 * block) {
            for k in 0..block {
                let w = row[start + k] * SQRT_2;
                a[(i, start + k)] = w.re;
                a[(i, start + block + k)] = w.im;
            }
        }
        for k in rational..ncols {
            a[(i, k)] = row[k].re;
        }
    }
    Ok(a)
}

fn unrotate(x: &[f64], n_levels: usize, block: usize) -> Vec<c64> {
    let rational = n_levels * block;
    let mut c: Vec<c64> = x.iter().map(|&v| c64::new(v, 0.0)).collect();
    for start in (0..rational).step_by(2 * block) {
        for k in 0..block {
            let (re, im) = (x[start + k], x[start + block + k]);
            c[start + k] = c64::new(re, -im) / SQRT_2;
            c[start + block + k] = c64::new(re, im) / SQRT_2;
        }
    }
    c
}

/// Degrees, sampling and solver settings of a curved fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvedFitSpec {
    pub nq: usize,
    pub np: usize,
    pub ns: usize,
    pub sigma: f64,
    pub grid: CurvedGridSpec,
    pub epsilon: f64,
    pub memory_cap: usize,
}

impl CurvedFitSpec {
    /// Defaults: `m_cluster = 2 nq`, `m_curve = 2 np`, `m_cheb = 2 ns`, offset
    /// spacing matched to the level spacing.
    pub fn new(nq: usize, np: usize, ns: usize, sigma: f64) -> Self {
        let m_cluster = 2 * nq;
        Self {
            nq,
            np,
            ns,
            sigma,
            grid: CurvedGridSpec {
                m_curve: (2 * np).max(1),
                m_cluster,
                m_cheb: (2 * ns).max(ns + 1),
                sigma: CurvedGridSpec::matched_sigma(nq, sigma, m_cluster),
            },
            epsilon: crate::solver::DEFAULT_EPSILON,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.grid.sigma > 0.0 && self.grid.sigma.is_finite()) {
            return Err(Error::param("sigma must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.grid.m_cheb == 0 {
            return Err(Error::param("m_cheb must be positive"));
        }
        Ok(())
    }

    fn levels(&self) -> Result<PoleSet> {
        if self.nq == 0 {
            return Ok(PoleSet {
                offsets: Vec::new(),
                spec: ClusterSpec::new(0.0, 0, self.sigma),
            });
        }
        materialize_poles(&ClusterSpec::new(0.0, self.nq, self.sigma))
    }
}

/// Assembles and solves the dense least-squares problem for `f` sampled on
/// `points`.
pub fn fit_curved_points<F>(
    f: F,
    form: CurvedForm,
    curve: &ImplicitCurve,
    spec: &CurvedFitSpec,
    points: &[(f64, f64)],
) -> Result<CurvedApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    spec.validate()?;
    check_form(form, curve)?;
    let levels = spec.levels()?;
    let ncols = curved_ncols(form, levels.len(), spec.np, spec.ns);
    let entries = points.len().saturating_mul(ncols);
    if entries > spec.memory_cap {
        return Err(Error::MemoryGuard {
            rows: points.len(),
            cols: ncols,
            entries,
            cap: spec.memory_cap,
        });
    }
    let mut values = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let v = f(x, y);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { x, y, value: v });
        }
        values.push(c64::new(v, 0.0));
    }
    let (coeffs, report) = if let Some(block) = conjugate_block(form, &levels, spec.np) {
        // Paired columns w, conj(w) are rotated to sqrt2 Re w, sqrt2 Im w. The
        // rotation is unitary, so the truncated solution is the same one, but
        // the system is real: half the memory and a quarter of the work.
        let a = real_design_matrix(form, curve, &levels, spec.np, spec.ns, points, block)?;
        let real: Vec<f64> = values.iter().map(|v| v.re).collect();
        drop(values);
        let (x, mut report) = tsvd_dense_solve(a, &real, spec.epsilon)?;
        let coeffs = unrotate(&x, levels.len(), block);
        report.coeff_frobenius = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (coeffs, report)
    } else {
        let a = curved_design_matrix(form, curve, &levels, spec.np, spec.ns, points)?;
        tsvd_dense_solve(a, &values, spec.epsilon)?
    };
    Ok(CurvedApproximant {
        form,
        curve: curve.clone(),
        levels,
        np: spec.np,
        ns: spec.ns,
        grid: spec.grid,
        coeffs,
        report,
    })
}

pub fn fit_curved<F>(f: F, curve: &ImplicitCurve, spec: &CurvedFitSpec) -> Result<CurvedApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    spec.validate()?;
    let g = &spec.grid;
    let points = build_curved_grid(curve, g.m_curve, g.m_cluster, g.m_cheb, g.sigma)?;
    fit_curved_points(f, CurvedForm::General, curve, spec, &points)
}

/// Traces `x = y` across `domain` and fits with the compact diagonal basis.
pub fn fit_diagonal<F>(f: F, domain: Rect, resolution: usize, spec: &CurvedFitSpec) -> Result<CurvedApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    spec.validate()?;
    let curve = trace_curve(&BivariatePoly::diagonal(), domain, resolution)?;
    let g = &spec.grid;
    let points = build_curved_grid(&curve, g.m_curve, g.m_cluster, g.m_cheb, g.sigma)?;
    fit_curved_points(f, CurvedForm::Diagonal, &curve, spec, &points)
}

impl CurvedApproximant {
    pub fn check_shape(&self) -> Result<()> {
        check_form(self.form, &self.curve)?;
        let expected = curved_ncols(self.form, self.levels.len(), self.np, self.ns);
        if self.coeffs.len() != expected {
            return Err(Error::dim(format!(
                "coefficient vector has length {}, form requires {expected}",
                self.coeffs.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<c64> {
        let mut row = vec![c64::new(0.0, 0.0); self.coeffs.len()];
        self.eval_with(x, y, &mut row)
    }

    fn eval_with(&self, x: f64, y: f64, row: &mut [c64]) -> Result<c64> {
        curved_row(self.form, &self.curve, &self.levels, self.np, self.ns, (x, y), row)?;
        Ok(row.iter().zip(&self.coeffs).map(|(a, c)| a * c).sum())
    }
}

pub fn eval_curved(ca: &CurvedApproximant, points: &[(f64, f64)]) -> Result<Vec<c64>> {
    ca.check_shape()?;
    let mut row = vec![c64::new(0.0, 0.0); ca.coeffs.len()];
    points.iter().map(|&(x, y)| ca.eval_with(x, y, &mut row)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::DEFAULT_SIGMA;

    fn unit() -> Rect {
        Rect::new((0.0, 1.0), (0.0, 1.0))
    }

    fn circle() -> BivariatePoly {
        BivariatePoly::from_terms(&[
            Term { i: 2, j: 0, c: 1.0 },
            Term { i: 0, j: 2, c: 1.0 },
            Term { i: 0, j: 0, c: -1.0 },
        ])
        .unwrap()
    }

    #[test]
    fn polynomial_values_and_gradients() {
        let d = BivariatePoly::diagonal();
        assert_eq!(d.eval(0.3, 0.3), 0.0);
        assert_eq!(d.grad(0.3, 0.3), (1.0, -1.0));
        let c = circle();
        assert_eq!(c.eval(1.0, 0.0), 0.0);
        assert_eq!(c.grad(1.0, 0.0), (2.0, 0.0));
        let e = BivariatePoly::elliptic();
        assert_eq!(e.eval(1.0, 0.0), 0.0);
        assert_eq!(e.grad(2.0, 3.0), (10.0, -6.0));
    }

    #[test]
    fn terms_roundtrip_and_degree_cap() {
        let json = r#"{"terms":[{"i":3,"j":0,"c":1},{"i":1,"j":0,"c":-2},{"i":0,"j":0,"c":1},{"i":0,"j":2,"c":-1}]}"#;
        let p: BivariatePoly = serde_json::from_str(json).unwrap();
        assert_eq!(p, BivariatePoly::elliptic());
        let back: BivariatePoly = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<BivariatePoly>(r#"{"terms":[{"i":11,"j":0,"c":1}]}"#).is_err());
    }

    #[test]
    fn circle_traces_to_one_loop() {
        let curve = trace_curve(&circle(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 256).unwrap();
        assert_eq!(curve.components.len(), 1);
        assert_eq!(curve.dropped, 0);
        for cp in &curve.components[0] {
            let [x, y] = cp.point;
            assert!((x.hypot(y) - 1.0).abs() <= 1e-12);
            assert!((cp.normal[0] - x).abs() <= 1e-12 && (cp.normal[1] - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn elliptic_curve_has_two_components() {
        let d = Rect::new((-2.0, 2.0), (-2.0, 2.0));
        let curve = trace_curve(&BivariatePoly::elliptic(), d, 256).unwrap();
        assert_eq!(curve.components.len(), 2);
        for cp in curve.components.iter().flatten() {
            assert!(curve.q.eval(cp.point[0], cp.point[1]).abs() <= 1e-12 * curve.scale);
        }
    }

    #[test]
    fn crossing_lines_are_covered() {
        let q = BivariatePoly::from_terms(&[
            Term { i: 1, j: 1, c: 1.0 },
            Term { i: 1, j: 0, c: -0.5 },
            Term { i: 0, j: 1, c: -0.5 },
            Term { i: 0, j: 0, c: 0.25 },
        ])
        .unwrap();
        let curve = trace_curve(&q, unit(), 64).unwrap();
        let pts: Vec<[f64; 2]> = curve.components.iter().flatten().map(|c| c.point).collect();
        let on_vertical = pts.iter().filter(|p| (p[0] - 0.5).abs() < 1e-12).count();
        let on_horizontal = pts.iter().filter(|p| (p[1] - 0.5).abs() < 1e-12).count();
        assert!(on_vertical > 50 && on_horizontal > 50);
        assert!(pts.iter().any(|p| p[1] < 0.05) && pts.iter().any(|p| p[1] > 0.95));
        assert!(pts.iter().any(|p| p[0] < 0.05) && pts.iter().any(|p| p[0] > 0.95));
    }

    #[test]
    fn no_zero_set_gives_no_components() {
        let q = BivariatePoly::from_terms(&[Term { i: 0, j: 0, c: 1.0 }]).unwrap();
        let curve = trace_curve(&q, unit(), 32).unwrap();
        assert!(curve.components.is_empty());
        assert!(trace_curve(&q, unit(), 16).is_err());
    }

    #[test]
    fn grid_without_curve_points_is_chebyshev() {
        let curve = trace_curve(&circle(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 64).unwrap();
        let g = build_curved_grid(&curve, 0, 10, 7, DEFAULT_SIGMA).unwrap();
        assert_eq!(g.len(), 49);
    }

    #[test]
    fn single_diagonal_point_offsets() {
        let curve = trace_curve(&BivariatePoly::diagonal(), unit(), 64).unwrap();
        assert_eq!(curve.components.len(), 1);
        let base = resample_component(&curve, &curve.components[0], 1);
        assert_eq!(base.len(), 1);
        assert!((base[0].point[0] - 0.5).abs() < 1e-12 && (base[0].point[1] - 0.5).abs() < 1e-12);
        let g = build_curved_grid(&curve, 1, 2, 1, DEFAULT_SIGMA).unwrap();
        // one Chebyshev midpoint lies on the diagonal and is dropped
        assert_eq!(g.len(), 4);
        for (x, y) in g {
            // displaced along (1, -1) / sqrt(2), at most the offset cap away
            let (dx, dy) = (x - base[0].point[0], y - base[0].point[1]);
            assert!((dx + dy).abs() <= 1e-15);
            assert!(dx.hypot(dy) <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn column_counts() {
        assert_eq!(curved_ncols(CurvedForm::General, 1, 0, 0), 2);
        assert_eq!(curved_ncols(CurvedForm::General, 100, 60, 3), 100 * 61 * 61 + 16);
        assert_eq!(curved_ncols(CurvedForm::Diagonal, 50, 5, 15), 50 * 6 + 256);
    }

    #[test]
    fn on_curve_rows_are_minus_numerators() {
        let curve = trace_curve(&circle(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 64).unwrap();
        let levels = materialize_poles(&ClusterSpec::new(0.0, 3, DEFAULT_SIGMA)).unwrap();
        let a = curved_design_matrix(CurvedForm::General, &curve, &levels, 2, 1, &[(0.6, 0.8)]).unwrap();
        let np1 = 3;
        for j in 0..levels.len() {
            for k in 0..np1 {
                for l in 0..np1 {
                    let mut px = [0.0; 3];
                    let mut py = [0.0; 3];
                    chebyshev_row(to_reference(0.6, (-2.0, 2.0)).unwrap(), &mut px);
                    chebyshev_row(to_reference(0.8, (-2.0, 2.0)).unwrap(), &mut py);
                    let v = a[(0, j * 9 + k * 3 + l)];
                    assert!((v + c64::new(px[k] * py[l], 0.0)).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_level_is_represented() {
        let curve = trace_curve(&BivariatePoly::diagonal(), unit(), 64).unwrap();
        let spec = CurvedFitSpec::new(1, 0, 2, DEFAULT_SIGMA);
        let p1 = c64::new(0.0, 1.0);
        // Re of 1/((x - y) - i) is (x - y)/((x - y)^2 + 1)
        let f = |x: f64, y: f64| (1.0 / (c64::new(x - y, 0.0) - p1)).re;
        let g = &spec.grid;
        let pts = build_curved_grid(&curve, g.m_curve, g.m_cluster, g.m_cheb, g.sigma).unwrap();
        let diag = fit_curved_points(f, CurvedForm::Diagonal, &curve, &spec, &pts).unwrap();
        assert!(diag.report.residual_max <= 1e-10, "{}", diag.report.residual_max);
        let gen = fit_curved_points(f, CurvedForm::General, &curve, &spec, &pts).unwrap();
        assert!(gen.report.residual_frobenius <= diag.report.residual_frobenius + 1e-8);
    }

    #[test]
    fn smooth_function_without_levels() {
        let curve = trace_curve(&circle(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 64).unwrap();
        let spec = CurvedFitSpec::new(0, 0, 6, DEFAULT_SIGMA);
        let fit = fit_curved(|x, y| x * x * y - 3.0 * y + 1.0, &curve, &spec).unwrap();
        assert_eq!(fit.coeffs.len(), 49);
        assert!(fit.report.residual_max <= 1e-12);
        let v = eval_curved(&fit, &[(0.3, -1.1)]).unwrap()[0];
        assert!((v.re - (0.09 * -1.1 + 3.3 + 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn zero_and_constant_coefficients() {
        let curve = trace_curve(&BivariatePoly::diagonal(), unit(), 32).unwrap();
        let levels = materialize_poles(&ClusterSpec::new(0.0, 2, DEFAULT_SIGMA)).unwrap();
        let n = curved_ncols(CurvedForm::Diagonal, 4, 1, 2);
        let mut ca = CurvedApproximant {
            form: CurvedForm::Diagonal,
            curve,
            levels,
            np: 1,
            ns: 2,
            grid: CurvedFitSpec::new(2, 1, 2, DEFAULT_SIGMA).grid,
            coeffs: vec![c64::new(0.0, 0.0); n],
            report: FitReport {
                residual_frobenius: 0.0,
                residual_max: 0.0,
                coeff_frobenius: 0.0,
                kept_singular_pairs: 0,
                sigma1_a: 0.0,
                sigma1_b: 1.0,
            },
        };
        assert_eq!(eval_curved(&ca, &[(0.2, 0.7)]).unwrap()[0], c64::new(0.0, 0.0));
        ca.coeffs[4 * 2] = c64::new(1.0, 0.0);
        assert_eq!(eval_curved(&ca, &[(0.2, 0.7)]).unwrap()[0], c64::new(1.0, 0.0));
        ca.coeffs.pop();
        assert!(eval_curved(&ca, &[(0.2, 0.7)]).is_err());
    }

    #[test]
    fn memory_guard_rejects_before_assembly() {
        let curve = trace_curve(&BivariatePoly::elliptic(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 64).unwrap();
        let mut spec = CurvedFitSpec::new(50, 60, 3, DEFAULT_SIGMA);
        spec.grid.m_curve = 20;
        spec.grid.m_cheb = 120;
        let err = fit_curved(|x, y| BivariatePoly::elliptic().eval(x, y).abs(), &curve, &spec).unwrap_err();
        assert!(matches!(err, Error::MemoryGuard { cols, .. } if cols == 100 * 61 * 61 + 16));
    }

    #[test]
    fn real_rotation_matches_complex_solve() {
        let curve = trace_curve(&circle(), Rect::new((-2.0, 2.0), (-2.0, 2.0)), 64).unwrap();
        let mut spec = CurvedFitSpec::new(6, 2, 4, DEFAULT_SIGMA);
        spec.epsilon = 1e-6;
        let f = |x: f64, y: f64| circle().eval(x, y).abs() + 0.3 * x;
        let g = &spec.grid;
        let pts = build_curved_grid(&curve, g.m_curve, g.m_cluster, g.m_cheb, g.sigma).unwrap();
        let fit = fit_curved_points(f, CurvedForm::General, &curve, &spec, &pts).unwrap();
        let levels = spec.levels().unwrap();
        let a = curved_design_matrix(CurvedForm::General, &curve, &levels, 2, 4, &pts).unwrap();
        let rhs: Vec<c64> = pts.iter().map(|&(x, y)| c64::new(f(x, y), 0.0)).collect();
        let (c, rep) = tsvd_dense_solve(a, &rhs, spec.epsilon).unwrap();
        assert_eq!(fit.report.kept_singular_pairs, rep.kept_singular_pairs);
        assert!((fit.report.coeff_frobenius - rep.coeff_frobenius).abs() <= 1e-9 * rep.coeff_frobenius);
        assert!((fit.report.residual_frobenius - rep.residual_frobenius).abs() <= 1e-9);
        for (x, y) in [(0.1, 0.2), (-1.3, 0.7), (1.9, -1.9)] {
            let mut row = vec![c64::new(0.0, 0.0); c.len()];
            let want: c64 = {
                curved_row(CurvedForm::General, &curve, &levels, 2, 4, (x, y), &mut row).unwrap();
                row.iter().zip(&c).map(|(a, b)| a * b).sum()
            };
            let got = fit.eval(x, y).unwrap();
            assert!((got - want).norm() <= 1e-8, "{got} vs {want}");
            assert!(got.im.abs() <= 1e-10);
        }
    }
}
