//! Piecewise approximation on meshes of convex quadrilaterals.
//!
//! Each patch is pulled back to the unit reference square by a bilinear map
//! and fitted there with the tensor scheme. Edges flagged as singular get a
//! family of clustered poles on the matching reference axis.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::basis::{AxisBasisSpec, PolyFamily};
use crate::error::{Error, Result};
use crate::poles::ClusterSpec;
use crate::solver::TsvdOptions;
use crate::tensor::{fit_tensor, GridSpec, TensorApproximant};

const REF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// `t = 0`, from corner 0 to corner 1.
    South,
    /// `s = 1`, from corner 1 to corner 2.
    East,
    /// `t = 1`, from corner 2 to corner 3.
    North,
    /// `s = 0`, from corner 3 to corner 0.
    West,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::South, Edge::East, Edge::North, Edge::West];

    fn corner_indices(self) -> (usize, usize) {
        match self {
            Edge::South => (0, 1),
            Edge::East => (1, 2),
            Edge::North => (2, 3),
            Edge::West => (3, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadPatch {
    /// Counterclockwise corners; corner `k` is the image of reference corner
    /// `(0,0), (1,0), (1,1), (0,1)` respectively.
    pub corners: [[f64; 2]; 4],
    #[serde(default)]
    pub singular_edges: Vec<Edge>,
    #[serde(default)]
    pub nq: usize,
    pub np: usize,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl QuadPatch {
    pub fn new(corners: [[f64; 2]; 4], singular_edges: Vec<Edge>, nq: usize, np: usize) -> Self {
        Self {
            corners,
            singular_edges,
            nq,
            np,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corners.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::param("patch corners must be finite"));
        }
        for k in 0..4 {
            let a = self.corners[k];
            let b = self.corners[(k + 1) % 4];
            let c = self.corners[(k + 2) % 4];
            if cross(sub(b, a), sub(c, b)) <= 0.0 {
                return Err(Error::param(format!(
                    "patch is not strictly convex and counterclockwise at corner {}",
                    (k + 1) % 4
                )));
            }
        }
        if !self.singular_edges.is_empty() && self.nq == 0 {
            return Err(Error::param("patch with singular edges needs nq >= 1"));
        }
        Ok(())
    }

    /// Whether the segment of `edge` lies on the zero set of `g` (checked at
    /// both endpoints).
    pub fn edge_on(&self, edge: Edge, g: impl Fn(f64, f64) -> f64, tol: f64) -> bool {
        let (i, j) = edge.corner_indices();
        let [a, b] = [self.corners[i], self.corners[j]];
        g(a[0], a[1]).abs() <= tol && g(b[0], b[1]).abs() <= tol
    }

    pub fn centroid(&self) -> (f64, f64) {
        bilinear_map(self, 0.5, 0.5)
    }

    /// Reference-square basis specs: clusters at `s = 0/1` for west/east and at
    /// `t = 0/1` for south/north.
    pub fn reference_specs(&self, sigma: f64) -> Result<(AxisBasisSpec, AxisBasisSpec)> {
        let mut s_clusters = Vec::new();
        let mut t_clusters = Vec::new();
        for &e in Edge::ALL.iter().filter(|e| self.singular_edges.contains(e)) {
            match e {
                Edge::West => s_clusters.push(ClusterSpec::new(0.0, self.nq, sigma)),
                Edge::East => s_clusters.push(ClusterSpec::new(1.0, self.nq, sigma)),
                Edge::South => t_clusters.push(ClusterSpec::new(0.0, self.nq, sigma)),
                Edge::North => t_clusters.push(ClusterSpec::new(1.0, self.nq, sigma)),
            }
        }
        let poly = PolyFamily::chebyshev(self.np, (0.0, 1.0));
        Ok((
            AxisBasisSpec::new(poly, &s_clusters)?,
            AxisBasisSpec::new(poly, &t_clusters)?,
        ))
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    if s == 1.0 {
        b
    } else {
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }
}

/// Bilinear interpolation of the corners, exact at the corners and the
/// identity on the unit square.
pub fn bilinear_map(patch: &QuadPatch, s: f64, t: f64) -> (f64, f64) {
    let [c0, c1, c2, c3] = patch.corners;
    let [x, y] = lerp(lerp(c0, c1, s), lerp(c3, c2, s), t);
    (x, y)
}

fn in_unit(v: f64) -> bool {
    (-REF_TOL..=1.0 + REF_TOL).contains(&v)
}

/// Reference coordinates of `(x, y)`, or `None` when the point lies outside
/// the patch (beyond a `1e-10` tolerance in reference coordinates).
pub fn inverse_bilinear(patch: &QuadPatch, x: f64, y: f64) -> Option<(f64, f64)> {
    let [c0, c1, c2, c3] = patch.corners;
    let e = sub(c1, c0);
    let f = sub(c3, c0);
    let g = [c0[0] - c1[0] + c2[0] - c3[0], c0[1] - c1[1] + c2[1] - c3[1]];
    let h = sub([x, y], c0);

    let k2 = cross(g, f);
    let k1 = cross(e, f) + cross(h, g);
    let k0 = cross(h, e);
    let scale = cross(e, f).abs().max(f64::MIN_POSITIVE);

    let mut roots = Vec::with_capacity(2);
    if k2.abs() <= 1e-14 * scale {
        roots.push(-k0 / k1);
    } else {
        let disc = k1 * k1 - 4.0 * k0 * k2;
        if disc < 0.0 {
            if disc < -1e-12 * k1 * k1 {
                return None;
            }
            roots.push(-k1 / (2.0 * k2));
        } else {
            // numerically stable pair of roots
            let q = -0.5 * (k1 + k1.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(k0 / q);
            }
            roots.push(q / k2);
        }
    }

    let mut best: Option<(f64, f64, f64)> = None;
    for t in roots.into_iter().filter(|t| t.is_finite()) {
        let dx = e[0] + g[0] * t;
        let dy = e[1] + g[1] * t;
        let s = if dx.abs() >= dy.abs() {
            (h[0] - f[0] * t) / dx
        } else {
            (h[1] - f[1] * t) / dy
        };
        if !s.is_finite() {
            continue;
        }
        let (s, t) = polish(patch, x, y, s, t);
        let dist = outside_distance(s).max(outside_distance(t));
        if best.is_none_or(|b| dist < b.2) {
            best = Some((s, t, dist));
        }
    }
    let (s, t, _) = best?;
    (in_unit(s) && in_unit(t)).then(|| (s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)))
}

fn outside_distance(v: f64) -> f64 {
    (-v).max(v - 1.0).max(0.0)
}

fn polish(patch: &QuadPatch, x: f64, y: f64, mut s: f64, mut t: f64) -> (f64, f64) {
    let [c0, c1, c2, c3] = patch.corners;
    for _ in 0..3 {
        let (px, py) = bilinear_map(patch, s, t);
        let rx = x - px;
        let ry = y - py;
        let ds = [
            (1.0 - t) * (c1[0] - c0[0]) + t * (c2[0] - c3[0]),
            (1.0 - t) * (c1[1] - c0[1]) + t * (c2[1] - c3[1]),
        ];
        let dt = [
            (1.0 - s) * (c3[0] - c0[0]) + s * (c2[0] - c1[0]),
            (1.0 - s) * (c3[1] - c0[1]) + s * (c2[1] - c1[1]),
        ];
        let det = cross(ds, dt);
        if det == 0.0 || !det.is_finite() {
            break;
        }
        s += cross([rx, ry], dt) / det;
        t += cross(ds, [rx, ry]) / det;
    }
    (s, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFit {
    pub patch: QuadPatch,
    pub approximant: TensorApproximant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseApproximant {
    pub patches: Vec<PatchFit>,
    /// Bounding box `[xmin, xmax, ymin, ymax]` of the mesh.
    pub bounds: [f64; 4],
}

pub fn mesh_bounds(patches: &[QuadPatch]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for c in patches.iter().flat_map(|p| p.corners) {
        b[0] = b[0].min(c[0]);
        b[1] = b[1].max(c[0]);
        b[2] = b[2].min(c[1]);
        b[3] = b[3].max(c[1]);
    }
    b
}

/// Fits `f` on one patch via its reference square.
pub fn fit_patch<F>(
    f: &F,
    patch: &QuadPatch,
    sigma: f64,
    grid: &GridSpec,
    opts: &TsvdOptions,
) -> Result<TensorApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    patch.validate()?;
    let (s_spec, t_spec) = patch.reference_specs(sigma)?;
    fit_tensor(
        |s, t| {
            let (x, y) = bilinear_map(patch, s, t);
            f(x, y)
        },
        &s_spec,
        &t_spec,
        grid,
        opts,
    )
}

pub fn fit_piecewise<F>(
    f: F,
    patches: &[QuadPatch],
    sigma: f64,
    grid: &GridSpec,
    opts: &TsvdOptions,
) -> Result<PiecewiseApproximant>
where
    F: Fn(f64, f64) -> f64,
{
    if patches.is_empty() {
        return Err(Error::param("mesh has no patches"));
    }
    let fits = patches
        .iter()
        .enumerate()
        .map(|(index, patch)| {
            fit_patch(&f, patch, sigma, grid, opts)
                .map(|approximant| PatchFit {
                    patch: patch.clone(),
                    approximant,
                })
                .map_err(|e| Error::Patch {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PiecewiseApproximant {
        patches: fits,
        bounds: mesh_bounds(patches),
    })
}

impl PiecewiseApproximant {
    /// Index and reference coordinates of the owning patch (lowest index wins).
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, f64, f64)> {
        self.patches
            .iter()
            .enumerate()
            .find_map(|(i, p)| inverse_bilinear(&p.patch, x, y).map(|(s, t)| (i, s, t)))
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<Option<c64>> {
        match self.locate(x, y) {
            Some((i, s, t)) => self.patches[i].approximant.eval(s, t).map(Some),
            None => Ok(None),
        }
    }
}

/// Values at `points`; `None` marks points covered by no patch.
pub fn eval_piecewise(pa: &PiecewiseApproximant, points: &[(f64, f64)]) -> Result<Vec<Option<c64>>> {
    for p in &pa.patches {
        p.approximant.check_shape()?;
    }
    points.iter().map(|&(x, y)| pa.eval(x, y)).collect()
}

/// Splits a counterclockwise triangle into three quadrilaterals by joining
/// its centroid to the edge midpoints.
pub fn barycentric_refine(tri: [[f64; 2]; 3]) -> [[[f64; 2]; 4]; 3] {
    let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let c = [
        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
    ];
    std::array::from_fn(|i| {
        let v = tri[i];
        let next = mid(v, tri[(i + 1) % 3]);
        let prev = mid(tri[(i + 2) % 3], v);
        [v, next, c, prev]
    })
}

/// The six-quad mesh of the unit square split along `x = y`, with the edges
/// lying on the diagonal flagged as singular. Patches without singular edges
/// get `nq = 0`.
pub fn diagonal_mesh(nq: usize, np: usize) -> Vec<QuadPatch> {
    let lower = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
    let upper = [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut out = Vec::with_capacity(6);
    for tri in [lower, upper] {
        for corners in barycentric_refine(tri) {
            let mut patch = QuadPatch::new(corners, Vec::new(), 0, np);
            patch.singular_edges = Edge::ALL
                .into_iter()
                .filter(|&e| patch.edge_on(e, |x, y| x - y, 0.0))
                .collect();
            if !patch.singular_edges.is_empty() {
                patch.nq = nq;
            }
            out.push(patch);
        }
    }
    out
}
