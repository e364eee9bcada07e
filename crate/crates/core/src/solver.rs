//! Truncated-SVD least-squares solvers.
//!
//! The structured solvers find `C` with `A C B^T ~ F` from the SVDs of the
//! two factors only. Truncation is relative: the Kronecker variant drops
//! products `s_k(A) s_l(B) < eps s_1(A) s_1(B)`, the separable variant drops
//! `s_k(A) < eps s_1(A)` and `s_l(B) < eps s_1(B)` independently. The dense
//! solver handles unstructured systems `A c ~ f`.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::no_pivoting::factor as qr;
use faer::{c64, get_global_parallelism, Conj, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsvdMode {
    #[default]
    Kronecker,
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsvdOptions {
    pub epsilon: f64,
    pub mode: TsvdMode,
}

impl Default for TsvdOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            mode: TsvdMode::Kronecker,
        }
    }
}

impl TsvdOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Diagnostics of a completed fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub residual_frobenius: f64,
    pub residual_max: f64,
    pub coeff_frobenius: f64,
    pub kept_singular_pairs: usize,
    #[serde(rename = "sigma1_A")]
    pub sigma1_a: f64,
    /// Largest singular value of the second factor; 1 for dense solves.
    #[serde(rename = "sigma1_B")]
    pub sigma1_b: f64,
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

struct Factor {
    u: Mat<c64>,
    s: Vec<f64>,
    v: Mat<c64>,
}

fn thin_svd(m: MatRef<'_, c64>, name: &str) -> Result<Factor> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD of {name} failed: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Factor {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

fn check_shapes(a: MatRef<'_, c64>, b: MatRef<'_, c64>, f: MatRef<'_, c64>) -> Result<()> {
    if f.nrows() != a.nrows() || f.ncols() != b.nrows() {
        return Err(Error::dim(format!(
            "F is {}x{} but A has {} rows and B has {} rows",
            f.nrows(),
            f.ncols(),
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// Solves `min ||A C B^T - F||_F` with the truncated SVD of `B (x) A`.
pub fn tsvd_kron_solve(
    a: MatRef<'_, c64>,
    b: MatRef<'_, c64>,
    f: MatRef<'_, c64>,
    opts: &TsvdOptions,
) -> Result<(Mat<c64>, FitReport)> {
    structured_solve(a, b, f, opts.epsilon, TsvdMode::Kronecker)
}

/// Solves `min ||A C B^T - F||_F` truncating `A` and `B` independently.
pub fn tsvd_separable_solve(
    a: MatRef<'_, c64>,
    b: MatRef<'_, c64>,
    f: MatRef<'_, c64>,
    opts: &TsvdOptions,
) -> Result<(Mat<c64>, FitReport)> {
    structured_solve(a, b, f, opts.epsilon, TsvdMode::Separable)
}

/// Dispatches on `opts.mode`.
pub fn tsvd_solve(
    a: MatRef<'_, c64>,
    b: MatRef<'_, c64>,
    f: MatRef<'_, c64>,
    opts: &TsvdOptions,
) -> Result<(Mat<c64>, FitReport)> {
    structured_solve(a, b, f, opts.epsilon, opts.mode)
}

fn structured_solve(
    a: MatRef<'_, c64>,
    b: MatRef<'_, c64>,
    f: MatRef<'_, c64>,
    epsilon: f64,
    mode: TsvdMode,
) -> Result<(Mat<c64>, FitReport)> {
    TsvdOptions { epsilon, mode }.validate()?;
    check_shapes(a, b, f)?;
    let fa = thin_svd(a, "A")?;
    let fb = thin_svd(b, "B")?;
    let s1a = fa.s.first().copied().unwrap_or(0.0);
    let s1b = fb.s.first().copied().unwrap_or(0.0);

    // U_A^* F (U_B^*)^T
    let mut core = fa.u.adjoint() * f * fb.u.conjugate();
    let mut kept = 0;
    for l in 0..fb.s.len() {
        for k in 0..fa.s.len() {
            let (sk, sl) = (fa.s[k], fb.s[l]);
            let keep = match mode {
                TsvdMode::Kronecker => {
                    let p = sk * sl;
                    p > 0.0 && p >= epsilon * s1a * s1b
                }
                TsvdMode::Separable => {
                    sk > 0.0 && sl > 0.0 && sk >= epsilon * s1a && sl >= epsilon * s1b
                }
            };
            if keep {
                kept += 1;
                core[(k, l)] = core[(k, l)] * (1.0 / sk) * (1.0 / sl);
            } else {
                core[(k, l)] = c64::new(0.0, 0.0);
            }
        }
    }
    let c = &fa.v * &core * fb.v.transpose();

    let residual = f - a * &c * b.transpose();
    let report = FitReport {
        residual_frobenius: frobenius(residual.as_ref()),
        residual_max: max_abs(residual.as_ref()),
        coeff_frobenius: frobenius(c.as_ref()),
        kept_singular_pairs: kept,
        sigma1_a: s1a,
        sigma1_b: s1b,
    };
    Ok((c, report))
}

/// Field operations the dense solver needs beyond what faer provides.
pub trait DenseScalar: faer::traits::ComplexField + Copy {
    fn modulus(self) -> f64;
    fn real_part(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn zero() -> Self;
}

impl DenseScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn real_part(self) -> f64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn zero() -> Self {
        0.0
    }
}

impl DenseScalar for c64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn real_part(self) -> f64 {
        self.re
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn zero() -> Self {
        c64::new(0.0, 0.0)
    }
}

fn norms<T: DenseScalar>(m: MatRef<'_, T>) -> (f64, f64) {
    let (mut sq, mut mx) = (0.0f64, 0.0f64);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let a = m[(i, j)].modulus();
            sq += a * a;
            mx = mx.max(a);
        }
    }
    (sq.sqrt(), mx)
}

struct DenseFactor<T> {
    u: Mat<T>,
    s: Vec<f64>,
    v: Mat<T>,
}

fn dense_svd<T: DenseScalar>(m: MatRef<'_, T>, name: &str) -> Result<DenseFactor<T>> {
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD of {name} failed: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.real_part()).collect();
    Ok(DenseFactor {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

/// Solves `min ||A c - f||_2` by truncated SVD, dropping `s_k < eps s_1`.
///
/// Takes `A` by value: tall systems are reduced by an in-place Householder QR
/// first and only the square triangular factor is decomposed.
pub fn tsvd_dense_solve<T: DenseScalar>(
    a: Mat<T>,
    f: &[T],
    epsilon: f64,
) -> Result<(Vec<T>, FitReport)> {
    TsvdOptions::with_epsilon(epsilon).validate()?;
    let (m, n) = a.shape();
    if f.len() != m {
        return Err(Error::dim(format!(
            "right-hand side has {} entries, matrix has {m} rows",
            f.len()
        )));
    }
    let rhs = Mat::from_fn(m, 1, |i, _| f[i]);
    if m >= n && n > 0 {
        dense_via_qr(a, rhs, epsilon)
    } else {
        dense_via_svd(a.as_ref(), rhs.as_ref(), epsilon)
    }
}

fn truncated_apply<T: DenseScalar>(
    fac: &DenseFactor<T>,
    rhs: MatRef<'_, T>,
    epsilon: f64,
) -> (Mat<T>, usize, f64) {
    let s1 = fac.s.first().copied().unwrap_or(0.0);
    let mut proj = fac.u.adjoint() * rhs;
    let mut kept = 0;
    for (k, &sk) in fac.s.iter().enumerate() {
        if sk > 0.0 && sk >= epsilon * s1 {
            kept += 1;
            proj[(k, 0)] = proj[(k, 0)].scale(1.0 / sk);
        } else {
            proj[(k, 0)] = T::zero();
        }
    }
    (&fac.v * &proj, kept, s1)
}

fn dense_via_svd<T: DenseScalar>(
    a: MatRef<'_, T>,
    rhs: MatRef<'_, T>,
    epsilon: f64,
) -> Result<(Vec<T>, FitReport)> {
    let fac = dense_svd(a, "A")?;
    let (c, kept, s1) = truncated_apply(&fac, rhs, epsilon);
    let residual = rhs - a * &c;
    let (residual_frobenius, residual_max) = norms(residual.as_ref());
    let coeffs: Vec<T> = (0..c.nrows()).map(|i| c[(i, 0)]).collect();
    let report = FitReport {
        residual_frobenius,
        residual_max,
        coeff_frobenius: norms(c.as_ref()).0,
        kept_singular_pairs: kept,
        sigma1_a: s1,
        sigma1_b: 1.0,
    };
    Ok((coeffs, report))
}

fn dense_via_qr<T: DenseScalar>(
    mut a: Mat<T>,
    mut rhs: Mat<T>,
    epsilon: f64,
) -> Result<(Vec<T>, FitReport)> {
    let (m, n) = a.shape();
    let par = get_global_parallelism();
    let block = qr::recommended_block_size::<T>(m, n);
    let mut q_coeff = Mat::<T>::zeros(block, n);
    {
        let req = qr::qr_in_place_scratch::<T>(m, n, block, par, Default::default());
        let mut mem = MemBuffer::new(req);
        qr::qr_in_place(
            a.as_mut(),
            q_coeff.as_mut(),
            par,
            MemStack::new(&mut mem),
            Default::default(),
        );
    }
    let r = Mat::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { T::zero() });

    let req = householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<T>(
        m, block, 1,
    )
    .or(householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<T>(
        m, block, 1,
    ));
    let mut mem = MemBuffer::new(req);
    // rhs <- Q^* rhs
    householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
        a.as_ref(),
        q_coeff.as_ref(),
        Conj::Yes,
        rhs.as_mut(),
        par,
        MemStack::new(&mut mem),
    );

    let fac = dense_svd(r.as_ref(), "R")?;
    let top = rhs.as_ref().subrows(0, n);
    let (c, kept, s1) = truncated_apply(&fac, top, epsilon);
    drop(fac);

    // residual in the rotated basis: top block differs, bottom block is untouched
    let fitted = &r * &c;
    drop(r);
    for i in 0..n {
        rhs[(i, 0)] = rhs[(i, 0)] - fitted[(i, 0)];
    }
    let residual_frobenius = norms(rhs.as_ref()).0;
    householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
        a.as_ref(),
        q_coeff.as_ref(),
        Conj::No,
        rhs.as_mut(),
        par,
        MemStack::new(&mut mem),
    );
    let coeffs: Vec<T> = (0..n).map(|i| c[(i, 0)]).collect();
    let report = FitReport {
        residual_frobenius,
        residual_max: norms(rhs.as_ref()).1,
        coeff_frobenius: norms(c.as_ref()).0,
        kept_singular_pairs: kept,
        sigma1_a: s1,
        sigma1_b: 1.0,
    };
    Ok((coeffs, report))
}
