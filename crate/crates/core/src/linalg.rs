//! Small dense complex matrix helpers on top of `faer`.
//!
//! Everything here works on `Mat<c64>` and is tuned for the n ≤ ~12 matrices that
//! appear as operator-valued coefficients; the random-matrix oracle uses faer directly.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use faer::c64;

pub type CMat = Mat<c64>;

pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: c64) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { s } else { c64::new(0.0, 0.0) })
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { cx(values[i], 0.0) } else { cx(0.0, 0.0) })
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| cx(rows[i][j], 0.0))
}

pub fn scale(m: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn adjoint(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

/// (m + mᴴ)/2
pub fn hermitian_part(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// (m − mᴴ)/(2i)
pub fn imag_part(m: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        (m[(i, j)] - m[(j, i)].conj()) * cx(0.0, -0.5)
    })
}

pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Normalized trace tr_n.
pub fn normalized_trace(m: MatRef<'_, c64>) -> c64 {
    trace(m) / m.nrows().max(1) as f64
}

pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: MatRef<'_, c64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && hermitian_defect(m) <= tol * (1.0 + m.norm_max())
}

pub fn is_finite(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

pub fn inverse(m: MatRef<'_, c64>) -> Result<CMat> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!("inverse of {}x{} matrix", n, m.ncols())));
    }
    if n == 1 {
        let v = m[(0, 0)];
        if v.norm() == 0.0 {
            return Err(Error::Singular("1x1 zero matrix".into()));
        }
        return Ok(Mat::from_fn(1, 1, |_, _| v.inv()));
    }
    let inv = m.partial_piv_lu().inverse();
    if !is_finite(inv.as_ref()) || inv.norm_max() > 1e300 {
        return Err(Error::Singular(format!("{n}x{n} matrix is numerically singular")));
    }
    Ok(inv)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: MatRef<'_, c64>) -> Result<(Vec<f64>, CMat)> {
    let h = hermitian_part(m);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("Hermitian eigensolver: {e:?}")))?;
    let s = evd.S();
    let vals: Vec<f64> = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let h = hermitian_part(m);
    h.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("Hermitian eigensolver: {e:?}")))
}

pub fn min_eigenvalue(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(eigvalsh(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Applies `f` to the eigenvalues of the Hermitian part of `m`.
pub fn hermitian_map(m: MatRef<'_, c64>, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, u) = eigh(m)?;
    let n = vals.len();
    let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * f(vals[j]));
    Ok(&scaled * u.adjoint())
}

/// Clips negative eigenvalues to zero.
pub fn psd_project(m: MatRef<'_, c64>) -> Result<CMat> {
    hermitian_map(m, |v| v.max(0.0))
}

pub fn psd_sqrt(m: MatRef<'_, c64>, floor: f64) -> Result<CMat> {
    hermitian_map(m, |v| v.max(floor).sqrt())
}

pub fn psd_inv_sqrt(m: MatRef<'_, c64>, floor: f64) -> Result<CMat> {
    hermitian_map(m, |v| 1.0 / v.max(floor).sqrt())
}

/// Projection onto the span of eigenvectors with eigenvalue above `threshold`,
/// together with its rank.
pub fn support_projection(m: MatRef<'_, c64>, threshold: f64) -> Result<(CMat, usize)> {
    let (vals, u) = eigh(m)?;
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > threshold).collect();
    let basis = Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
    Ok((&basis * basis.adjoint(), keep.len()))
}

/// Singular values in descending order.
pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("SVD: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Default relative threshold below which singular values count as zero.
pub const RANK_RTOL: f64 = 1e-8;

/// Rank with singular values below `rtol·max(σ₁, 1)` treated as zero.
pub fn numerical_rank(m: MatRef<'_, c64>, rtol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let cut = rtol * s.first().copied().unwrap_or(0.0).max(1.0);
    Ok(s.iter().filter(|&&v| v >= cut).count())
}

/// Orthonormal basis (as columns) of the numerical kernel.
pub fn kernel_basis(m: MatRef<'_, c64>, rtol: f64) -> Result<CMat> {
    let n = m.ncols();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let svd = m.svd().map_err(|e| Error::LinAlg(format!("SVD: {e:?}")))?;
    let s = svd.S();
    let k = s.dim();
    let smax = (0..k).map(|i| s[i].re).fold(0.0, f64::max);
    let cut = rtol * smax.max(1.0);
    let v = svd.V();
    let cols: Vec<usize> = (0..n).filter(|&j| j >= k || s[j].re < cut).collect();
    Ok(Mat::from_fn(n, cols.len(), |i, j| v[(i, cols[j])]))
}

/// Orthogonal projection onto the column span of `basis` (columns need not be orthonormal).
pub fn range_projection(basis: MatRef<'_, c64>, rtol: f64) -> Result<CMat> {
    let n = basis.nrows();
    if basis.ncols() == 0 {
        return Ok(Mat::zeros(n, n));
    }
    let svd = basis.svd().map_err(|e| Error::LinAlg(format!("SVD: {e:?}")))?;
    let s = svd.S();
    let smax = (0..s.dim()).map(|i| s[i].re).fold(0.0, f64::max);
    let u = svd.U();
    let cols: Vec<usize> = (0..s.dim()).filter(|&j| s[j].re > rtol * smax).collect();
    let q = Mat::from_fn(n, cols.len(), |i, j| u[(i, cols[j])]);
    Ok(&q * q.adjoint())
}

/// Kronecker product a ⊗ b.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<c64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    m.eigenvalues().map_err(|e| Error::LinAlg(format!("eigenvalues: {e:?}")))
}

/// Random Hermitian matrix with independent standard complex Gaussian
/// entries above the diagonal and real Gaussian diagonal.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut m: CMat = Mat::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = cx(rng.sample(StandardNormal), 0.0);
        for i in 0..j {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let v = cx(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Serde adapter: a matrix as a list of rows, each entry an `[re, im]` pair.
pub mod mat_serde {
    use super::*;

    pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(Mat::from_fn(rows.len(), ncols, |i, j| cx(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
