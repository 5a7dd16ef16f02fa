//! Matrix-valued Cauchy transforms of `a ⊗ X` and kernel dimensions of
//! pencils `b ⊗ 1 − a ⊗ X` for a scalar-distributed selfadjoint `X`.
//!
//! With `E_n` the entrywise expectation, `E_n(h(X)) = ∫ h(t) dμ(t)` for any
//! matrix-valued function `h`, so everything here is a quadrature against μ.

use faer::{Mat, MatRef};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cx, CMat};
use crate::measure::{quadrature, SpectralMeasure};

/// An `n × n` matrix with positive definite imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfPlanePoint(CMat);

impl HalfPlanePoint {
    pub fn new(z: CMat) -> Result<Self> {
        if z.nrows() != z.ncols() || z.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("half-plane point must be square, got {}x{}", z.nrows(), z.ncols())));
        }
        let min_imag = linalg::min_eigenvalue(linalg::imag_part(z.as_ref()).as_ref())?;
        if !(min_imag > 0.0) {
            return Err(Error::NotInUpperHalfPlane { min_imag });
        }
        Ok(HalfPlanePoint(z))
    }

    /// `z·I_n`
    pub fn scalar(n: usize, z: c64) -> Result<Self> {
        Self::new(linalg::scaled_identity(n, z))
    }

    /// `b + i y I` for Hermitian `b`.
    pub fn above(b: MatRef<'_, c64>, y: f64) -> Result<Self> {
        let mut z = linalg::hermitian_part(b);
        for i in 0..z.nrows() {
            z[(i, i)] += cx(0.0, y);
        }
        Self::new(z)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }
}

fn check_square(a: MatRef<'_, c64>, n: usize, name: &str) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{name} is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// `(z − t a)⁻¹`
fn resolvent(z: MatRef<'_, c64>, a: MatRef<'_, c64>, t: f64) -> Result<CMat> {
    let n = z.nrows();
    let m = Mat::from_fn(n, n, |i, j| z[(i, j)] - a[(i, j)] * t);
    linalg::inverse(m.as_ref())
}

/// `G(z) = E_n((z − a ⊗ X)⁻¹)` together with the quadrature samples of the
/// resolvent (atoms included).
pub fn cauchy_samples(
    a: MatRef<'_, c64>,
    mu: &SpectralMeasure,
    z: MatRef<'_, c64>,
    tol: f64,
) -> Result<(CMat, Vec<quadrature::Sample<CMat>>)> {
    mu.integrate(tol, |t| resolvent(z, a, t))
}

/// Matrix-valued Cauchy transform `E_n((z − a ⊗ X)⁻¹)`, X distributed as `mu`.
pub fn matrix_cauchy(a: MatRef<'_, c64>, mu: &SpectralMeasure, z: &HalfPlanePoint) -> Result<CMat> {
    check_square(a, z.dim(), "a")?;
    Ok(cauchy_samples(a, mu, z.as_mat().as_ref(), quadrature::DEFAULT_TOL)?.0)
}

/// Reciprocal transform `F = G⁻¹`.
pub fn matrix_f(a: MatRef<'_, c64>, mu: &SpectralMeasure, z: &HalfPlanePoint) -> Result<CMat> {
    linalg::inverse(matrix_cauchy(a, mu, z)?.as_ref())
}

/// `F(w)` and its Fréchet derivative as an `n² × n²` matrix acting on
/// column-major vectorizations: `DF(w)[h] = F E_n(R h R) F` with
/// `R = (w − t a)⁻¹`.
pub fn f_with_derivative(a: MatRef<'_, c64>, mu: &SpectralMeasure, w: MatRef<'_, c64>, tol: f64) -> Result<(CMat, CMat)> {
    let n = w.nrows();
    let (g, samples) = cauchy_samples(a, mu, w, tol)?;
    let f = linalg::inverse(g.as_ref())?;
    // E[Rᵀ ⊗ R] represents h ↦ E[R h R]
    let mut dg: CMat = Mat::zeros(n * n, n * n);
    for s in &samples {
        let r = &s.value;
        for q in 0..n {
            for p in 0..n {
                let c = r[(q, p)] * s.weight;
                if c == cx(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    for i in 0..n {
                        dg[(p * n + i, q * n + j)] += c * r[(i, j)];
                    }
                }
            }
        }
    }
    // vec(F M F) = (Fᵀ ⊗ F) vec(M)
    let ft_f = linalg::kron(f.transpose(), f.as_ref());
    Ok((f.clone(), &ft_f * &dg))
}

/// `k(t) = tr_n ker(b − t a)` as an exact fraction of `n`.
pub fn pencil_kernel_rank(a: MatRef<'_, c64>, b: MatRef<'_, c64>, t: f64) -> Result<Ratio<i64>> {
    let n = a.nrows();
    check_square(b, n, "b")?;
    let m = Mat::from_fn(n, n, |i, j| b[(i, j)] - a[(i, j)] * t);
    let rank = linalg::numerical_rank(m.as_ref(), linalg::RANK_RTOL)?;
    Ok(Ratio::new((n - rank) as i64, n.max(1) as i64))
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceptionalPoint {
    pub t: f64,
    #[serde(serialize_with = "ser_ratio")]
    pub k: Ratio<i64>,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<i64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(ratio_f64(*r))
}

/// `k_min` and the finitely many `t` where `k(t) > k_min`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PencilKernelProfile {
    pub n: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub k_min: Ratio<i64>,
    pub exceptional: Vec<ExceptionalPoint>,
}

impl PencilKernelProfile {
    pub fn k_min_f64(&self) -> f64 {
        ratio_f64(self.k_min)
    }

    /// k(t), using the recorded exceptional points.
    pub fn k_at(&self, t: f64) -> Ratio<i64> {
        self.exceptional.iter().find(|e| e.t == t).map_or(self.k_min, |e| e.k)
    }
}

const GENERIC_DRAWS: usize = 7;
const MAX_WIDENINGS: usize = 6;
const PROFILE_SEED: u64 = 0x5eed_0f_7e11;

/// Finite real generalized eigenvalues of `(b, a)`, i.e. real `t` with
/// `det(b − t a) = 0` after compressing the pencil to its normal rank.
fn real_generalized_eigenvalues(
    a: MatRef<'_, c64>,
    b: MatRef<'_, c64>,
    normal_rank: usize,
    shift: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    let r = normal_rank;
    if r == 0 {
        return Ok(Vec::new());
    }
    let mut gauss = |rows: usize, cols: usize| -> CMat {
        Mat::from_fn(rows, cols, |_, _| cx(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    };
    let (u, v) = if r == n { (linalg::identity(n), linalg::identity(n)) } else { (gauss(n, r), gauss(n, r)) };
    let ac = u.adjoint() * a * &v;
    let bc = u.adjoint() * b * &v;
    // det(Bc − t Ac) = 0  ⇔  1/(t − σ) is an eigenvalue of (Bc − σ Ac)⁻¹ Ac
    let shifted = Mat::from_fn(r, r, |i, j| bc[(i, j)] - ac[(i, j)] * shift);
    let inv = linalg::inverse(shifted.as_ref())?;
    let s = &inv * &ac;
    let scale = s.norm_max().max(1e-300);
    let mut out = Vec::new();
    for ev in linalg::eigenvalues(s.as_ref())? {
        if ev.norm() <= 1e-10 * scale {
            continue; // infinite eigenvalue of the pencil
        }
        let t = shift + ev.inv().re;
        let ti = ev.inv().im;
        if ti.abs() <= 1e-6 * (1.0 + t.abs()) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Generic kernel rank of `b − t a` and its exceptional points. Every hint is
/// tested, along with every real generalized eigenvalue of the pencil.
pub fn kernel_profile(a: MatRef<'_, c64>, b: MatRef<'_, c64>, hints: &[f64]) -> Result<PencilKernelProfile> {
    let n = a.nrows();
    check_square(b, n, "b")?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROFILE_SEED);
    let scale = 1.0 + a.norm_max() + b.norm_max();
    let mut radius = hints.iter().fold(0.0f64, |m, t| m.max(t.abs())) + 1.0;
    let mut k_min = None;
    let mut draws = Vec::new();
    for _ in 0..=MAX_WIDENINGS {
        draws.clear();
        for _ in 0..GENERIC_DRAWS {
            let mag = radius * (1.0 + rng.random::<f64>());
            let t = if rng.random::<bool>() { mag } else { -mag };
            draws.push((t, pencil_kernel_rank(a, b, t)?));
        }
        if draws.iter().all(|d| d.1 == draws[0].1) {
            k_min = Some(draws[0].1);
            break;
        }
        radius *= 2.0 + scale;
    }
    let k_min = k_min.ok_or_else(|| {
        Error::GenericRank(format!("kernel rank disagrees across generic draws: {:?}", draws.iter().map(|d| d.1).collect::<Vec<_>>()))
    })?;
    let normal_rank = n - (*k_min.numer() as usize * n / *k_min.denom() as usize);
    let mut candidates: Vec<f64> = hints.to_vec();
    candidates.extend(real_generalized_eigenvalues(a, b, normal_rank, draws[0].0, &mut rng)?);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut exceptional: Vec<ExceptionalPoint> = Vec::new();
    for t in candidates {
        let k = pencil_kernel_rank(a, b, t)?;
        if k > k_min && !exceptional.iter().any(|e| (e.t - t).abs() <= 1e-9 * (1.0 + t.abs())) {
            exceptional.push(ExceptionalPoint { t, k });
        }
    }
    Ok(PencilKernelProfile { n, k_min, exceptional })
}

/// `τ_n(ker(b ⊗ 1 − a ⊗ X)) = k_min + Σ_t (k(t) − k_min) μ({t})`.
pub fn pencil_kernel_trace(a: MatRef<'_, c64>, b: MatRef<'_, c64>, mu: &SpectralMeasure) -> Result<f64> {
    let hints: Vec<f64> = mu.atoms().iter().map(|at| at.x).collect();
    let profile = kernel_profile(a, b, &hints)?;
    let k_min = profile.k_min_f64();
    let mut total = k_min;
    for at in mu.atoms() {
        let k = pencil_kernel_rank(a, b, at.x)?;
        total += (ratio_f64(k) - k_min) * at.m;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Orthogonal projection onto `s · ker(b − t a)`.
fn transformed_kernel_projection(a: MatRef<'_, c64>, b: MatRef<'_, c64>, s: MatRef<'_, c64>, t: f64) -> Result<CMat> {
    let n = a.nrows();
    let m = Mat::from_fn(n, n, |i, j| b[(i, j)] - a[(i, j)] * t);
    let k = linalg::kernel_basis(m.as_ref(), linalg::RANK_RTOL)?;
    linalg::range_projection((s * &k).as_ref(), 1e-12)
}

/// `E_n` of the kernel projection of `(a ⊗ X − b ⊗ 1)(s⁻¹ ⊗ 1)`, i.e.
/// `∫ proj(s · ker(b − t a)) dμ(t)` for invertible `s`.
pub fn kernel_expectation(a: MatRef<'_, c64>, b: MatRef<'_, c64>, s: MatRef<'_, c64>, mu: &SpectralMeasure) -> Result<CMat> {
    let n = a.nrows();
    check_square(b, n, "b")?;
    check_square(s, n, "s")?;
    let mut out: CMat = Mat::zeros(n, n);
    for at in mu.atoms() {
        out += faer::Scale(cx(at.m, 0.0)) * transformed_kernel_projection(a, b, s, at.x)?;
    }
    if !mu.pieces().is_empty() {
        let profile = kernel_profile(a, b, &[])?;
        if profile.k_min_f64() > 0.0 {
            // the kernel is a smooth function of t off a null set
            for (t, w) in mu.continuous_nodes(8) {
                out += faer::Scale(cx(w, 0.0)) * transformed_kernel_projection(a, b, s, t)?;
            }
        }
    }
    Ok(linalg::hermitian_part(out.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, identity, max_abs_diff};

    fn semicircle() -> SpectralMeasure {
        SpectralMeasure::semicircle(0.0, 2.0).unwrap()
    }

    #[test]
    fn zero_coefficient_gives_inverse() {
        let z = HalfPlanePoint::new(from_real_rows(&[&[1.0, 0.5], &[0.5, -1.0]])).err();
        assert!(z.is_some());
        let zm = Mat::from_fn(2, 2, |i, j| if i == j { cx(0.3 * i as f64, 1.0) } else { cx(0.2, 0.0) });
        let z = HalfPlanePoint::new(zm.clone()).unwrap();
        let g = matrix_cauchy(Mat::<c64>::zeros(2, 2).as_ref(), &semicircle(), &z).unwrap();
        let inv = linalg::inverse(zm.as_ref()).unwrap();
        assert!(max_abs_diff(g.as_ref(), inv.as_ref()) < 1e-14);
        let f = matrix_f(Mat::<c64>::zeros(2, 2).as_ref(), &semicircle(), &z).unwrap();
        assert!(max_abs_diff(f.as_ref(), zm.as_ref()) < 1e-13);
    }

    #[test]
    fn scalar_reduction() {
        let mu = SpectralMeasure::atomic(&[(0.0, 0.7), (1.0, 0.3)]).unwrap();
        for z in [cx(0.2, 0.5), cx(-1.0, 0.01)] {
            let g = matrix_cauchy(identity(1).as_ref(), &mu, &HalfPlanePoint::scalar(1, z).unwrap()).unwrap();
            assert!((g[(0, 0)] - mu.cauchy(z).unwrap()).norm() < 1e-15);
            let g = matrix_cauchy(identity(1).as_ref(), &semicircle(), &HalfPlanePoint::scalar(1, z).unwrap()).unwrap();
            assert!((g[(0, 0)] - semicircle().cauchy(z).unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn diagonal_coefficient_example() {
        let a = diag_real(&[1.0, -1.0]);
        let z = HalfPlanePoint::scalar(2, cx(0.0, 1.0)).unwrap();
        let g = matrix_cauchy(a.as_ref(), &SpectralMeasure::dirac(1.0), &z).unwrap();
        assert!((g[(0, 0)] - cx(-0.5, -0.5)).norm() < 1e-15);
        assert!((g[(1, 1)] - cx(0.5, -0.5)).norm() < 1e-15);
        assert!(g[(0, 1)].norm() < 1e-15);
        let f = matrix_f(a.as_ref(), &SpectralMeasure::dirac(1.0), &z).unwrap();
        assert!((f[(0, 0)] - cx(-1.0, 1.0)).norm() < 1e-14);
        assert!((f[(1, 1)] - cx(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let a = from_real_rows(&[&[1.0, 0.3], &[0.3, -0.5]]);
        let mu = SpectralMeasure::new(
            vec![crate::measure::Atom { x: 0.5, m: 0.4 }],
            vec![crate::measure::Density::Semicircle { center: -1.0, radius: 1.0, weight: 0.6 }],
            (-2.0, 1.0),
        )
        .unwrap();
        let w = Mat::from_fn(2, 2, |i, j| if i == j { cx(0.1, 0.7 + 0.2 * i as f64) } else { cx(0.1, 0.05) });
        let (f, df) = f_with_derivative(a.as_ref(), &mu, w.as_ref(), 1e-13).unwrap();
        let h = Mat::from_fn(2, 2, |i, j| cx(0.3 * i as f64 - 0.1, 0.2 * j as f64 + 0.05));
        let eps = 1e-6;
        let wp = Mat::from_fn(2, 2, |i, j| w[(i, j)] + h[(i, j)] * eps);
        let wm = Mat::from_fn(2, 2, |i, j| w[(i, j)] - h[(i, j)] * eps);
        let fp = linalg::inverse(cauchy_samples(a.as_ref(), &mu, wp.as_ref(), 1e-13).unwrap().0.as_ref()).unwrap();
        let fm = linalg::inverse(cauchy_samples(a.as_ref(), &mu, wm.as_ref(), 1e-13).unwrap().0.as_ref()).unwrap();
        let fd = Mat::from_fn(2, 2, |i, j| (fp[(i, j)] - fm[(i, j)]) / (2.0 * eps));
        let vec_h = Mat::from_fn(4, 1, |k, _| h[(k % 2, k / 2)]);
        let lin = &df * &vec_h;
        for k in 0..4 {
            assert!((lin[(k, 0)] - fd[(k % 2, k / 2)]).norm() < 1e-6, "{k}");
        }
        assert!(f.norm_max() > 0.0);
    }

    #[test]
    fn kernel_rank_examples() {
        let a = diag_real(&[1.0, -1.0]);
        let zero = Mat::<c64>::zeros(2, 2);
        assert_eq!(pencil_kernel_rank(a.as_ref(), zero.as_ref(), 0.0).unwrap(), Ratio::from_integer(1));
        assert_eq!(pencil_kernel_rank(a.as_ref(), zero.as_ref(), 1.0).unwrap(), Ratio::from_integer(0));
        let b = diag_real(&[1.0, 2.0]);
        assert_eq!(pencil_kernel_rank(identity(2).as_ref(), b.as_ref(), 1.0).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn profile_examples() {
        let a = diag_real(&[1.0, -1.0]);
        let zero = Mat::<c64>::zeros(2, 2);
        let p = kernel_profile(a.as_ref(), zero.as_ref(), &[]).unwrap();
        assert_eq!(p.k_min, Ratio::from_integer(0));
        assert_eq!(p.exceptional.len(), 1);
        assert!(p.exceptional[0].t.abs() < 1e-12 && p.exceptional[0].k == Ratio::from_integer(1));

        let z1 = Mat::<c64>::zeros(1, 1);
        let p = kernel_profile(z1.as_ref(), z1.as_ref(), &[]).unwrap();
        assert_eq!(p.k_min, Ratio::from_integer(1));
        assert!(p.exceptional.is_empty());

        let p = kernel_profile(identity(2).as_ref(), diag_real(&[1.0, 2.0]).as_ref(), &[]).unwrap();
        assert_eq!(p.k_min, Ratio::from_integer(0));
        let ts: Vec<f64> = p.exceptional.iter().map(|e| e.t).collect();
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - 1.0).abs() < 1e-12 && (ts[1] - 2.0).abs() < 1e-12);
        assert!(p.exceptional.iter().all(|e| e.k == Ratio::new(1, 2)));
    }

    #[test]
    fn singular_pencil_candidates() {
        // b − t a = [[1 − t, 0, 0], [0, 0, 0], [0, 0, 3 − t]] has normal rank 2
        let a = diag_real(&[1.0, 0.0, 1.0]);
        let b = diag_real(&[1.0, 0.0, 3.0]);
        let p = kernel_profile(a.as_ref(), b.as_ref(), &[]).unwrap();
        assert_eq!(p.k_min, Ratio::new(1, 3));
        let ts: Vec<f64> = p.exceptional.iter().map(|e| e.t).collect();
        assert_eq!(ts.len(), 2, "{ts:?}");
        assert!((ts[0] - 1.0).abs() < 1e-9 && (ts[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_trace_examples() {
        let one = identity(1);
        let zero1 = Mat::<c64>::zeros(1, 1);
        let mu = SpectralMeasure::atomic(&[(0.0, 0.7), (1.0, 0.3)]).unwrap();
        assert!((pencil_kernel_trace(one.as_ref(), zero1.as_ref(), &mu).unwrap() - 0.7).abs() < 1e-15);
        let a = diag_real(&[1.0, -1.0]);
        let zero2 = Mat::<c64>::zeros(2, 2);
        assert_eq!(pencil_kernel_trace(a.as_ref(), zero2.as_ref(), &semicircle()).unwrap(), 0.0);
        let b = diag_real(&[0.0, 1.0]);
        assert_eq!(pencil_kernel_trace(zero2.as_ref(), b.as_ref(), &semicircle()).unwrap(), 0.5);
    }

    #[test]
    fn kernel_expectation_scalar() {
        let one = identity(1);
        let zero1 = Mat::<c64>::zeros(1, 1);
        let mu = SpectralMeasure::atomic(&[(0.0, 0.7), (1.0, 0.3)]).unwrap();
        let e = kernel_expectation(one.as_ref(), zero1.as_ref(), one.as_ref(), &mu).unwrap();
        assert!((e[(0, 0)].re - 0.7).abs() < 1e-15);
        // a = 0: the kernel is everything, for any distribution
        let e = kernel_expectation(zero1.as_ref(), zero1.as_ref(), one.as_ref(), &semicircle()).unwrap();
        assert!((e[(0, 0)].re - 1.0).abs() < 1e-12);
    }
}
