//! Selfadjoint linearizations of selfadjoint noncommutative polynomials.
//!
//! A polynomial `P` is realized as the Schur complement of a degree-one
//! pencil `L = [[0, B], [C, D]]` with `C = B*`, `D = D*` and `D` invertible
//! over polynomials, so that `P = B D⁻¹ C`. Then `λ − P` is singular exactly
//! when `λ e₁₁ + L` is, with equal kernel dimensions.
//!
//! Construction: the affine part `ℓ` gets the two-dimensional block
//! `B = [ℓ/2, 1]`, `D = [[0, 1], [1, 0]]`. Every remaining pair of terms
//! `c·w + c̄·w*` with `w = x₁⋯x_d` gets a block of size `2(d − 1)` with
//! `D = [[0, K*], [K, 0]]`, where `K = 1 − N` and `N` carries `x₂, …, x_{d−1}` on
//! its superdiagonal. `K⁻¹ = 1 + N + N² + ⋯` is polynomial, and
//! `B = [c·x₁ e₁ᵀ, x_d e_{d−1}ᵀ]` gives `B D⁻¹ B* = c·w + c̄·w*`.
//! Palindromic words are split as `(c/2)·w + (c/2)·w*`.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cx, CMat};
use crate::ncpoly::{Letter, NCPoly, PolyMatrix, Word};

/// Threshold on `σ_min / ‖M‖` below which a matrix counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-8;

/// `a₀ ⊗ 1 + a₁ ⊗ Z₁ + a₂ ⊗ Z₂` with Hermitian `n × n` coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPencil {
    pub n: usize,
    #[serde(with = "linalg::mat_serde")]
    pub a0: CMat,
    #[serde(with = "linalg::mat_serde")]
    pub a1: CMat,
    #[serde(with = "linalg::mat_serde")]
    pub a2: CMat,
}

impl LinearPencil {
    pub fn new(a0: CMat, a1: CMat, a2: CMat) -> Result<Self> {
        let n = a0.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("pencil dimension must be at least 1".into()));
        }
        for (name, a) in [("a0", &a0), ("a1", &a1), ("a2", &a2)] {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch(format!("{name} is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
            }
            if !linalg::is_hermitian(a.as_ref(), 1e-12) {
                return Err(Error::Precondition(format!("{name} is not Hermitian")));
            }
        }
        Ok(LinearPencil { n, a0, a1, a2 })
    }

    /// Adds `λ·e₁₁` to the constant coefficient.
    pub fn corner_shift(&self, lambda: f64) -> LinearPencil {
        let mut out = self.clone();
        out.a0[(0, 0)] += cx(lambda, 0.0);
        out
    }

    /// `L(A₁, A₂) = a₀ ⊗ I + a₁ ⊗ A₁ + a₂ ⊗ A₂` as an `nN × nN` block matrix.
    pub fn eval(&self, x1: MatRef<'_, c64>, x2: MatRef<'_, c64>) -> Result<CMat> {
        let d = x1.nrows();
        if x1.ncols() != d || x2.nrows() != d || x2.ncols() != d {
            return Err(Error::DimensionMismatch("pencil arguments must be equal square matrices".into()));
        }
        let id = linalg::identity(d);
        let mut out = linalg::kron(self.a0.as_ref(), id.as_ref());
        out += linalg::kron(self.a1.as_ref(), x1);
        out += linalg::kron(self.a2.as_ref(), x2);
        Ok(out)
    }

    /// The pencil as a matrix of affine polynomials.
    pub fn to_poly_matrix(&self) -> PolyMatrix<c64> {
        let mut m = PolyMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let p = NCPoly::from_terms([
                    (self.a0[(i, j)], Word::empty()),
                    (self.a1[(i, j)], Word(vec![Letter::Z1])),
                    (self.a2[(i, j)], Word(vec![Letter::Z2])),
                ]);
                m.set(i, j, p);
            }
        }
        m
    }
}

/// The data `(B, C, D, D′)` witnessing a linearization.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationCertificate {
    pub b: PolyMatrix<c64>,
    pub c: PolyMatrix<c64>,
    pub d: PolyMatrix<c64>,
    pub d_prime: PolyMatrix<c64>,
}

impl LinearizationCertificate {
    pub fn m(&self) -> usize {
        self.d.rows
    }

    /// `C = B*`, `D = D*` and all three of degree at most one.
    pub fn is_selfadjoint_form(&self) -> bool {
        self.c == self.b.adjoint() && self.d == self.d.adjoint() && self.b.degree() <= 1 && self.d.degree() <= 1
    }

    pub fn to_text(&self) -> String {
        format!(
            "B = {}\nC = {}\nD = {}\nD' = {}",
            self.b.to_text(),
            self.c.to_text(),
            self.d.to_text(),
            self.d_prime.to_text()
        )
    }

    /// Inverse of [`LinearizationCertificate::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = [None, None, None, None];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { pos: 0, msg: format!("expected `name = [...]`, got {line:?}") })?;
            let slot = match key.trim() {
                "B" => 0,
                "C" => 1,
                "D" => 2,
                "D'" => 3,
                other => return Err(Error::Parse { pos: 0, msg: format!("unknown certificate field {other:?}") }),
            };
            parts[slot] = Some(PolyMatrix::parse(val)?);
        }
        let [Some(b), Some(c), Some(d), Some(d_prime)] = parts else {
            return Err(Error::Parse { pos: 0, msg: "certificate needs B, C, D and D'".into() });
        };
        Ok(LinearizationCertificate { b, c, d, d_prime })
    }
}

struct Block {
    b: Vec<NCPoly>,
    d: Vec<Vec<NCPoly>>,
    d_prime: Vec<Vec<NCPoly>>,
}

fn letter(l: Letter) -> NCPoly {
    NCPoly::var(l)
}

fn affine_block(l: NCPoly) -> Block {
    let half = l.scale(&cx(0.5, 0.0));
    let swap = || vec![vec![NCPoly::zero(), NCPoly::one()], vec![NCPoly::one(), NCPoly::zero()]];
    Block { b: vec![half, NCPoly::one()], d: swap(), d_prime: swap() }
}

/// Block realizing `c·w + c̄·w*` for a word of length ≥ 2.
fn word_block(c: c64, w: &Word) -> Block {
    let x = &w.0;
    let d = x.len();
    let k = d - 1;
    let mut kmat = vec![vec![NCPoly::zero(); k]; k];
    let mut kinv = vec![vec![NCPoly::zero(); k]; k];
    for i in 0..k {
        kmat[i][i] = NCPoly::one();
        if i + 1 < k {
            kmat[i][i + 1] = -letter(x[i + 1]);
        }
        // (K⁻¹)_{ij} = x_{i+1} ⋯ x_j (0-based letters x[i+1..=j])
        for j in i..k {
            kinv[i][j] = NCPoly::monomial(c64::new(1.0, 0.0), Word(x[i + 1..=j].to_vec()));
        }
    }
    let adj = |m: &Vec<Vec<NCPoly>>| -> Vec<Vec<NCPoly>> {
        (0..k).map(|i| (0..k).map(|j| m[j][i].adjoint()).collect()).collect()
    };
    let (kstar, kinv_star) = (adj(&kmat), adj(&kinv));
    let mut dm = vec![vec![NCPoly::zero(); 2 * k]; 2 * k];
    let mut dp = dm.clone();
    for i in 0..k {
        for j in 0..k {
            dm[i][k + j] = kstar[i][j].clone();
            dm[k + i][j] = kmat[i][j].clone();
            // D⁻¹ = [[0, K⁻¹], [K*⁻¹, 0]]
            dp[i][k + j] = kinv[i][j].clone();
            dp[k + i][j] = kinv_star[i][j].clone();
        }
    }
    let mut b = vec![NCPoly::zero(); 2 * k];
    b[0] = NCPoly::monomial(c, Word(vec![x[0]]));
    b[2 * k - 1] = letter(x[d - 1]);
    Block { b, d: dm, d_prime: dp }
}

/// Builds a selfadjoint linearization of `p` and its certificate.
pub fn linearize(p: &NCPoly) -> Result<(LinearPencil, LinearizationCertificate)> {
    if !p.is_selfadjoint() {
        return Err(Error::InvalidPolynomial(format!("{p} is not selfadjoint; linearize its star square instead")));
    }
    if p.degree() == 0 {
        return Err(Error::InvalidPolynomial("constant polynomials have no linearization".into()));
    }
    let mut blocks = Vec::new();
    let affine = p.affine_part();
    if !affine.is_zero() {
        blocks.push(affine_block(affine));
    }
    for (c, w) in p.terms().filter(|(_, w)| w.len() >= 2) {
        let rev = w.reversed();
        if rev == *w {
            blocks.push(word_block(c * 0.5, w));
        } else if *w < rev {
            // the partner term carries the conjugate coefficient
            blocks.push(word_block(*c, w));
        }
    }
    let m: usize = blocks.iter().map(|b| b.b.len()).sum();
    let mut b = PolyMatrix::zeros(1, m);
    let mut d = PolyMatrix::zeros(m, m);
    let mut d_prime = PolyMatrix::zeros(m, m);
    let mut off = 0;
    for blk in &blocks {
        let s = blk.b.len();
        for i in 0..s {
            b.set(0, off + i, blk.b[i].clone());
            for j in 0..s {
                d.set(off + i, off + j, blk.d[i][j].clone());
                d_prime.set(off + i, off + j, blk.d_prime[i][j].clone());
            }
        }
        off += s;
    }
    let cert = LinearizationCertificate { c: b.adjoint(), b, d, d_prime };
    let pencil = assemble(&cert)?;
    Ok((pencil, cert))
}

/// Coefficients of `[[0, B], [C, D]]`.
fn assemble(cert: &LinearizationCertificate) -> Result<LinearPencil> {
    let n = 1 + cert.m();
    let entry = |i: usize, j: usize| -> Option<&NCPoly> {
        match (i, j) {
            (0, 0) => None,
            (0, j) => Some(cert.b.get(0, j - 1)),
            (i, 0) => Some(cert.c.get(i - 1, 0)),
            (i, j) => Some(cert.d.get(i - 1, j - 1)),
        }
    };
    let mut a = [Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n)];
    for i in 0..n {
        for j in 0..n {
            let Some(p) = entry(i, j) else { continue };
            if p.degree() > 1 {
                return Err(Error::InvalidPolynomial(format!("pencil entry ({i},{j}) = {p} has degree > 1")));
            }
            a[0][(i, j)] = p.coeff(&Word::empty());
            a[1][(i, j)] = p.coeff(&Word(vec![Letter::Z1]));
            a[2][(i, j)] = p.coeff(&Word(vec![Letter::Z2]));
        }
    }
    let [a0, a1, a2] = a;
    LinearPencil::new(a0, a1, a2)
}

/// Checks `D D′ = D′ D = 1` and `B D′ C = p` exactly, in rational arithmetic.
pub fn verify_certificate(p: &NCPoly, cert: &LinearizationCertificate) -> bool {
    let run = || -> Result<bool> {
        let m = cert.m();
        if cert.b.rows != 1 || cert.b.cols != m || cert.c.rows != m || cert.c.cols != 1 || cert.d_prime.rows != m {
            return Ok(false);
        }
        let (b, c, d, dp) = (cert.b.to_exact()?, cert.c.to_exact()?, cert.d.to_exact()?, cert.d_prime.to_exact()?);
        let id = PolyMatrix::identity(m);
        if d.mul(&dp)? != id || dp.mul(&d)? != id {
            return Ok(false);
        }
        let bdc = b.mul(&dp)?.mul(&c)?;
        Ok(*bdc.get(0, 0) == p.to_exact()?)
    };
    run().unwrap_or(false)
}

/// Smallest singular value relative to the largest (1 for the zero matrix
/// of size 0, 0 for the zero matrix otherwise).
pub fn relative_min_singular(m: MatRef<'_, c64>) -> Result<f64> {
    let s = linalg::singular_values(m)?;
    let (Some(&hi), Some(&lo)) = (s.first(), s.last()) else { return Ok(1.0) };
    if hi == 0.0 {
        return Ok(0.0);
    }
    Ok(lo / hi)
}

/// Kernel dimension with singular values below `SINGULAR_RTOL·σ₁` counted as zero.
pub fn nullity(m: MatRef<'_, c64>) -> Result<usize> {
    let s = linalg::singular_values(m)?;
    let hi = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v <= SINGULAR_RTOL * hi).count() + (m.ncols().saturating_sub(s.len())))
}

/// `(dim ker(λ − P(A₁,A₂)), dim ker((λ e₁₁ + L)(A₁,A₂)))`.
pub fn kernel_dimensions(
    p: &NCPoly,
    pencil: &LinearPencil,
    lambda: f64,
    x1: MatRef<'_, c64>,
    x2: MatRef<'_, c64>,
) -> Result<(usize, usize)> {
    let pv = p.eval_matrices(x1, x2)?;
    let shifted = Mat::from_fn(pv.nrows(), pv.ncols(), |i, j| if i == j { cx(lambda, 0.0) - pv[(i, j)] } else { -pv[(i, j)] });
    let lv = pencil.corner_shift(lambda).eval(x1, x2)?;
    Ok((nullity(shifted.as_ref())?, nullity(lv.as_ref())?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceViolation {
    pub trial: usize,
    pub engineered: bool,
    pub lambda: f64,
    pub poly_singular: bool,
    pub pencil_singular: bool,
    pub poly_nullity: usize,
    pub pencil_nullity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub dim: usize,
    pub generic_both_invertible: usize,
    pub engineered_both_singular: usize,
    pub violations: Vec<EquivalenceViolation>,
}

/// Compares invertibility of `P(A₁,A₂)` and `L(A₁,A₂)` on random Hermitian
/// pairs. Each trial checks a generic sample at λ = 0, and an engineered one:
/// λ set to an eigenvalue of `P(A₁,A₂)`, so `λ − P` is singular and
/// `λ e₁₁ + L` must be as well, with the same kernel dimension.
pub fn invertibility_equivalence_check(
    p: &NCPoly,
    pencil: &LinearPencil,
    trials: usize,
    dim: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let mut report =
        EquivalenceReport { trials, dim, generic_both_invertible: 0, engineered_both_singular: 0, violations: Vec::new() };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let a1 = linalg::random_hermitian(dim, &mut rng);
        let a2 = linalg::random_hermitian(dim, &mut rng);
        let pv = p.eval_matrices(a1.as_ref(), a2.as_ref())?;
        let eig = linalg::eigvalsh(pv.as_ref())?;
        let pick = (rand::Rng::random::<u64>(&mut rng) as usize) % dim.max(1);
        for (engineered, lambda) in [(false, 0.0), (true, eig[pick])] {
            let shifted =
                Mat::from_fn(dim, dim, |i, j| if i == j { cx(lambda, 0.0) - pv[(i, j)] } else { -pv[(i, j)] });
            let lv = pencil.corner_shift(lambda).eval(a1.as_ref(), a2.as_ref())?;
            let ps = relative_min_singular(shifted.as_ref())? < SINGULAR_RTOL;
            let ls = relative_min_singular(lv.as_ref())? < SINGULAR_RTOL;
            let (pn, ln) = (nullity(shifted.as_ref())?, nullity(lv.as_ref())?);
            let ok = ps == ls && pn == ln && (!engineered || ps);
            if ok && engineered {
                report.engineered_both_singular += 1;
            } else if ok && !ps {
                report.generic_both_invertible += 1;
            }
            if !ok {
                report.violations.push(EquivalenceViolation {
                    trial,
                    engineered,
                    lambda,
                    poly_singular: ps,
                    pencil_singular: ls,
                    poly_nullity: pn,
                    pencil_nullity: ln,
                });
            }
        }
    }
    Ok(report)
}

impl PartialEq<PolyMatrix<c64>> for LinearPencil {
    fn eq(&self, other: &PolyMatrix<c64>) -> bool {
        self.to_poly_matrix() == *other
    }
}

/// Whether every coefficient of the pencil is a Gaussian integer.
pub fn has_integer_coefficients(pencil: &LinearPencil) -> bool {
    [&pencil.a0, &pencil.a1, &pencil.a2].iter().all(|a| {
        (0..pencil.n).all(|i| (0..pencil.n).all(|j| a[(i, j)].re.fract() == 0.0 && a[(i, j)].im.fract() == 0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows};

    fn p(s: &str) -> NCPoly {
        NCPoly::parse(s).unwrap()
    }

    #[test]
    fn anticommutator_matches_three_by_three_display() {
        let (l, cert) = linearize(&p("Z1*Z2 + Z2*Z1")).unwrap();
        assert_eq!(l.n, 3);
        let expected = PolyMatrix::parse("[0, Z1, Z2; Z1, 0, 1; Z2, 1, 0]").unwrap();
        assert!(l == expected, "{}", l.to_poly_matrix().to_text());
        assert_eq!(cert.d, cert.d_prime);
        assert!(cert.is_selfadjoint_form());
        assert!(verify_certificate(&p("Z1*Z2 + Z2*Z1"), &cert));
        let shifted = l.corner_shift(2.0);
        assert_eq!(shifted.a0[(0, 0)], cx(2.0, 0.0));
    }

    #[test]
    fn certificate_rejects_negated_inverse() {
        let q = p("Z1*Z2 + Z2*Z1");
        let (_, mut cert) = linearize(&q).unwrap();
        cert.d_prime = cert.d_prime.neg();
        assert!(!verify_certificate(&q, &cert));
    }

    #[test]
    fn low_degree_inputs() {
        for s in ["Z1", "Z1^2", "Z1*Z2*Z1", "Z1 + 2*Z2 - 3", "Z1*Z2*Z2 + Z2*Z2*Z1 + i*Z1*Z2 - i*Z2*Z1 + 0.5"] {
            let q = p(s);
            let (l, cert) = linearize(&q).unwrap();
            assert!(verify_certificate(&q, &cert), "{s}");
            assert!(cert.is_selfadjoint_form(), "{s}");
            assert_eq!(l.n, 1 + cert.m());
            assert_eq!(l.a0[(0, 0)], cx(0.0, 0.0));
        }
        assert!(linearize(&p("Z1*Z2")).is_err());
        assert!(linearize(&p("3")).is_err());
    }

    #[test]
    fn corner_shift_is_additive() {
        let (l, _) = linearize(&p("Z1*Z2 + Z2*Z1")).unwrap();
        assert_eq!(l.corner_shift(0.0), l);
        assert_eq!(l.corner_shift(-1.0).corner_shift(-1.0).a0[(0, 0)], cx(-2.0, 0.0));
    }

    #[test]
    fn singular_examples() {
        let q = p("Z1*Z2 + Z2*Z1");
        let (l, _) = linearize(&q).unwrap();
        let z = Mat::zeros(2, 2);
        let (pn, ln) = kernel_dimensions(&q, &l, 0.0, z.as_ref(), z.as_ref()).unwrap();
        assert_eq!((pn, ln), (2, 2));

        let q = p("Z1");
        let (l, _) = linearize(&q).unwrap();
        let a1 = diag_real(&[0.0, 1.0]);
        let a2 = from_real_rows(&[&[0.3, 0.0], &[0.0, -0.2]]);
        let (pn, ln) = kernel_dimensions(&q, &l, 0.0, a1.as_ref(), a2.as_ref()).unwrap();
        assert_eq!((pn, ln), (1, 1));
    }

    #[test]
    fn random_equivalence() {
        let q = p("Z1*Z2 + Z2*Z1");
        let (l, _) = linearize(&q).unwrap();
        let r = invertibility_equivalence_check(&q, &l, 20, 3, 7).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert_eq!(r.generic_both_invertible, 20);
        assert_eq!(r.engineered_both_singular, 20);
    }

    #[test]
    fn certificate_text_round_trip() {
        let q = p("Z1*Z2*Z1 + 0.5*Z2");
        let (_, cert) = linearize(&q).unwrap();
        let back = LinearizationCertificate::parse(&cert.to_text()).unwrap();
        assert_eq!(back, cert);
        assert!(verify_certificate(&q, &back));
    }

    #[test]
    fn pencil_json_round_trip() {
        let (l, _) = linearize(&p("i*Z1*Z2 - i*Z2*Z1")).unwrap();
        let text = serde_json::to_string(&l).unwrap();
        let back: LinearPencil = serde_json::from_str(&text).unwrap();
        assert_eq!(back, l);
        assert!(has_integer_coefficients(&l));
    }
}
