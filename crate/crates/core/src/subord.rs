//! Subordination for `a₁ ⊗ X₁ + a₂ ⊗ X₂` with `X₁`, `X₂` free.
//!
//! The subordination functions satisfy
//! `F(z) = F₁(ω₁) = F₂(ω₂) = ω₁ + ω₂ − z`, with `Im ω_j ⪰ Im z`. Writing
//! `h_j = F_j − id`, `ω₁` is the fixed point of `w ↦ h₂(h₁(w) + z) + z` and
//! `ω₂ = h₁(ω₁) + z`. The solver runs Newton's method on that fixed-point
//! equation using the analytic derivative of `F_j`, falling back to damped
//! plain iteration whenever a Newton step fails to reduce the residual.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cx, CMat};
use crate::measure::SpectralMeasure;
use crate::opval::{self, HalfPlanePoint};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative accuracy requested from the quadrature inside `F_j`.
const QUAD_TOL: f64 = 1e-13;
const MAX_DAMPING: usize = 8;
/// Extra Newton steps attempted after the tolerance is met.
const POLISH_STEPS: usize = 3;

/// Two E_n-free variables `a₁ ⊗ X₁` and `a₂ ⊗ X₂` with `X_j ~ μ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct FreeSumModel {
    pub n: usize,
    pub a1: CMat,
    pub a2: CMat,
    pub mu1: SpectralMeasure,
    pub mu2: SpectralMeasure,
}

/// Wire form of [`FreeSumModel`]: coefficients default to `1` (scalar model).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<Vec<Vec<[f64; 2]>>>,
    pub mu1: SpectralMeasure,
    pub mu2: SpectralMeasure,
}

impl TryFrom<ModelSpec> for FreeSumModel {
    type Error = Error;
    fn try_from(s: ModelSpec) -> Result<Self> {
        let conv = |m: Option<Vec<Vec<[f64; 2]>>>| -> Result<CMat> {
            match m {
                Some(rows) => linalg::mat_serde::from_rows(&rows).map_err(Error::DimensionMismatch),
                None => Ok(linalg::identity(1)),
            }
        };
        FreeSumModel::new(conv(s.a1)?, conv(s.a2)?, s.mu1, s.mu2)
    }
}

impl From<FreeSumModel> for ModelSpec {
    fn from(m: FreeSumModel) -> Self {
        ModelSpec {
            a1: Some(linalg::mat_serde::to_rows(&m.a1)),
            a2: Some(linalg::mat_serde::to_rows(&m.a2)),
            mu1: m.mu1,
            mu2: m.mu2,
        }
    }
}

impl FreeSumModel {
    pub fn new(a1: CMat, a2: CMat, mu1: SpectralMeasure, mu2: SpectralMeasure) -> Result<Self> {
        let n = a1.nrows();
        for (name, a) in [("a1", &a1), ("a2", &a2)] {
            if a.nrows() != n || a.ncols() != n || n == 0 {
                return Err(Error::DimensionMismatch(format!("{name} is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
            }
            if !linalg::is_hermitian(a.as_ref(), 1e-12) {
                return Err(Error::Precondition(format!("{name} is not Hermitian")));
            }
        }
        Ok(FreeSumModel { n, a1, a2, mu1, mu2 })
    }

    /// `X₁ + X₂` with `n = 1`.
    pub fn scalar(mu1: SpectralMeasure, mu2: SpectralMeasure) -> Self {
        FreeSumModel { n: 1, a1: linalg::identity(1), a2: linalg::identity(1), mu1, mu2 }
    }

    /// The same sum with the two summands exchanged.
    pub fn swapped(&self) -> Self {
        FreeSumModel { n: self.n, a1: self.a2.clone(), a2: self.a1.clone(), mu1: self.mu2.clone(), mu2: self.mu1.clone() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidMeasure(e.to_string()))
    }

    fn part(&self, j: usize) -> (&CMat, &SpectralMeasure) {
        if j == 1 {
            (&self.a1, &self.mu1)
        } else {
            (&self.a2, &self.mu2)
        }
    }

    /// `F_j(w)`.
    pub fn f(&self, j: usize, w: MatRef<'_, c64>) -> Result<CMat> {
        let (a, mu) = self.part(j);
        let (g, _) = opval::cauchy_samples(a.as_ref(), mu, w, QUAD_TOL)?;
        linalg::inverse(g.as_ref())
    }

    fn f_deriv(&self, j: usize, w: MatRef<'_, c64>) -> Result<(CMat, CMat)> {
        let (a, mu) = self.part(j);
        opval::f_with_derivative(a.as_ref(), mu, w, QUAD_TOL)
    }
}

/// `ω₁`, `ω₂` at one point together with the residuals of the defining identities.
#[derive(Clone, Debug, Serialize)]
pub struct SubordinationResult {
    #[serde(with = "linalg::mat_serde")]
    pub omega1: CMat,
    #[serde(with = "linalg::mat_serde")]
    pub omega2: CMat,
    /// `F₁(ω₁)`, equal to `F(z)` of the sum.
    #[serde(with = "linalg::mat_serde")]
    pub f: CMat,
    /// `‖F₁(ω₁) − F₂(ω₂)‖_max`
    pub residual_fixed_point: f64,
    /// `‖ω₁ + ω₂ − z − F₁(ω₁)‖_max`
    pub residual_consistency: f64,
    pub iterations: usize,
}

impl SubordinationResult {
    /// Cauchy transform of the sum, `F₁(ω₁)⁻¹`.
    pub fn cauchy(&self) -> Result<CMat> {
        linalg::inverse(self.f.as_ref())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

fn in_half_plane(w: &CMat) -> bool {
    linalg::is_finite(w.as_ref())
        && linalg::min_eigenvalue(linalg::imag_part(w.as_ref()).as_ref()).is_ok_and(|m| m > 0.0)
}

fn vec_of(m: &CMat) -> CMat {
    let n = m.nrows();
    Mat::from_fn(n * n, 1, |k, _| m[(k % n, k / n)])
}

fn unvec(v: &CMat, n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| v[(j * n + i, 0)])
}

struct Eval {
    /// w ↦ h₂(h₁(w) + z) + z − w
    phi: CMat,
    /// The fixed-point map's value, h₂(h₁(w) + z) + z.
    next: CMat,
    jac: Option<CMat>,
    norm: f64,
}

fn evaluate(model: &FreeSumModel, z: &CMat, w: &CMat, with_jacobian: bool) -> Result<Eval> {
    let n = model.n;
    let id = linalg::identity(n * n);
    let (f1, d1) = if with_jacobian {
        let (f, d) = model.f_deriv(1, w.as_ref())?;
        (f, Some(d))
    } else {
        (model.f(1, w.as_ref())?, None)
    };
    let v = &f1 - w + z;
    let (f2, d2) = if with_jacobian {
        let (f, d) = model.f_deriv(2, v.as_ref())?;
        (f, Some(d))
    } else {
        (model.f(2, v.as_ref())?, None)
    };
    let next = &f2 - &v + z;
    let phi = &next - w;
    let jac = match (d1, d2) {
        (Some(d1), Some(d2)) => {
            // DΦ = (DF₂ − I)(DF₁ − I) − I
            let dh1 = &d1 - &id;
            let dh2 = &d2 - &id;
            Some(&dh2 * &dh1 - &id)
        }
        _ => None,
    };
    let norm = phi.norm_max();
    Ok(Eval { phi, next, jac, norm })
}

/// Solves for `ω₁`, `ω₂` at `z`, starting from `z` itself.
pub fn solve_subordination(model: &FreeSumModel, z: &HalfPlanePoint, tol: f64, max_iter: usize) -> Result<SubordinationResult> {
    solve_from(model, z, SolverOptions { tol, max_iter }, None)
}

/// As [`solve_subordination`], optionally warm-started at `start` (an
/// earlier `ω₁`, e.g. from a nearby point).
pub fn solve_from(
    model: &FreeSumModel,
    z: &HalfPlanePoint,
    opts: SolverOptions,
    start: Option<&CMat>,
) -> Result<SubordinationResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n = model.n;
    if z.dim() != n {
        return Err(Error::DimensionMismatch(format!("z is {0}x{0}, model is {n}x{n}", z.dim())));
    }
    let zm = z.as_mat().clone();
    match iterate(model, &zm, opts, start) {
        Err(Error::NoConvergence { .. }) => continuation(model, &zm, opts, start),
        r => r,
    }
}

/// Tracks the solution from `z + iI` down to `z`, halving the shift. Used
/// when the direct iteration stalls in a local minimum of the residual.
fn continuation(model: &FreeSumModel, zm: &CMat, opts: SolverOptions, start: Option<&CMat>) -> Result<SubordinationResult> {
    let n = model.n;
    let floor = 1e-3 * linalg::min_eigenvalue(linalg::imag_part(zm.as_ref()).as_ref())?;
    let mut warm = start.cloned();
    let mut iterations = 0;
    let mut s = 1.0;
    loop {
        let shift = if s < floor { 0.0 } else { s };
        let zs = zm + linalg::scaled_identity(n, cx(0.0, shift));
        let mut r = iterate(model, &zs, opts, warm.as_ref())?;
        iterations += r.iterations;
        if shift == 0.0 {
            r.iterations = iterations;
            return Ok(r);
        }
        warm = Some(r.omega1);
        s *= 0.5;
    }
}

fn iterate(model: &FreeSumModel, zm: &CMat, opts: SolverOptions, start: Option<&CMat>) -> Result<SubordinationResult> {
    let n = model.n;
    let zm = zm.clone();
    let mut w = match start {
        Some(s) if s.nrows() == n && in_half_plane(s) => s.clone(),
        _ => zm.clone(),
    };
    let mut cur = evaluate(model, &zm, &w, true)?;
    let mut iterations = 0;
    let mut polish = 0;
    let converged = |e: &Eval, w: &CMat| e.norm <= opts.tol * (1.0 + w.norm_max());
    while iterations < opts.max_iter {
        if converged(&cur, &w) {
            if polish >= POLISH_STEPS {
                break;
            }
            polish += 1;
        }
        iterations += 1;
        let mut accepted = None;
        // Newton step with backtracking
        if let Some(jac) = &cur.jac {
            let rhs = vec_of(&cur.phi);
            let step = jac.partial_piv_lu().solve(&rhs);
            if linalg::is_finite(step.as_ref()) {
                let delta = unvec(&step, n);
                let mut scale = 1.0;
                for _ in 0..MAX_DAMPING {
                    let cand = &w - faer::Scale(cx(scale, 0.0)) * &delta;
                    if in_half_plane(&cand) {
                        if let Ok(e) = evaluate(model, &zm, &cand, true) {
                            if e.norm < cur.norm {
                                accepted = Some((cand, e));
                                break;
                            }
                        }
                    }
                    scale *= 0.5;
                }
            }
        }
        if accepted.is_none() && polish > 0 {
            // the residual has reached the noise floor
            break;
        }
        let (nw, ne) = match accepted {
            Some(x) => x,
            None => {
                // damped fixed-point step
                let mut cand = cur.next.clone();
                let mut damp = 0;
                while !in_half_plane(&cand) {
                    damp += 1;
                    if damp > MAX_DAMPING {
                        return Err(Error::NoConvergence { iterations, residual: cur.norm });
                    }
                    cand = faer::Scale(cx(0.5, 0.0)) * (&cand + &w);
                }
                let e = evaluate(model, &zm, &cand, true)?;
                (cand, e)
            }
        };
        w = nw;
        cur = ne;
    }
    if !converged(&cur, &w) {
        return Err(Error::NoConvergence { iterations, residual: cur.norm });
    }
    finish(model, &zm, w, iterations)
}

fn finish(model: &FreeSumModel, z: &CMat, omega1: CMat, iterations: usize) -> Result<SubordinationResult> {
    let f1 = model.f(1, omega1.as_ref())?;
    let omega2 = &f1 - &omega1 + z;
    let f2 = model.f(2, omega2.as_ref())?;
    let residual_fixed_point = (&f1 - &f2).norm_max();
    let residual_consistency = (&omega1 + &omega2 - z - &f1).norm_max();
    Ok(SubordinationResult { omega1, omega2, f: f1, residual_fixed_point, residual_consistency, iterations })
}

/// Cauchy transform of the sum at `z`.
pub fn sum_cauchy(model: &FreeSumModel, z: &HalfPlanePoint, tol: f64) -> Result<CMat> {
    solve_subordination(model, z, tol, DEFAULT_MAX_ITER)?.cauchy()
}

/// Solves at `b + i y I` for each `y` in order, warm-starting each solve at
/// the previous `ω₁`.
pub fn solve_ladder(
    model: &FreeSumModel,
    b: MatRef<'_, c64>,
    ys: &[f64],
    opts: SolverOptions,
) -> Result<Vec<SubordinationResult>> {
    let mut out: Vec<SubordinationResult> = Vec::with_capacity(ys.len());
    for &y in ys {
        let z = HalfPlanePoint::above(b, y)?;
        let warm = out.last().map(|r| r.omega1.clone());
        out.push(solve_from(model, &z, opts, warm.as_ref())?);
    }
    Ok(out)
}

/// `−(1/π) Im tr_n G(x + i y)` at each grid point.
pub fn sum_density(model: &FreeSumModel, grid: &[f64], y_eval: f64, tol: f64) -> Result<Vec<(f64, f64)>> {
    if !(y_eval > 0.0) {
        return Err(Error::Precondition(format!("evaluation height must be positive, got {y_eval}")));
    }
    let opts = SolverOptions { tol, max_iter: DEFAULT_MAX_ITER };
    let n = model.n;
    let mut out = Vec::with_capacity(grid.len());
    let mut warm: Option<CMat> = None;
    for &x in grid {
        let z = HalfPlanePoint::scalar(n, cx(x, y_eval))?;
        // approach from higher up first so the warm start stays on the right branch
        let res = match solve_from(model, &z, opts, warm.as_ref()) {
            Ok(r) => r,
            Err(_) => {
                let b = linalg::scaled_identity(n, cx(x, 0.0));
                let ys = ladder_to(y_eval);
                solve_ladder(model, b.as_ref(), &ys, opts)?.pop().expect("ladder is nonempty")
            }
        };
        let g = res.cauchy()?;
        out.push((x, -linalg::normalized_trace(g.as_ref()).im / std::f64::consts::PI));
        warm = Some(res.omega1);
    }
    Ok(out)
}

/// Geometric heights from 1 down to `y`.
fn ladder_to(y: f64) -> Vec<f64> {
    let mut ys = Vec::new();
    let mut h = 1.0f64.max(y);
    while h > y {
        ys.push(h);
        h *= 0.25;
    }
    ys.push(y);
    ys
}

/// Closed form `ω = (z + √(z² − 4))/2` for the symmetric Bernoulli law added
/// to itself, on the branch with `Im √ > 0`.
pub fn bernoulli_omega(z: c64) -> c64 {
    let mut r = (z * z - 4.0).sqrt();
    if r.im < 0.0 {
        r = -r;
    }
    (z + r) * 0.5
}
