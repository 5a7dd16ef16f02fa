//! Property suites shared by the `properties` test target and the acceptance
//! binary. Each suite runs a proptest runner and reports the first failure.

#![allow(dead_code)]

use faer::Mat;
use freeatoms::linalg::{self, c64, cx, CMat};
use freeatoms::linearize;
use freeatoms::measure::{self, Atom, Density};
use freeatoms::ncpoly::{Letter, NCPoly, Word};
use freeatoms::opval::{self, HalfPlanePoint};
use freeatoms::rmt::{self, EnsembleSpec, OracleOptions, OracleTarget};
use freeatoms::subord::{self, FreeSumModel};
use freeatoms::SpectralMeasure;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 6] = [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5];

/// Measures with up to six atoms on a fixed grid and at most one continuous
/// piece from a closed-form family.
pub fn measure_strategy() -> impl Strategy<Value = SpectralMeasure> {
    (
        0u8..64,
        prop::collection::vec(0.05f64..1.0, 6),
        prop::option::of((0u8..3, -1.0f64..1.0, 0.3f64..2.0, 0.1f64..1.0)),
    )
        .prop_filter("needs some mass", |(mask, _, cont)| *mask != 0 || cont.is_some())
        .prop_map(|(mask, weights, cont)| {
            let mut raw: Vec<(f64, f64)> =
                (0..6).filter(|k| mask & (1 << k) != 0).map(|k| (GRID[k], weights[k])).collect();
            let cw = cont.map_or(0.0, |c| c.3);
            let total: f64 = raw.iter().map(|r| r.1).sum::<f64>() + cw;
            for r in &mut raw {
                r.1 /= total;
            }
            let pieces: Vec<Density> = cont
                .map(|(fam, c, w, _)| {
                    let weight = cw / total;
                    match fam {
                        0 => Density::Semicircle { center: c, radius: w, weight },
                        1 => Density::Arcsine { a: c - w, b: c + w, weight },
                        _ => Density::Uniform { a: c - w, b: c + w, weight },
                    }
                })
                .into_iter()
                .collect();
            let atoms: Vec<Atom> = raw.iter().map(|&(x, m)| Atom { x, m }).collect();
            SpectralMeasure::new(atoms, pieces, (-3.5, 3.5)).expect("generated measure is valid")
        })
}

fn upper_point() -> impl Strategy<Value = c64> {
    (-4.0f64..4.0, -4.0f64..0.5).prop_map(|(x, ly)| cx(x, 10f64.powf(ly)))
}

fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
    any::<u64>().prop_map(move |seed| linalg::random_hermitian(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn run<S: Strategy>(name: &str, cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn ok<T>(r: freeatoms::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

/// `Im G < 0` and `Im F ≥ Im z − tol` on the upper half-plane.
pub fn measure_nevanlinna(cases: u32) -> Result<(), String> {
    run("measure Nevanlinna", cases, (measure_strategy(), upper_point()), |(mu, z)| {
        let g = ok(measure::cauchy_scalar(&mu, z))?;
        let f = ok(measure::f_scalar(&mu, z))?;
        check(g.im < 0.0, || format!("Im G = {} at {z}", g.im))?;
        check(f.im >= z.im - 1e-9 * (1.0 + f.norm()), || format!("Im F = {} < Im z = {}", f.im, z.im))
    })
}

/// Purely atomic transforms are the finite sum, and `Re(iy G(λ + iy))`
/// decreases to the atom mass as `y ↓ 0`.
pub fn measure_atoms(cases: u32) -> Result<(), String> {
    let atomic = measure_strategy().prop_filter("purely atomic", |m| m.pieces().is_empty());
    run("measure atoms", cases, (atomic, upper_point()), |(mu, z)| {
        let g = ok(measure::cauchy_scalar(&mu, z))?;
        let exact: c64 = mu.atoms().iter().map(|a| cx(a.m, 0.0) / (z - a.x)).sum();
        check((g - exact).norm() <= 4.0 * f64::EPSILON * (1.0 + exact.norm()), || format!("{g} vs {exact}"))?;
        for a in mu.atoms() {
            let mut prev = f64::INFINITY;
            for k in 2..=6 {
                let y = 10f64.powi(-k);
                let v = (cx(0.0, y) * ok(measure::cauchy_scalar(&mu, cx(a.x, y)))?).re;
                check(v <= prev + 1e-12 && v >= a.m - 1e-12, || format!("ladder value {v} at y = {y}, mass {}", a.m))?;
                prev = v;
            }
            check((prev - a.m).abs() < 1e-6, || format!("limit {prev} vs mass {}", a.m))?;
        }
        Ok(())
    })
}

/// The empirical measure of `N` quantiles approximates `G` to `O(1/N)` away
/// from the axis.
pub fn measure_quantiles(cases: u32) -> Result<(), String> {
    let far = (-3.0f64..3.0, 0.5f64..2.0).prop_map(|(x, y)| cx(x, y));
    run("measure quantiles", cases, (measure_strategy(), far), |(mu, z)| {
        let n = 2000;
        let q = mu.quantiles(n);
        let emp: c64 = q.iter().map(|&t| cx(1.0 / n as f64, 0.0) / (z - t)).sum();
        let g = ok(measure::cauchy_scalar(&mu, z))?;
        let bound = 8.0 / (n as f64 * z.im * z.im);
        check((emp - g).norm() <= bound, || format!("|{emp} − {g}| > {bound}"))
    })
}

/// `‖G(z)‖ ≤ ‖(Im z)⁻¹‖` and `Im G(z) ⪯ 0` for matrix arguments.
pub fn opval_resolvent_bound(cases: u32) -> Result<(), String> {
    let strat = (measure_strategy(), hermitian(3), hermitian(3), any::<u64>(), 0.05f64..2.0);
    run("opval resolvent bound", cases, strat, |(mu, a, re, seed, s)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = linalg::random_hermitian(3, &mut rng);
        let im = &h * h.adjoint() + linalg::scaled_identity(3, cx(s, 0.0));
        let w = &re + faer::Scale(cx(0.0, 1.0)) * &im;
        let z = ok(HalfPlanePoint::new(w))?;
        let g = ok(opval::matrix_cauchy(a.as_ref(), &mu, &z))?;
        let norm = |m: &CMat| ok(linalg::singular_values(m.as_ref())).map(|s| s[0]);
        let inv_im = ok(linalg::inverse(im.as_ref()))?;
        check(norm(&g)? <= norm(&inv_im)? * (1.0 + 1e-9), || "resolvent bound violated".into())?;
        let img = linalg::imag_part(g.as_ref());
        let top = *ok(linalg::eigvalsh(img.as_ref()))?.last().unwrap();
        check(top <= 1e-10, || format!("Im G has eigenvalue {top}"))
    })
}

/// Kernel-trace bookkeeping: integer for atomless measures, and linear in the
/// weight of an added atom with slope `k(t) − value`.
pub fn opval_kernel_trace(cases: u32) -> Result<(), String> {
    let strat = (1usize..4, any::<u64>(), 0.05f64..0.5, -1.5f64..1.5);
    run("opval kernel trace", cases, strat, |(n, seed, delta, t0)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = linalg::random_hermitian(n, &mut rng);
        // plant a one-dimensional kernel of b − t₀a
        let mut v = linalg::random_hermitian(n, &mut rng);
        let (vals, vecs) = ok(linalg::eigh(v.as_ref()))?;
        let e = Mat::from_fn(n, 1, |i, _| vecs[(i, 0)]);
        v -= faer::Scale(cx(vals[0], 0.0)) * (&e * e.adjoint());
        let b = &v + faer::Scale(cx(t0, 0.0)) * &a;
        let sc = ok(SpectralMeasure::semicircle(0.0, 2.0))?;
        let base = ok(opval::pencil_kernel_trace(a.as_ref(), b.as_ref(), &sc))?;
        check((n as f64 * base - (n as f64 * base).round()).abs() < 1e-12, || format!("n·value = {}", n as f64 * base))?;
        let k = ok(opval::pencil_kernel_rank(a.as_ref(), b.as_ref(), t0))?;
        let k = *k.numer() as f64 / *k.denom() as f64;
        let mixed = ok(SpectralMeasure::new(
            vec![Atom { x: t0, m: delta }],
            vec![Density::Semicircle { center: 0.0, radius: 2.0, weight: 1.0 - delta }],
            (t0.min(-2.0), t0.max(2.0)),
        ))?;
        let got = ok(opval::pencil_kernel_trace(a.as_ref(), b.as_ref(), &mixed))?;
        let want = base + delta * (k - base);
        check((got - want).abs() < 1e-12, || format!("{got} vs {want} (k = {k})"))
    })
}

fn model_strategy() -> impl Strategy<Value = FreeSumModel> {
    (1usize..3, any::<u64>(), measure_strategy(), measure_strategy()).prop_map(|(n, seed, mu1, mu2)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = linalg::random_hermitian(n, &mut rng);
        let a2 = linalg::random_hermitian(n, &mut rng);
        FreeSumModel::new(a1, a2, mu1, mu2).expect("valid model")
    })
}

fn point_for(n: usize, seed: u64, y: f64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let re = linalg::random_hermitian(n, &mut rng);
    &re + linalg::scaled_identity(n, cx(0.0, y))
}

/// Fixed-point postconditions and the swap symmetry.
pub fn subord_postconditions(cases: u32) -> Result<(), String> {
    let strat = (model_strategy(), any::<u64>(), 0.1f64..2.0);
    run("subordination postconditions", cases, strat, |(model, seed, y)| {
        let tol = 1e-10;
        let z = ok(HalfPlanePoint::new(point_for(model.n, seed, y)))?;
        let r = ok(subord::solve_subordination(&model, &z, 1e-12, subord::DEFAULT_MAX_ITER))?;
        check(r.residual_consistency <= tol && r.residual_fixed_point <= tol, || {
            format!("residuals {} {}", r.residual_consistency, r.residual_fixed_point)
        })?;
        for w in [&r.omega1, &r.omega2] {
            let d = linalg::imag_part(w.as_ref()) - linalg::imag_part(z.as_mat().as_ref());
            let low = ok(linalg::min_eigenvalue(d.as_ref()))?;
            check(low >= -tol, || format!("Im ω − Im z has eigenvalue {low}"))?;
        }
        let s = ok(subord::solve_subordination(&model.swapped(), &z, 1e-12, subord::DEFAULT_MAX_ITER))?;
        let d1 = (&s.omega1 - &r.omega2).norm_max();
        let d2 = (&s.omega2 - &r.omega1).norm_max();
        check(d1.max(d2) <= 1e-8 * (1.0 + r.omega1.norm_max()), || format!("swap mismatch {d1} {d2}"))
    })
}

/// Translating by a constant second variable shifts the transform.
pub fn subord_scalar_reduction(cases: u32) -> Result<(), String> {
    run("subordination scalar reduction", cases, (measure_strategy(), -2.0f64..2.0, upper_point()), |(mu, c, z)| {
        let z = cx(z.re, z.im.max(1e-2));
        let model = FreeSumModel::scalar(mu.clone(), SpectralMeasure::dirac(c));
        let g = ok(subord::sum_cauchy(&model, &ok(HalfPlanePoint::scalar(1, z))?, 1e-12))?[(0, 0)];
        let want = ok(measure::cauchy_scalar(&mu, z - c))?;
        check((g - want).norm() <= 1e-9 * (1.0 + want.norm()), || format!("{g} vs {want}"))
    })
}

fn word_strategy() -> impl Strategy<Value = Word> {
    prop::collection::vec(prop_oneof![Just(Letter::Z1), Just(Letter::Z2)], 0..4).prop_map(Word)
}

/// Polynomials with small dyadic complex coefficients.
pub fn poly_strategy() -> impl Strategy<Value = NCPoly> {
    prop::collection::vec(((-8i32..8), (-8i32..8), word_strategy()), 1..5).prop_map(|terms| {
        NCPoly::from_terms(terms.into_iter().map(|(re, im, w)| (cx(re as f64 / 4.0, im as f64 / 4.0), w)))
    })
}

/// Parse/print idempotence, the anti-homomorphism property of the adjoint
/// and `P*P` evaluation.
pub fn ncpoly_algebra(cases: u32) -> Result<(), String> {
    run("ncpoly algebra", cases, (poly_strategy(), poly_strategy(), any::<u64>()), |(p, q, seed)| {
        let text = p.to_string();
        let back = ok(NCPoly::parse(&text))?;
        check(back == p && back.to_string() == text, || format!("round trip of {text} gave {back}"))?;
        let lhs = (p.clone() * q.clone()).adjoint();
        let rhs = q.adjoint() * p.adjoint();
        check(lhs == rhs, || format!("(pq)* = {lhs}, q*p* = {rhs}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = linalg::random_hermitian(3, &mut rng);
        let a2 = linalg::random_hermitian(3, &mut rng);
        let pv = ok(p.eval_matrices(a1.as_ref(), a2.as_ref()))?;
        let ss = ok(p.star_square().eval_matrices(a1.as_ref(), a2.as_ref()))?;
        let want = pv.adjoint() * &pv;
        check((&ss - &want).norm_max() <= 1e-10 * (1.0 + want.norm_max()), || "P*P evaluation mismatch".into())
    })
}

/// Every linearization verifies, and its kernel matches that of `λ − P` at
/// engineered eigenvalues.
pub fn linearize_roundtrip(cases: u32) -> Result<(), String> {
    let sa = poly_strategy()
        .prop_map(|p| p.clone() + p.adjoint())
        .prop_filter("non-constant", |p| p.degree() >= 1);
    run("linearization round trip", cases, (sa, 2usize..7, any::<u64>()), |(p, dim, seed)| {
        let (pencil, cert) = ok(linearize::linearize(&p))?;
        check(linearize::verify_certificate(&p, &cert), || format!("certificate fails for {p}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = linalg::random_hermitian(dim, &mut rng);
        let a2 = linalg::random_hermitian(dim, &mut rng);
        let pv = ok(p.eval_matrices(a1.as_ref(), a2.as_ref()))?;
        let lambda = ok(linalg::eigvalsh(pv.as_ref()))?[0];
        let (kp, kl) = ok(linearize::kernel_dimensions(&p, &pencil, lambda, a1.as_ref(), a2.as_ref()))?;
        check(kp == kl && kp >= 1, || format!("kernel dimensions {kp} vs {kl} for {p}"))
    })
}

/// Identical seeds give identical oracle reports, and realized spectra are
/// the quantiles.
pub fn oracle_reproducibility(cases: u32) -> Result<(), String> {
    run("oracle reproducibility", cases, (measure_strategy(), measure_strategy(), any::<u64>()), |(mu1, mu2, seed)| {
        let spec = ok(EnsembleSpec::new(40, 2, seed, mu1.clone(), mu2.clone()))?;
        let target = OracleTarget::Polynomial { poly: ok(NCPoly::parse("Z1*Z2 + Z2*Z1"))?, lambdas: vec![0.0] };
        let opts = OracleOptions { bins: 16, ..OracleOptions::default() };
        let a = ok(rmt::oracle_report(&spec, &target, &opts))?;
        let b = ok(rmt::oracle_report(&spec, &target, &opts))?;
        check(a == b, || "reports differ".into())?;
        let (a1, a2) = rmt::realize_pair(&spec);
        for (m, mu) in [(a1, &mu1), (a2, &mu2)] {
            let ev = ok(linalg::eigvalsh(m.as_ref()))?;
            let q = mu.quantiles(40);
            let err = ev.iter().zip(&q).fold(0.0f64, |e, (x, y)| e.max((x - y).abs()));
            check(err <= 1e-10 * (1.0 + mu.radius()), || format!("spectrum off by {err}"))?;
        }
        Ok(())
    })
}

pub type Suite = (&'static str, fn(u32) -> Result<(), String>, u32);

/// Every suite with its default case count.
pub fn suites() -> Vec<Suite> {
    vec![
        ("measure_nevanlinna", measure_nevanlinna, 64),
        ("measure_atoms", measure_atoms, 32),
        ("measure_quantiles", measure_quantiles, 32),
        ("opval_resolvent_bound", opval_resolvent_bound, 32),
        ("opval_kernel_trace", opval_kernel_trace, 48),
        ("subord_postconditions", subord_postconditions, 24),
        ("subord_scalar_reduction", subord_scalar_reduction, 24),
        ("ncpoly_algebra", ncpoly_algebra, 64),
        ("linearize_roundtrip", linearize_roundtrip, 48),
        ("oracle_reproducibility", oracle_reproducibility, 8),
    ]
}
