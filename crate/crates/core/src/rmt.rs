//! Random-matrix oracle: asymptotically free pairs realized by Haar
//! conjugation, with empirical spectra and kernel masses.
//!
//! `A₁ = D₁` and `A₂ = U D₂ Uᴴ` with `D_j` the diagonal of `N` quantiles of
//! `μ_j` and `U` Haar distributed. Conjugating both by a further independent
//! unitary leaves every spectral quantity unchanged, so one Haar factor per
//! trial suffices.

use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cx, CMat};
use crate::measure::SpectralMeasure;
use crate::ncpoly::{Letter, NCPoly};
use crate::subord::FreeSumModel;

/// Haar unitary from the QR factorization of a complex Ginibre matrix, with
/// the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    haar_columns(n, n, rng)
}

/// First `k` columns of a Haar unitary: the phase-fixed `Q` factor of an
/// `n × k` complex Gaussian.
pub fn haar_columns<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g: CMat = Mat::from_fn(n, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cx(re * scale, im * scale)
    });
    if k == 0 {
        return g;
    }
    let qr = g.qr();
    let mut q = qr.compute_thin_Q();
    let r = qr.thin_R();
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { cx(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Most frequent value of a sorted slice.
fn mode(sorted: &[f64]) -> f64 {
    let mut best = (0.0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = i + sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    best.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mu1: SpectralMeasure,
    pub mu2: SpectralMeasure,
}

impl EnsembleSpec {
    pub fn new(n: usize, trials: usize, seed: u64, mu1: SpectralMeasure, mu2: SpectralMeasure) -> Result<Self> {
        let spec = EnsembleSpec { n, trials, seed, mu1, mu2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.trials < 1 {
            return Err(Error::Precondition(format!(
                "ensemble needs N >= 2 and trials >= 1, got N = {}, trials = {}",
                self.n, self.trials
            )));
        }
        Ok(())
    }

    /// Independent stream for one trial.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }
}

/// One realization: `A₁` is diagonal, `A₂ = U D₂ Uᴴ` is dense.
#[derive(Clone, Debug)]
pub struct Realization {
    pub d1: Vec<f64>,
    pub a2: CMat,
}

impl Realization {
    pub fn a1(&self) -> CMat {
        linalg::diag_real(&self.d1)
    }

    /// `P(A₁, A₂)`, multiplying by `A₁` as a row scaling.
    pub fn eval_poly(&self, p: &NCPoly) -> CMat {
        let n = self.d1.len();
        let mut out: CMat = Mat::zeros(n, n);
        for (c, w) in p.terms() {
            // the rightmost run of Z1 stays diagonal until it meets Z2
            let mut diag = vec![1.0; n];
            let mut acc: Option<CMat> = None;
            for letter in w.0.iter().rev() {
                acc = match (letter, acc) {
                    (Letter::Z1, None) => {
                        diag.iter_mut().zip(&self.d1).for_each(|(x, d)| *x *= d);
                        None
                    }
                    (Letter::Z2, None) => Some(Mat::from_fn(n, n, |i, j| self.a2[(i, j)] * diag[j])),
                    (Letter::Z1, Some(mut m)) => {
                        for j in 0..n {
                            for i in 0..n {
                                m[(i, j)] *= self.d1[i];
                            }
                        }
                        Some(m)
                    }
                    (Letter::Z2, Some(m)) => Some(&self.a2 * &m),
                };
            }
            match acc {
                None => {
                    for i in 0..n {
                        out[(i, i)] += *c * diag[i];
                    }
                }
                Some(m) => out += faer::Scale(*c) * &m,
            }
        }
        out
    }

    /// `b ⊗ 1 − a₁ ⊗ A₁ − a₂ ⊗ A₂`.
    pub fn eval_pencil(&self, model: &FreeSumModel, b: MatRef<'_, c64>) -> CMat {
        let n = model.n;
        let big = self.d1.len();
        Mat::from_fn(n * big, n * big, |r, s| {
            let (i, k) = (r / big, r % big);
            let (j, l) = (s / big, s % big);
            let mut v = -model.a2[(i, j)] * self.a2[(k, l)];
            if k == l {
                v += b[(i, j)] - model.a1[(i, j)] * self.d1[k];
            }
            v
        })
    }
}

/// Draws the pair for one trial.
pub fn realize_pair_with<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Realization {
    let n = spec.n;
    let d1 = spec.mu1.quantiles(n);
    let d2 = spec.mu2.quantiles(n);
    // U D U* = c + Σ (dⱼ − c) uⱼuⱼ*, and any k columns of a Haar U are
    // distributed as haar_columns(n, k)
    let c = mode(&d2);
    let shifted: Vec<f64> = d2.iter().map(|d| d - c).filter(|d| *d != 0.0).collect();
    let v = haar_columns(n, shifted.len(), rng);
    let vd = Mat::from_fn(n, shifted.len(), |i, j| v[(i, j)] * shifted[j]);
    let mut a2 = &vd * v.adjoint();
    for i in 0..n {
        for j in 0..i {
            let x = (a2[(i, j)] + a2[(j, i)].conj()) * 0.5;
            a2[(i, j)] = x;
            a2[(j, i)] = x.conj();
        }
        a2[(i, i)] = cx(a2[(i, i)].re + c, 0.0);
    }
    Realization { d1, a2 }
}

/// `(A₁, A₂)` for trial 0 of `spec`.
pub fn realize_pair(spec: &EnsembleSpec) -> (CMat, CMat) {
    let r = realize_pair_with(spec, &mut spec.trial_rng(0));
    (r.a1(), r.a2)
}

/// Number of negative eigenvalues of a Hermitian matrix, from a pivoted
/// `LBLᴴ` factorization and Sylvester's law of inertia.
pub fn negative_count(m: MatRef<'_, c64>) -> usize {
    let n = m.nrows();
    if n == 0 {
        return 0;
    }
    let f = m.lblt(Side::Lower);
    let d = f.B_diag();
    let s = f.B_subdiag();
    let mut neg = 0;
    let mut k = 0;
    while k < n {
        let off = if k + 1 < n { s[k] } else { cx(0.0, 0.0) };
        if off != cx(0.0, 0.0) {
            let det = d[k].re * d[k + 1].re - off.norm_sqr();
            if det < 0.0 {
                neg += 1;
            } else if d[k].re + d[k + 1].re < 0.0 {
                neg += 2;
            }
            k += 2;
        } else {
            if d[k].re < 0.0 {
                neg += 1;
            }
            k += 1;
        }
    }
    neg
}

/// Fraction of eigenvalues of the Hermitian `m` in `[λ − ε, λ + ε]`.
pub fn empirical_kernel_mass(m: MatRef<'_, c64>, lambda: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let shifted = |s: f64| Mat::from_fn(n, n, |i, j| if i == j { m[(i, j)] - s } else { m[(i, j)] });
    // #{v ≤ λ + ε} − #{v < λ − ε}, with ≤ realized as < at the next float up
    let hi = (lambda + epsilon).next_up();
    let upper = negative_count(shifted(hi).as_ref());
    let lower = negative_count(shifted(lambda - epsilon).as_ref());
    Ok((upper.saturating_sub(lower)) as f64 / n as f64)
}

/// Fraction of `eigs` in `[λ − ε, λ + ε]`.
pub fn eigenvalue_mass(eigs: &[f64], lambda: f64, epsilon: f64) -> f64 {
    if eigs.is_empty() {
        return 0.0;
    }
    eigs.iter().filter(|&&v| (v - lambda).abs() <= epsilon).count() as f64 / eigs.len() as f64
}

/// What the oracle diagonalizes.
#[derive(Clone, Debug)]
pub enum OracleTarget {
    /// `P(A₁, A₂)`, with masses at each `λ`.
    Polynomial { poly: NCPoly, lambdas: Vec<f64> },
    /// `b ⊗ 1 − a₁ ⊗ A₁ − a₂ ⊗ A₂`, with its kernel mass.
    Pencil { model: FreeSumModel, b: CMat },
}

impl OracleTarget {
    fn lambdas(&self) -> Vec<f64> {
        match self {
            OracleTarget::Polynomial { lambdas, .. } => lambdas.clone(),
            OracleTarget::Pencil { .. } => vec![0.0],
        }
    }

    fn matrix(&self, r: &Realization) -> CMat {
        match self {
            OracleTarget::Polynomial { poly, .. } => r.eval_poly(poly),
            OracleTarget::Pencil { model, b } => r.eval_pencil(model, b.as_ref()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Histogram bins; 0 skips the full diagonalization and counts masses by inertia.
    pub bins: usize,
    /// Histogram range; defaults to the observed spectrum.
    pub range: Option<(f64, f64)>,
    /// Half-width of the mass window, relative to `1 + ‖M‖`.
    pub epsilon: f64,
    /// A spike is a bin with at least this many times each neighbour's count.
    pub spike_factor: f64,
    /// Smallest mass a spike bin must carry.
    pub spike_min_mass: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { bins: 200, range: None, epsilon: 1e-10, spike_factor: 3.0, spike_min_mass: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Average density over trials.
    pub density: f64,
    /// Average fraction of eigenvalues in the bin.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub center: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub lambda: f64,
    pub mass: f64,
    pub std_error: f64,
    pub per_trial: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub ensemble: EnsembleSpec,
    pub matrix_size: usize,
    pub histogram: Vec<HistogramBin>,
    pub spikes: Vec<Spike>,
    pub masses: Vec<MassEstimate>,
}

struct TrialOutcome {
    eigs: Option<Vec<f64>>,
    masses: Vec<f64>,
}

fn run_trial(spec: &EnsembleSpec, target: &OracleTarget, opts: &OracleOptions, trial: usize) -> Result<TrialOutcome> {
    let real = realize_pair_with(spec, &mut spec.trial_rng(trial));
    let m = target.matrix(&real);
    let lambdas = target.lambdas();
    if opts.bins > 0 {
        let eigs = linalg::eigvalsh(m.as_ref())?;
        let scale = 1.0 + eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let masses = lambdas.iter().map(|&l| eigenvalue_mass(&eigs, l, opts.epsilon * scale)).collect();
        Ok(TrialOutcome { eigs: Some(eigs), masses })
    } else {
        let scale = 1.0 + max_row_sum(m.as_ref());
        let masses = lambdas
            .iter()
            .map(|&l| empirical_kernel_mass(m.as_ref(), l, opts.epsilon * scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrialOutcome { eigs: None, masses })
    }
}

/// `‖M‖_∞`, an upper bound for the spectral norm of a Hermitian matrix.
fn max_row_sum(m: MatRef<'_, c64>) -> f64 {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Bins whose count is at least `factor` times each neighbour's.
pub fn find_spikes(hist: &[HistogramBin], factor: f64, min_mass: f64) -> Vec<Spike> {
    let mut out = Vec::new();
    for (k, bin) in hist.iter().enumerate() {
        if bin.mass < min_mass {
            continue;
        }
        let left = if k > 0 { hist[k - 1].mass } else { 0.0 };
        let right = hist.get(k + 1).map_or(0.0, |b| b.mass);
        if bin.mass >= factor * left && bin.mass >= factor * right {
            out.push(Spike { center: 0.5 * (bin.lo + bin.hi), mass: bin.mass });
        }
    }
    out
}

fn histogram(all: &[Vec<f64>], bins: usize, range: Option<(f64, f64)>) -> Vec<HistogramBin> {
    let (lo, hi) = range.unwrap_or_else(|| {
        let lo = all.iter().flatten().fold(f64::INFINITY, |a, &v| a.min(v));
        let hi = all.iter().flatten().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs())) + 1e-3 * (hi - lo);
        (lo - pad, hi + pad)
    });
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    let mut total = 0.0;
    for eigs in all {
        total += eigs.len() as f64;
        for &v in eigs {
            if v >= lo && v <= hi {
                let k = (((v - lo) / width) as usize).min(bins - 1);
                counts[k] += 1.0;
            }
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let mass = c / total;
            HistogramBin { lo: lo + k as f64 * width, hi: lo + (k + 1) as f64 * width, density: mass / width, mass }
        })
        .collect()
}

/// Runs all trials (in parallel, one stream each) and aggregates the
/// spectrum histogram, spikes and kernel masses.
pub fn oracle_report(spec: &EnsembleSpec, target: &OracleTarget, opts: &OracleOptions) -> Result<OracleReport> {
    spec.validate()?;
    if let OracleTarget::Pencil { model, b } = target {
        if b.nrows() != model.n || b.ncols() != model.n {
            return Err(Error::DimensionMismatch(format!("b is {}x{}, model has n = {}", b.nrows(), b.ncols(), model.n)));
        }
    }
    let outcomes = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, target, opts, t))
        .collect::<Result<Vec<_>>>()?;
    let lambdas = target.lambdas();
    let masses = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let per_trial: Vec<f64> = outcomes.iter().map(|o| o.masses[k]).collect();
            let (mass, std_error) = mean_se(&per_trial);
            MassEstimate { lambda, mass, std_error, per_trial }
        })
        .collect();
    let eigs: Vec<Vec<f64>> = outcomes.into_iter().filter_map(|o| o.eigs).collect();
    let (hist, spikes) = if opts.bins > 0 {
        let h = histogram(&eigs, opts.bins, opts.range);
        let s = find_spikes(&h, opts.spike_factor, opts.spike_min_mass);
        (h, s)
    } else {
        (Vec::new(), Vec::new())
    };
    let matrix_size = match target {
        OracleTarget::Polynomial { .. } => spec.n,
        OracleTarget::Pencil { model, .. } => spec.n * model.n,
    };
    Ok(OracleReport { ensemble: spec.clone(), matrix_size, histogram: hist, spikes, masses })
}
