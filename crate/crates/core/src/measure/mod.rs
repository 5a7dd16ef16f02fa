//! Compactly supported probability measures on the real line and their scalar
//! Cauchy transforms.
//!
//! A [`SpectralMeasure`] is a finite list of atoms plus an optional absolutely
//! continuous part built from closed-form families (semicircle, arcsine,
//! uniform) or a piecewise-linear density table. Measures are validated when
//! constructed; nothing is renormalized behind the caller's back.

pub mod quadrature;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::c64;
use quadrature::{QuadValue, Sample, Segment};

/// Tolerance on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub m: f64,
}

/// One absolutely continuous piece. Closed-form families carry their own
/// total weight; a table's weight is the integral of its piecewise-linear
/// density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Density {
    Semicircle { center: f64, radius: f64, weight: f64 },
    Arcsine { a: f64, b: f64, weight: f64 },
    Uniform { a: f64, b: f64, weight: f64 },
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

impl Density {
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Density::Semicircle { center, radius, .. } => (center - radius, center + radius),
            Density::Arcsine { a, b, .. } | Density::Uniform { a, b, .. } => (*a, *b),
            Density::Table { nodes, .. } => (nodes[0], nodes[nodes.len() - 1]),
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            Density::Semicircle { weight, .. }
            | Density::Arcsine { weight, .. }
            | Density::Uniform { weight, .. } => *weight,
            Density::Table { nodes, values } => nodes
                .windows(2)
                .zip(values.windows(2))
                .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
                .sum(),
        }
    }

    /// Density value at `x` (including the piece weight).
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.interval();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Density::Semicircle { center, radius, weight } => {
                let u = x - center;
                weight * 2.0 / (PI * radius * radius) * (radius * radius - u * u).max(0.0).sqrt()
            }
            Density::Arcsine { a, b, weight } => {
                let d = (x - a) * (b - x);
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    weight / (PI * d.sqrt())
                }
            }
            Density::Uniform { a, b, weight } => weight / (b - a),
            Density::Table { nodes, values } => {
                let k = segment_index(nodes, x);
                let s = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
                values[k] * (1.0 - s) + values[k + 1] * s
            }
        }
    }

    /// Mass of the piece on (-∞, x].
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.interval();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.weight();
        }
        match self {
            Density::Semicircle { center, radius, weight } => {
                let u = ((x - center) / radius).clamp(-1.0, 1.0);
                weight * (0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI)
            }
            Density::Arcsine { a, b, weight } => {
                let u = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0);
                weight * (0.5 + u.asin() / PI)
            }
            Density::Uniform { a, b, weight } => weight * (x - a) / (b - a),
            Density::Table { nodes, values } => {
                let k = segment_index(nodes, x);
                let mut acc = 0.0;
                for j in 0..k {
                    acc += 0.5 * (nodes[j + 1] - nodes[j]) * (values[j] + values[j + 1]);
                }
                let h = x - nodes[k];
                let slope = (values[k + 1] - values[k]) / (nodes[k + 1] - nodes[k]);
                acc + values[k] * h + 0.5 * slope * h * h
            }
        }
    }

    /// Parameter segments with maps `u ↦ (t, dμ/du)` chosen so the integrand
    /// stays smooth at square-root endpoints.
    fn segments(&self) -> Vec<(f64, f64, Box<dyn Fn(f64) -> (f64, f64) + '_>)> {
        match self {
            Density::Semicircle { center, radius, weight } => {
                let (c, r, w) = (*center, *radius, *weight);
                vec![(
                    0.0,
                    PI,
                    Box::new(move |th: f64| {
                        let s = th.sin();
                        (c + r * th.cos(), w * 2.0 / PI * s * s)
                    }),
                )]
            }
            Density::Arcsine { a, b, weight } => {
                let (mid, half, w) = (0.5 * (a + b), 0.5 * (b - a), *weight);
                vec![(0.0, PI, Box::new(move |th: f64| (mid + half * th.cos(), w / PI)))]
            }
            Density::Uniform { a, b, weight } => {
                let d = weight / (b - a);
                vec![(*a, *b, Box::new(move |x: f64| (x, d)))]
            }
            Density::Table { nodes, values } => (0..nodes.len() - 1)
                .map(|k| {
                    let (x0, x1, v0, v1) = (nodes[k], nodes[k + 1], values[k], values[k + 1]);
                    let f: Box<dyn Fn(f64) -> (f64, f64)> = Box::new(move |x: f64| {
                        let s = (x - x0) / (x1 - x0);
                        (x, v0 * (1.0 - s) + v1 * s)
                    });
                    (x0, x1, f)
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        match self {
            Density::Semicircle { center, radius, weight } => {
                if !(center.is_finite() && *radius > 0.0 && radius.is_finite()) {
                    return bad(format!("semicircle needs finite center and radius > 0, got ({center}, {radius})"));
                }
                if !(*weight > 0.0) {
                    return bad(format!("semicircle weight must be positive, got {weight}"));
                }
            }
            Density::Arcsine { a, b, weight } | Density::Uniform { a, b, weight } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("interval [{a}, {b}] is empty or not finite"));
                }
                if !(*weight > 0.0) {
                    return bad(format!("piece weight must be positive, got {weight}"));
                }
            }
            Density::Table { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return bad("table needs ≥ 2 nodes and one value per node".into());
                }
                if nodes.windows(2).any(|w| !(w[0] < w[1])) || nodes.iter().any(|x| !x.is_finite()) {
                    return bad("table nodes must be finite and strictly increasing".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("table values must be finite and nonnegative".into());
                }
                if !(self.weight() > 0.0) {
                    return bad("table density integrates to zero".into());
                }
            }
        }
        Ok(())
    }
}

fn segment_index(nodes: &[f64], x: f64) -> usize {
    match nodes.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(k) => k.min(nodes.len() - 2),
        Err(k) => k.saturating_sub(1).min(nodes.len() - 2),
    }
}

/// Absolutely continuous part: disjoint pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContinuousPart {
    pub pieces: Vec<Density>,
}

/// Wire form of a measure (the JSON input format).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub continuous: Vec<Density>,
    pub support: [f64; 2],
}

/// A compactly supported probability measure on ℝ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    continuous: Option<ContinuousPart>,
    support: (f64, f64),
}

impl TryFrom<MeasureSpec> for SpectralMeasure {
    type Error = Error;
    fn try_from(spec: MeasureSpec) -> Result<Self> {
        SpectralMeasure::new(spec.atoms, spec.continuous, (spec.support[0], spec.support[1]))
    }
}

impl From<SpectralMeasure> for MeasureSpec {
    fn from(m: SpectralMeasure) -> Self {
        MeasureSpec {
            atoms: m.atoms,
            continuous: m.continuous.map(|c| c.pieces).unwrap_or_default(),
            support: [m.support.0, m.support.1],
        }
    }
}

impl SpectralMeasure {
    pub fn new(mut atoms: Vec<Atom>, pieces: Vec<Density>, support: (f64, f64)) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("support bounds ({lo}, {hi}) are not a finite interval"));
        }
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        for a in &atoms {
            if !(a.m > 0.0 && a.m.is_finite() && a.x.is_finite()) {
                return bad(format!("atom at {} has mass {}", a.x, a.m));
            }
            if a.x < lo || a.x > hi {
                return bad(format!("atom at {} outside support [{lo}, {hi}]", a.x));
            }
        }
        if atoms.windows(2).any(|w| w[0].x == w[1].x) {
            return bad("atom locations must be distinct".into());
        }
        let mut spans = Vec::with_capacity(pieces.len());
        for p in &pieces {
            p.validate()?;
            let (a, b) = p.interval();
            if a < lo - 1e-12 || b > hi + 1e-12 {
                return bad(format!("piece on [{a}, {b}] leaves support [{lo}, {hi}]"));
            }
            spans.push((a, b));
        }
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return bad("continuous pieces overlap".into());
        }
        let total: f64 = atoms.iter().map(|a| a.m).sum::<f64>() + pieces.iter().map(Density::weight).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return bad(format!("total mass is {total}, expected 1"));
        }
        let continuous = if pieces.is_empty() { None } else { Some(ContinuousPart { pieces }) };
        Ok(SpectralMeasure { atoms, continuous, support })
    }

    pub fn dirac(x: f64) -> Self {
        SpectralMeasure { atoms: vec![Atom { x, m: 1.0 }], continuous: None, support: (x, x) }
    }

    /// Purely atomic measure from (location, mass) pairs.
    pub fn atomic(pairs: &[(f64, f64)]) -> Result<Self> {
        let atoms: Vec<Atom> = pairs.iter().map(|&(x, m)| Atom { x, m }).collect();
        let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        Self::new(atoms, Vec::new(), (lo, hi))
    }

    pub fn semicircle(center: f64, radius: f64) -> Result<Self> {
        Self::new(
            Vec::new(),
            vec![Density::Semicircle { center, radius, weight: 1.0 }],
            (center - radius, center + radius),
        )
    }

    pub fn arcsine(a: f64, b: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![Density::Arcsine { a, b, weight: 1.0 }], (a, b))
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![Density::Uniform { a, b, weight: 1.0 }], (a, b))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidMeasure(e.to_string()))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Density] {
        self.continuous.as_ref().map_or(&[], |c| &c.pieces)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// max(|lo|, |hi|)
    pub fn radius(&self) -> f64 {
        self.support.0.abs().max(self.support.1.abs())
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().find(|a| a.x == x).map_or(0.0, |a| a.m)
    }

    /// μ((-∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.x <= x).map(|a| a.m).sum();
        atoms + self.pieces().iter().map(|p| p.cdf(x)).sum::<f64>()
    }

    /// Integrates `f` against μ: atoms exactly, the continuous part adaptively.
    /// Returns the integral and every sample used, atoms included (with their
    /// masses as weights), so callers can integrate related quantities on the
    /// same nodes.
    pub fn integrate<V, F>(&self, tol: f64, mut f: F) -> Result<(V, Vec<Sample<V>>)>
    where
        V: QuadValue + Clone,
        F: FnMut(f64) -> Result<V>,
    {
        let mut total: Option<V> = None;
        let add = |total: &mut Option<V>, w: f64, v: &V| match total {
            Some(t) => t.add_scaled(w, v),
            None => {
                let mut t = v.zeros_like();
                t.add_scaled(w, v);
                *total = Some(t);
            }
        };
        let mut samples = Vec::new();
        for a in &self.atoms {
            let v = f(a.x)?;
            if !v.all_finite() {
                return Err(Error::Quadrature(format!("non-finite integrand at atom {}", a.x)));
            }
            add(&mut total, a.m, &v);
            samples.push(Sample { t: a.x, weight: a.m, value: v });
        }
        for piece in self.pieces() {
            for (lo, hi, map) in piece.segments() {
                let seg = Segment { lo, hi, map: map.as_ref() };
                let (v, s) = quadrature::integrate_segment(&seg, tol, &mut f)?;
                add(&mut total, 1.0, &v);
                samples.extend(s);
            }
        }
        Ok((total.expect("a probability measure has mass"), samples))
    }

    /// Fixed (non-adaptive) nodes for the continuous part: `panels` 64-point
    /// panels per segment, as (t, weight).
    pub fn continuous_nodes(&self, panels: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for piece in self.pieces() {
            for (lo, hi, map) in piece.segments() {
                out.extend(quadrature::fixed_samples(&Segment { lo, hi, map: map.as_ref() }, panels));
            }
        }
        out
    }

    /// ∫ t^k dμ(t)
    pub fn moment(&self, k: i32) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.m * a.x.powi(k)).sum();
        let cont: f64 = self.continuous_nodes(4).iter().map(|(t, w)| w * t.powi(k)).sum();
        atoms + cont
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Scalar Cauchy transform G(z) = ∫ dμ(t)/(z − t), Im z > 0.
    pub fn cauchy(&self, z: c64) -> Result<c64> {
        if !(z.im > 0.0) {
            return Err(Error::NotInUpperHalfPlane { min_imag: z.im });
        }
        let (g, _) = self.integrate(quadrature::DEFAULT_TOL, |t| Ok((z - t).inv()))?;
        Ok(g)
    }

    /// Reciprocal Cauchy transform F = 1/G.
    pub fn reciprocal_cauchy(&self, z: c64) -> Result<c64> {
        let g = self.cauchy(z)?;
        if g.norm() == 0.0 || !g.all_finite() {
            return Err(Error::Singular(format!("G({z}) vanished")));
        }
        Ok(g.inv())
    }

    /// Inverse CDF at probability `p`: inf{x : μ((-∞, x]) ≥ p}.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.support;
        if self.cdf(lo) >= p {
            return lo;
        }
        if self.continuous.is_none() {
            let mut acc = 0.0;
            for a in &self.atoms {
                acc += a.m;
                if acc >= p {
                    return a.x;
                }
            }
            return self.atoms.last().map_or(hi, |a| a.x);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // a jump inside the final bracket is an atom; report it exactly
        self.atoms.iter().find(|a| a.x > lo && a.x <= hi).map_or(hi, |a| a.x)
    }

    /// Deterministic N-point discretization: entry i is the ((i − ½)/N)-quantile.
    pub fn quantiles(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|i| self.quantile((i as f64 - 0.5) / n as f64)).collect()
    }
}

/// Scalar Cauchy transform, free-function form.
pub fn cauchy_scalar(mu: &SpectralMeasure, z: c64) -> Result<c64> {
    mu.cauchy(z)
}

/// Reciprocal Cauchy transform, free-function form.
pub fn f_scalar(mu: &SpectralMeasure, z: c64) -> Result<c64> {
    mu.reciprocal_cauchy(z)
}

/// Closed-form Cauchy transform of semicircle(c, r), principal Nevanlinna branch.
pub fn semicircle_cauchy(center: f64, radius: f64, z: c64) -> c64 {
    let w = z - center;
    let r2 = radius * radius;
    // sqrt(w-r)·sqrt(w+r) has the branch cut on [-r, r] and behaves like w at ∞
    let root = (w - radius).sqrt() * (w + radius).sqrt();
    (w - root) * (2.0 / r2)
}

/// Closed-form Cauchy transform of the arcsine law on [a, b].
pub fn arcsine_cauchy(a: f64, b: f64, z: c64) -> c64 {
    ((z - a).sqrt() * (z - b).sqrt()).inv()
}
