//! Adaptive Gauss–Legendre integration over parameterized segments.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use faer::Mat;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_DEPTH: usize = 48;
/// Cap on integrand evaluations per segment.
const MAX_EVALS: usize = 400_000;

fn rule(order: usize) -> &'static [(f64, f64)] {
    static R64: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static R16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let build = |n: usize| {
        GaussLegendre::new(NonZeroUsize::new(n).expect("nonzero order"))
            .as_node_weight_pairs()
            .to_vec()
    };
    match order {
        64 => R64.get_or_init(|| build(64)),
        16 => R16.get_or_init(|| build(16)),
        _ => panic!("unsupported Gauss-Legendre order {order}"),
    }
}

/// Values that can be accumulated by the integrator.
pub trait QuadValue: Sized {
    fn zeros_like(&self) -> Self;
    fn add_scaled(&mut self, w: f64, x: &Self);
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
    fn all_finite(&self) -> bool;
}

impl QuadValue for c64 {
    fn zeros_like(&self) -> Self {
        c64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += x * w;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn all_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl QuadValue for CMat {
    fn zeros_like(&self) -> Self {
        Mat::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, w: f64, x: &Self) {
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                self[(i, j)] += x[(i, j)] * w;
            }
        }
    }
    fn distance(&self, other: &Self) -> f64 {
        crate::linalg::max_abs_diff(self.as_ref(), other.as_ref())
    }
    fn magnitude(&self) -> f64 {
        self.norm_max()
    }
    fn all_finite(&self) -> bool {
        crate::linalg::is_finite(self.as_ref())
    }
}

/// A quadrature sample: location `t` on the real line, weight (density and
/// Jacobian included) and the integrand value there.
#[derive(Clone, Debug)]
pub struct Sample<V> {
    pub t: f64,
    pub weight: f64,
    pub value: V,
}

/// Segment of a continuous piece in its own parameter `u`, with a map
/// `u ↦ (t, weight density)`.
pub(crate) struct Segment<'a> {
    pub lo: f64,
    pub hi: f64,
    pub map: &'a dyn Fn(f64) -> (f64, f64),
}

struct Panel<V> {
    lo: f64,
    hi: f64,
    sum: V,
    /// Σ |weight|·|value|, the scale of rounding error in `sum`
    abs: f64,
    samples: Vec<Sample<V>>,
}

fn panel<V: QuadValue + Clone>(
    seg: &Segment<'_>,
    lo: f64,
    hi: f64,
    order: usize,
    f: &mut dyn FnMut(f64) -> Result<V>,
) -> Result<Panel<V>> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut samples = Vec::with_capacity(order);
    let mut sum: Option<V> = None;
    let mut abs = 0.0;
    for &(x, w) in rule(order) {
        let u = mid + half * x;
        let (t, dens) = (seg.map)(u);
        let weight = w * half * dens;
        let value = f(t)?;
        if !value.all_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand at t = {t}")));
        }
        match sum.as_mut() {
            Some(s) => s.add_scaled(weight, &value),
            None => {
                let mut s = value.zeros_like();
                s.add_scaled(weight, &value);
                sum = Some(s);
            }
        }
        abs += weight.abs() * value.magnitude();
        samples.push(Sample { t, weight, value });
    }
    Ok(Panel { lo, hi, sum: sum.expect("rule has nodes"), abs, samples })
}

/// Integrates `f` over a segment, bisecting panels until successive
/// refinements agree to `tol` (relative to the segment integral).
pub(crate) fn integrate_segment<V: QuadValue + Clone>(
    seg: &Segment<'_>,
    tol: f64,
    f: &mut dyn FnMut(f64) -> Result<V>,
) -> Result<(V, Vec<Sample<V>>)> {
    let order = DEFAULT_ORDER;
    let root = panel(seg, seg.lo, seg.hi, order, f)?;
    let len = seg.hi - seg.lo;
    // Running estimate of the whole integral; the root panel alone can miss a
    // narrow peak and badly understate the scale.
    let mut estimate = root.sum.clone();
    let mut scale = root.sum.magnitude().max(1e-300);
    let mut total = root.sum.zeros_like();
    let mut accepted = Vec::new();
    let mut stack = vec![(root, 0usize)];
    let mut evals = order;
    while let Some((p, depth)) = stack.pop() {
        let mid = 0.5 * (p.lo + p.hi);
        let left = panel(seg, p.lo, mid, order, f)?;
        let right = panel(seg, mid, p.hi, order, f)?;
        evals += 2 * order;
        if evals > MAX_EVALS {
            return Err(Error::Quadrature(format!("no convergence after {evals} integrand evaluations")));
        }
        let mut refined = left.sum.clone();
        refined.add_scaled(1.0, &right.sum);
        let diff = refined.distance(&p.sum);
        estimate.add_scaled(1.0, &refined);
        estimate.add_scaled(-1.0, &p.sum);
        scale = scale.max(estimate.magnitude());
        let local = tol * scale * ((p.hi - p.lo) / len).max(1e-3);
        let noise = 64.0 * f64::EPSILON * (left.abs + right.abs);
        if diff <= local || diff <= noise || depth >= MAX_DEPTH {
            total.add_scaled(1.0, &refined);
            accepted.extend(left.samples);
            accepted.extend(right.samples);
        } else {
            stack.push((left, depth + 1));
            stack.push((right, depth + 1));
        }
    }
    Ok((total, accepted))
}

/// Fixed 64-point rule on a segment, without adaptivity.
pub(crate) fn fixed_samples(seg: &Segment<'_>, panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels * DEFAULT_ORDER);
    let width = (seg.hi - seg.lo) / panels as f64;
    for k in 0..panels {
        let lo = seg.lo + k as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        for &(x, w) in rule(DEFAULT_ORDER) {
            let (t, dens) = (seg.map)(mid + half * x);
            out.push((t, w * half * dens));
        }
    }
    out
}

/// 16-point nodes on [-1, 1]; used where a cheap rule is enough.
pub fn gauss_legendre_16() -> &'static [(f64, f64)] {
    rule(16)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_function() {
        let map = |u: f64| (u, 1.0);
        let seg = Segment { lo: 0.0, hi: 1.0, map: &map };
        let (v, _) = integrate_segment(&seg, 1e-13, &mut |t| Ok(c64::new(t.exp(), 0.0))).unwrap();
        assert!((v.re - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn resolves_a_narrow_peak() {
        // ∫_{-1}^{1} dt / (t - i y) = 2i·atan(1/y)
        let y = 1e-6;
        let map = |u: f64| (u, 1.0);
        let seg = Segment { lo: -1.0, hi: 1.0, map: &map };
        let (v, samples) =
            integrate_segment(&seg, 1e-12, &mut |t| Ok(c64::new(t, -y).inv())).unwrap();
        let exact = c64::new(0.0, 2.0 * (1.0 / y).atan());
        assert!((v - exact).norm() < 1e-9 * exact.norm(), "{v} vs {exact}");
        assert!(samples.len() > 128);
    }
}
