//! Polynomials in two noncommuting selfadjoint indeterminates `Z1`, `Z2`.
//!
//! Terms are kept in a map keyed by word under graded-lexicographic order, so
//! equal polynomials have identical representations. Coefficients are generic:
//! [`NCPoly`] uses double-precision complex numbers, and [`ExactPoly`] uses
//! complex rationals for identities that must hold exactly.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use faer::{Mat, MatRef};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Z1,
    Z2,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::Z1 => "Z1",
            Letter::Z2 => "Z2",
        })
    }
}

/// A word over {Z1, Z2}; ordered by length, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Coefficient ring of a polynomial.
pub trait Coeff:
    Clone + PartialEq + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn conj(&self) -> Self;
}

impl Coeff for c64 {
    fn zero() -> Self {
        c64::new(0.0, 0.0)
    }
    fn one() -> Self {
        c64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
}

pub type ExactComplex = Complex<BigRational>;

impl Coeff for ExactComplex {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
}

/// Exact rational value of a finite double (every double is dyadic).
pub fn exact(c: c64) -> Result<ExactComplex> {
    let conv = |x: f64| {
        BigRational::from_float(x).ok_or_else(|| Error::InvalidPolynomial(format!("non-finite coefficient {x}")))
    };
    Ok(Complex::new(conv(c.re)?, conv(c.im)?))
}

/// A noncommutative polynomial with coefficients in `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C: Coeff> {
    terms: BTreeMap<Word, C>,
}

pub type NCPoly = Poly<c64>;
pub type ExactPoly = Poly<ExactComplex>;

impl<C: Coeff> Poly<C> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(c, Word::empty())
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn var(l: Letter) -> Self {
        Self::monomial(C::one(), Word(vec![l]))
    }

    pub fn monomial(c: C, w: Word) -> Self {
        let mut p = Self::zero();
        p.add_term(w, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (C, Word)>) -> Self {
        let mut p = Self::zero();
        for (c, w) in terms {
            p.add_term(w, c);
        }
        p
    }

    fn add_term(&mut self, w: Word, c: C) {
        let sum = match self.terms.remove(&w) {
            Some(old) => old + c,
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(w, sum);
        }
    }

    /// Terms as (coefficient, word) in graded-lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&C, &Word)> {
        self.terms.iter().map(|(w, c)| (c, w))
    }

    pub fn coeff(&self, w: &Word) -> C {
        self.terms.get(w).cloned().unwrap_or_else(C::zero)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest word length; 0 for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().next_back().map_or(0, Word::len)
    }

    pub fn scale(&self, s: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (s.clone() * c.clone(), w.clone())))
    }

    /// Conjugates coefficients and reverses words.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (c.conj(), w.reversed())))
    }

    /// p* p
    pub fn star_square(&self) -> Self {
        self.adjoint() * self.clone()
    }

    /// Part of degree ≤ 1.
    pub fn affine_part(&self) -> Self {
        Self::from_terms(self.terms.iter().filter(|(w, _)| w.len() <= 1).map(|(w, c)| (c.clone(), w.clone())))
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        Poly::from_terms(self.terms.iter().map(|(w, c)| (f(c), w.clone())))
    }
}

impl NCPoly {
    /// Selfadjointness up to rounding in the coefficients.
    pub fn is_selfadjoint(&self) -> bool {
        let scale = self.terms.values().fold(0.0f64, |m, c| m.max(c.norm()));
        let tol = 64.0 * f64::EPSILON * scale;
        let adj = self.adjoint();
        let words: std::collections::BTreeSet<&Word> = self.terms.keys().chain(adj.terms.keys()).collect();
        let ok = words.into_iter().all(|w| (self.coeff(w) - adj.coeff(w)).norm() <= tol);
        ok
    }

    pub fn to_exact(&self) -> Result<ExactPoly> {
        let mut p = ExactPoly::zero();
        for (w, c) in &self.terms {
            p.add_term(w.clone(), exact(*c)?);
        }
        Ok(p)
    }

    /// Evaluates at a pair of square matrices of equal size.
    pub fn eval_matrices(&self, a1: MatRef<'_, c64>, a2: MatRef<'_, c64>) -> Result<CMat> {
        let n = a1.nrows();
        if a1.ncols() != n || a2.nrows() != n || a2.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected two equal square matrices, got {}x{} and {}x{}",
                a1.nrows(),
                a1.ncols(),
                a2.nrows(),
                a2.ncols()
            )));
        }
        let mut out: CMat = Mat::zeros(n, n);
        // words sharing a prefix reuse its product
        let mut cache: BTreeMap<Vec<Letter>, CMat> = BTreeMap::new();
        for (w, c) in &self.terms {
            if w.is_empty() {
                for i in 0..n {
                    out[(i, i)] += *c;
                }
                continue;
            }
            let known = (1..=w.len()).rev().find(|&k| cache.contains_key(&w.0[..k]));
            let (mut acc, start) = match known {
                Some(k) => (cache[&w.0[..k]].clone(), k),
                None => (letter_matrix(w.0[0], a1, a2).to_owned(), 1),
            };
            for k in start..w.len() {
                acc = &acc * letter_matrix(w.0[k], a1, a2);
                cache.insert(w.0[..=k].to_vec(), acc.clone());
            }
            out += faer::Scale(*c) * &acc;
        }
        Ok(out)
    }

    /// Evaluates at a pair of scalars.
    pub fn eval_scalar(&self, z1: c64, z2: c64) -> c64 {
        self.terms
            .iter()
            .map(|(w, c)| {
                w.0.iter().fold(*c, |acc, l| {
                    acc * match l {
                        Letter::Z1 => z1,
                        Letter::Z2 => z2,
                    }
                })
            })
            .sum()
    }

    /// Parses the text syntax, e.g. `Z1*Z2 + Z2*Z1 - 0.5` or `(2+i)*Z1 + (2-i)*Z1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let poly = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(poly)
    }
}

fn letter_matrix<'a>(l: Letter, a1: MatRef<'a, c64>, a2: MatRef<'a, c64>) -> MatRef<'a, c64> {
    match l {
        Letter::Z1 => a1,
        Letter::Z2 => a2,
    }
}

impl<C: Coeff> Add for Poly<C> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
        self
    }
}

impl<C: Coeff> Neg for Poly<C> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_terms(self.terms.into_iter().map(|(w, c)| (-c, w)))
    }
}

impl<C: Coeff> Sub for Poly<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<C: Coeff> Mul for Poly<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (u, a) in &self.terms {
            for (v, b) in &rhs.terms {
                out.add_term(u.concat(v), a.clone() * b.clone());
            }
        }
        out
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn fmt_coeff(c: c64) -> String {
    if c.im == 0.0 {
        fmt_real(c.re)
    } else if c.re == 0.0 {
        format!("{}*i", fmt_real(c.im))
    } else if c.im < 0.0 {
        format!("({} - {}*i)", fmt_real(c.re), fmt_real(-c.im))
    } else {
        format!("({} + {}*i)", fmt_real(c.re), fmt_real(c.im))
    }
}

impl fmt::Display for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            // pull a negative real or imaginary sign out into the joining operator
            let neg = (c.im == 0.0 && c.re < 0.0) || (c.re == 0.0 && c.im < 0.0);
            let mag = if neg { -*c } else { *c };
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let unit = mag.re == 1.0 && mag.im == 0.0;
            if w.is_empty() {
                f.write_str(&fmt_coeff(mag))?;
            } else if unit {
                write!(f, "{w}")?;
            } else {
                write!(f, "{}*{w}", fmt_coeff(mag))?;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for NCPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NCPoly::parse(s)
    }
}

impl fmt::Display for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({} + {}*i)", c.re, c.im)?;
            if !w.is_empty() {
                write!(f, "*{w}")?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    // expr := ['+'|'-'] term (('+'|'-') term)*
    fn expr(&mut self) -> Result<NCPoly> {
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                sign = -1.0;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let mut acc = self.term()?.scale(&c64::new(sign, 0.0));
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := factor (['*'] factor)*
    fn term(&mut self) -> Result<NCPoly> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc * self.factor()?;
                }
                Some(c) if c == b'(' || c == b'Z' || c == b'i' || c.is_ascii_digit() || c == b'.' => {
                    acc = acc * self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    // factor := atom ['^' integer]
    fn factor(&mut self) -> Result<NCPoly> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let k: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| self.error("expected a nonnegative integer exponent"))?;
            let mut out = NCPoly::one();
            for _ in 0..k {
                out = out * base.clone();
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<NCPoly> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'Z') => {
                self.pos += 1;
                match self.src.get(self.pos) {
                    Some(b'1') => {
                        self.pos += 1;
                        Ok(NCPoly::var(Letter::Z1))
                    }
                    Some(b'2') => {
                        self.pos += 1;
                        Ok(NCPoly::var(Letter::Z2))
                    }
                    _ => Err(self.error("expected Z1 or Z2")),
                }
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(NCPoly::constant(c64::new(0.0, 1.0)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                let bytes = self.src;
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut e = end + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        while e < bytes.len() && bytes[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let text = std::str::from_utf8(&bytes[start..end]).expect("ascii");
                let v: f64 = text.parse().map_err(|_| self.error("malformed number"))?;
                self.pos = end;
                Ok(NCPoly::constant(c64::new(v, 0.0)))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Matrix whose entries are polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix<C: Coeff> {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Poly<C>>,
}

impl<C: Coeff> PolyMatrix<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PolyMatrix { rows, cols, entries: vec![Poly::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Poly::one());
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly<C> {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly<C>) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(Poly::degree).max().unwrap_or(0)
    }

    /// Entrywise adjoint of the transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).adjoint());
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        PolyMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|p| -p.clone()).collect() }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = Poly::zero();
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), rhs.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc + a.clone() * b.clone();
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&Poly<C>) -> Poly<D>) -> PolyMatrix<D> {
        PolyMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(f).collect() }
    }

    pub fn entries(&self) -> &[Poly<C>] {
        &self.entries
    }
}

impl PolyMatrix<c64> {
    pub fn to_exact(&self) -> Result<PolyMatrix<ExactComplex>> {
        let entries = self.entries.iter().map(NCPoly::to_exact).collect::<Result<Vec<_>>>()?;
        Ok(PolyMatrix { rows: self.rows, cols: self.cols, entries })
    }

    /// Rows joined by `;`, entries by `,`, e.g. `[Z1, Z2; 1, 0]`.
    pub fn to_text(&self) -> String {
        let rows: Vec<String> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect::<Vec<_>>().join(", "))
            .collect();
        format!("[{}]", rows.join("; "))
    }

    /// Inverse of [`PolyMatrix::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| Error::Parse { pos: 0, msg: "matrix must be enclosed in [ ]".into() })?;
        let rows: Vec<Vec<NCPoly>> = inner
            .split(';')
            .map(|r| r.split(',').map(NCPoly::parse).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse { pos: 0, msg: "ragged matrix rows".into() });
        }
        Ok(PolyMatrix { rows: rows.len(), cols, entries: rows.into_iter().flatten().collect() })
    }
}

/// Integer part of an exact rational, if it is an integer.
pub fn exact_integer(q: &BigRational) -> Option<BigInt> {
    q.is_integer().then(|| q.to_integer())
}
