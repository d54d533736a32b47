//! Rounded interval arithmetic on binary64.
//!
//! Each elementary operation is evaluated once in round-to-nearest and the
//! result is pushed outward by one representable step on each side, unless an
//! error-free transformation proves the rounded value exact. The correctly
//! rounded-down result of an IEEE operation is either the round-to-nearest
//! value or its lower neighbour, so one step of widening always encloses the
//! real result. No FPU rounding-mode state is touched.
//!
//! [`OutwardRounding`] is the hook for alternative bound providers;
//! [`ResidualRounding`] uses the sign of the exact residual to return the
//! directed-rounded bounds themselves.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::fp::{raw_step, Direction};

/// Below this magnitude an FMA residual may itself be rounded, so the
/// error-free tricks are not trusted.
const RESIDUAL_FLOOR: f64 = 1.5717277847026288e-292; // 2^-968

/// Supplies floating-point bounds `(lo, hi)` with `lo <= op(a, b) <= hi` in
/// real arithmetic, for finite or infinite operands (never NaN).
pub trait OutwardRounding {
    fn add(a: f64, b: f64) -> (f64, f64);
    fn mul(a: f64, b: f64) -> (f64, f64);
    fn div(a: f64, b: f64) -> (f64, f64);
    fn sqrt(a: f64) -> (f64, f64);
}

/// Default kernel: round-to-nearest plus one step outward.
#[derive(Clone, Copy, Debug, Default)]
pub struct UlpWidening;

/// Tight kernel: returns the round-down/round-up results by inspecting the
/// exact residual. Falls back to widening where the residual is not exact.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualRounding;

#[inline]
fn widen(v: f64) -> (f64, f64) {
    (raw_step(v, Direction::Down), raw_step(v, Direction::Up))
}

#[inline]
fn point(v: f64) -> (f64, f64) {
    (v, v)
}

/// `v` is the nearest rounding of a value whose offset from `v` has sign
/// `residual`. Picks the bracketing pair.
#[inline]
fn directed(v: f64, residual: f64) -> (f64, f64) {
    if residual == 0.0 {
        (v, v)
    } else if residual > 0.0 {
        (v, raw_step(v, Direction::Up))
    } else {
        (raw_step(v, Direction::Down), v)
    }
}

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

/// Shared logic for both kernels. `None` means the result overflowed or an
/// operand was infinite and the caller should use the overflow bracket.
#[inline]
fn add_residual(a: f64, b: f64) -> (f64, Option<f64>) {
    let s = a + b;
    if !s.is_finite() || !a.is_finite() || !b.is_finite() || s.abs() > 1e307 {
        return (s, None);
    }
    (s, Some(two_sum_err(a, b, s)))
}

#[inline]
fn overflow_bracket(v: f64, exact_operands: bool) -> (f64, f64) {
    if exact_operands {
        point(v)
    } else {
        widen(v)
    }
}

#[inline]
fn mul_exact_product(a: f64, b: f64) -> f64 {
    // 0 * inf inside interval bounds is the limit 0.
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[inline]
fn mul_residual(a: f64, b: f64) -> (f64, Option<f64>) {
    let p = mul_exact_product(a, b);
    if a == 0.0 || b == 0.0 {
        return (p, Some(0.0));
    }
    if !p.is_finite() || p.abs() < RESIDUAL_FLOOR {
        return (p, None);
    }
    (p, Some(a.mul_add(b, -p)))
}

#[inline]
fn div_residual(a: f64, b: f64) -> (f64, Option<f64>) {
    if a.is_infinite() && b.is_infinite() {
        return (f64::NAN, None);
    }
    if a == 0.0 || b.is_infinite() {
        return (0.0 * a.signum() * b.signum(), Some(0.0));
    }
    let q = a / b;
    if !q.is_finite() || !a.is_finite() || q.abs() < RESIDUAL_FLOOR || a.abs() < RESIDUAL_FLOOR {
        return (q, None);
    }
    // a = q*b + r exactly; a/b - q has the sign of r/b.
    let r = (-q).mul_add(b, a);
    (q, Some(if b > 0.0 { r } else { -r }))
}

#[inline]
fn sqrt_residual(a: f64) -> (f64, Option<f64>) {
    let s = a.sqrt();
    if a == 0.0 {
        return (0.0, Some(0.0));
    }
    if !a.is_finite() || a < RESIDUAL_FLOOR {
        return (s, None);
    }
    // a - s^2 > 0  <=>  sqrt(a) > s
    (s, Some((-s).mul_add(s, a)))
}

impl OutwardRounding for UlpWidening {
    fn add(a: f64, b: f64) -> (f64, f64) {
        match add_residual(a, b) {
            (s, Some(e)) if e == 0.0 => point(s),
            (s, Some(_)) => widen(s),
            (s, None) => overflow_bracket(s, a.is_infinite() || b.is_infinite()),
        }
    }

    fn mul(a: f64, b: f64) -> (f64, f64) {
        match mul_residual(a, b) {
            (p, Some(e)) if e == 0.0 => point(p),
            (p, Some(_)) => widen(p),
            (p, None) => overflow_bracket(p, a.is_infinite() || b.is_infinite()),
        }
    }

    fn div(a: f64, b: f64) -> (f64, f64) {
        match div_residual(a, b) {
            (q, Some(e)) if e == 0.0 => point(q),
            (q, Some(_)) => widen(q),
            (q, None) => overflow_bracket(q, a.is_infinite()),
        }
    }

    fn sqrt(a: f64) -> (f64, f64) {
        match sqrt_residual(a) {
            (s, Some(e)) if e == 0.0 => point(s),
            (s, Some(_)) => widen(s),
            (s, None) => overflow_bracket(s, a.is_infinite()),
        }
    }
}

impl OutwardRounding for ResidualRounding {
    fn add(a: f64, b: f64) -> (f64, f64) {
        match add_residual(a, b) {
            (s, Some(e)) => directed(s, e),
            (s, None) => overflow_bracket(s, a.is_infinite() || b.is_infinite()),
        }
    }

    fn mul(a: f64, b: f64) -> (f64, f64) {
        match mul_residual(a, b) {
            (p, Some(e)) => directed(p, e),
            (p, None) => overflow_bracket(p, a.is_infinite() || b.is_infinite()),
        }
    }

    fn div(a: f64, b: f64) -> (f64, f64) {
        match div_residual(a, b) {
            (q, Some(e)) => directed(q, e),
            (q, None) => overflow_bracket(q, a.is_infinite()),
        }
    }

    fn sqrt(a: f64) -> (f64, f64) {
        match sqrt_residual(a) {
            (s, Some(e)) => directed(s, e),
            (s, None) => overflow_bracket(s, a.is_infinite()),
        }
    }
}

/// A closed interval `[lo, hi]` of reals with float endpoints.
///
/// Infinite endpoints only appear when an operation overflowed.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Interval> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::DomainError(format!("NaN interval bound [{lo}, {hi}]")));
        }
        if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidBracket { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// The singleton `[c, c]`. Panics on a non-finite `c`.
    pub fn point(c: f64) -> Interval {
        assert!(c.is_finite(), "singleton interval needs a finite value, got {c}");
        Interval { lo: c, hi: c }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// `self ⊆ other`
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    pub fn add_with<R: OutwardRounding>(self, rhs: Interval) -> Interval {
        Interval { lo: R::add(self.lo, rhs.lo).0, hi: R::add(self.hi, rhs.hi).1 }
    }

    pub fn sub_with<R: OutwardRounding>(self, rhs: Interval) -> Interval {
        Interval { lo: R::add(self.lo, -rhs.hi).0, hi: R::add(self.hi, -rhs.lo).1 }
    }

    pub fn mul_with<R: OutwardRounding>(self, rhs: Interval) -> Interval {
        let corners = [
            R::mul(self.lo, rhs.lo),
            R::mul(self.lo, rhs.hi),
            R::mul(self.hi, rhs.lo),
            R::mul(self.hi, rhs.hi),
        ];
        bounds_of(&corners)
    }

    pub fn square_with<R: OutwardRounding>(self) -> Interval {
        if self.contains_zero() {
            let m = self.lo.abs().max(self.hi.abs());
            Interval { lo: 0.0, hi: R::mul(m, m).1 }
        } else {
            let (a, b) = if self.lo > 0.0 { (self.lo, self.hi) } else { (-self.hi, -self.lo) };
            Interval { lo: R::mul(a, a).0.max(0.0), hi: R::mul(b, b).1 }
        }
    }

    pub fn div_with<R: OutwardRounding>(self, rhs: Interval) -> Result<Interval> {
        if rhs.contains_zero() {
            return Err(Error::DivisorSpansZero { lo: rhs.lo, hi: rhs.hi });
        }
        let corners = [
            R::div(self.lo, rhs.lo),
            R::div(self.lo, rhs.hi),
            R::div(self.hi, rhs.lo),
            R::div(self.hi, rhs.hi),
        ];
        if corners.iter().any(|c| c.0.is_nan() || c.1.is_nan()) {
            // inf/inf corner: give up on tightness
            return Ok(Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY });
        }
        Ok(bounds_of(&corners))
    }

    pub fn sqrt_with<R: OutwardRounding>(self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::NegativeOperand(self.lo));
        }
        Ok(Interval { lo: R::sqrt(self.lo).0.max(0.0), hi: R::sqrt(self.hi).1 })
    }

    pub fn div(self, rhs: Interval) -> Result<Interval> {
        self.div_with::<UlpWidening>(rhs)
    }

    pub fn sqrt(self) -> Result<Interval> {
        self.sqrt_with::<UlpWidening>()
    }

    pub fn square(self) -> Interval {
        self.square_with::<UlpWidening>()
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval { lo: 0.0, hi: (-self.lo).max(self.hi) }
        }
    }
}

fn bounds_of(corners: &[(f64, f64)]) -> Interval {
    let lo = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let hi = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    Interval { lo, hi }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        self.add_with::<UlpWidening>(rhs)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self.sub_with::<UlpWidening>(rhs)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        self.mul_with::<UlpWidening>(rhs)
    }
}

impl From<f64> for Interval {
    fn from(c: f64) -> Interval {
        Interval::point(c)
    }
}

/// Enclosure of `Σ a_i b_i`, accumulated left to right.
pub fn dot_with<R: OutwardRounding>(a: &[Interval], b: &[Interval]) -> Result<Interval> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let mut terms = a.iter().zip(b).map(|(x, y)| x.mul_with::<R>(*y));
    let Some(first) = terms.next() else {
        return Ok(Interval::point(0.0));
    };
    Ok(terms.fold(first, |acc, t| acc.add_with::<R>(t)))
}

/// Enclosure of the Euclidean norm `sqrt(Σ a_i²)`.
pub fn norm2_with<R: OutwardRounding>(a: &[Interval]) -> Result<Interval> {
    let mut squares = a.iter().map(|x| x.square_with::<R>());
    let Some(first) = squares.next() else {
        return Ok(Interval::point(0.0));
    };
    let sum = squares.fold(first, |acc, t| acc.add_with::<R>(t));
    Interval { lo: sum.lo.max(0.0), hi: sum.hi }.sqrt_with::<R>()
}

pub fn dot(a: &[Interval], b: &[Interval]) -> Result<Interval> {
    dot_with::<UlpWidening>(a, b)
}

pub fn norm2(a: &[Interval]) -> Result<Interval> {
    norm2_with::<UlpWidening>(a)
}

/// Singleton intervals for each entry of a float vector.
pub fn points(v: &[f64]) -> Vec<Interval> {
    v.iter().map(|&c| Interval::point(c)).collect()
}
