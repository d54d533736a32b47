//! Exact dyadic-rational arithmetic used as a reference for float and
//! interval results. Every finite double is `m·2^e` with integer `m`, and
//! sums and products of such values stay dyadic, so comparisons below are
//! exact.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

pub mod interval_cases;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

#[derive(Clone, Debug)]
pub struct Dyadic {
    m: BigInt,
    e: i64,
}

impl Dyadic {
    pub fn zero() -> Dyadic {
        Dyadic { m: BigInt::zero(), e: 0 }
    }

    pub fn from_f64(v: f64) -> Dyadic {
        assert!(v.is_finite(), "dyadic from non-finite {v}");
        if v == 0.0 {
            return Dyadic::zero();
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        Dyadic { m: BigInt::from(mant) * sign, e }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { m: self.m.abs(), e: self.e }
    }

    pub fn square(&self) -> Dyadic {
        self * self
    }

    fn aligned(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
        let e = a.e.min(b.e);
        (&a.m << ((a.e - e) as usize), &b.m << ((b.e - e) as usize), e)
    }

    /// Sign of `self − other`.
    pub fn cmp_exact(&self, other: &Dyadic) -> Ordering {
        let (a, b, _) = Dyadic::aligned(self, other);
        a.cmp(&b)
    }

    pub fn le(&self, other: &Dyadic) -> bool {
        self.cmp_exact(other) != Ordering::Greater
    }

    pub fn le_f64(&self, v: f64) -> bool {
        if v == f64::INFINITY {
            return true;
        }
        if v == f64::NEG_INFINITY {
            return false;
        }
        self.le(&Dyadic::from_f64(v))
    }

    pub fn ge_f64(&self, v: f64) -> bool {
        if v == f64::NEG_INFINITY {
            return true;
        }
        if v == f64::INFINITY {
            return false;
        }
        Dyadic::from_f64(v).le(self)
    }

    /// `lo ≤ self ≤ hi`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.ge_f64(lo) && self.le_f64(hi)
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::aligned(self, rhs);
        Dyadic { m: a + b, e }
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::aligned(self, rhs);
        Dyadic { m: a - b, e }
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic { m: &self.m * &rhs.m, e: self.e + rhs.e }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { m: -&self.m, e: self.e }
    }
}

pub fn dot_exact(a: &[f64], b: &[f64]) -> Dyadic {
    a.iter().zip(b).fold(Dyadic::zero(), |acc, (&x, &y)| &acc + &(&Dyadic::from_f64(x) * &Dyadic::from_f64(y)))
}

pub fn sum_squares_exact(a: &[f64]) -> Dyadic {
    dot_exact(a, a)
}

/// `q ∈ [lo, hi]` for the real `q = num / den` with `den > 0`, checked by
/// cross-multiplication.
pub fn quotient_within(num: &Dyadic, den: &Dyadic, lo: f64, hi: f64) -> bool {
    assert!(!den.is_negative() && !den.is_zero());
    let lo_ok = lo == f64::NEG_INFINITY || (&Dyadic::from_f64(lo) * den).le(num);
    let hi_ok = hi == f64::INFINITY || num.le(&(&Dyadic::from_f64(hi) * den));
    lo_ok && hi_ok
}

/// `√s ∈ [lo, hi]` for `s ≥ 0`.
pub fn sqrt_within(s: &Dyadic, lo: f64, hi: f64) -> bool {
    let lo_ok = lo <= 0.0 || Dyadic::from_f64(lo).square().le(s);
    let hi_ok = hi == f64::INFINITY || (hi >= 0.0 && s.le(&Dyadic::from_f64(hi).square()));
    lo_ok && hi_ok
}

/// `|s| / √q ∈ [lo, hi]` for `q > 0`: the real certified radius with
/// `s = wᵀx + b` and `q = ‖w‖²`.
pub fn radius_within(s: &Dyadic, q: &Dyadic, lo: f64, hi: f64) -> bool {
    let s2 = s.square();
    let lo_ok = lo <= 0.0 || (&Dyadic::from_f64(lo).square() * q).le(&s2);
    let hi_ok = hi == f64::INFINITY || (hi >= 0.0 && s2.le(&(&Dyadic::from_f64(hi).square() * q)));
    lo_ok && hi_ok
}

/// Exact value of `|w·x + b|² ` and `‖w‖²` for a linear model.
pub fn linear_radius_parts(w: &[f64], b: f64, x: &[f64]) -> (Dyadic, Dyadic) {
    (&dot_exact(w, x) + &Dyadic::from_f64(b), sum_squares_exact(w))
}

#[test]
fn dyadic_basics() {
    let third = Dyadic::from_f64(1.0 / 3.0);
    let three = Dyadic::from_f64(3.0);
    // fl(1/3)·3 is not 1 exactly.
    assert_ne!((&third * &three).cmp_exact(&Dyadic::from_f64(1.0)), Ordering::Equal);
    assert!(Dyadic::from_f64(5e-324).ge_f64(0.0));
    assert!(Dyadic::from_f64(-0.0).is_zero());
    let s = &Dyadic::from_f64(0.1) + &Dyadic::from_f64(0.2);
    assert!(s.within(0.3, 0.30000000000000004));
    assert!(!s.within(0.3, 0.3));
}
