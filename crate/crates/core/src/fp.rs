//! ULP-level stepping on binary64 values.
//!
//! Everything here works on the raw bit pattern, so results are identical on
//! every platform regardless of the math library or FPU state.

use crate::error::{Error, Result};

/// Which neighbour to step to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// A request to move `count` representable values away from `value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloatStep {
    pub value: f64,
    pub direction: Direction,
    pub count: u32,
}

impl FloatStep {
    pub fn new(value: f64, direction: Direction, count: u32) -> Self {
        FloatStep { value, direction, count }
    }

    pub fn apply(&self) -> Result<f64> {
        step_n(self.value, self.direction, self.count)
    }
}

const SIGN: u64 = 1 << 63;

/// Adjacent float without any finiteness checks. Infinities saturate
/// (`+inf` up stays `+inf`, `+inf` down is `f64::MAX`); NaN passes through.
#[inline]
pub(crate) fn raw_step(x: f64, direction: Direction) -> f64 {
    if x.is_nan() {
        return x;
    }
    let bits = x.to_bits();
    let next = match direction {
        Direction::Up => {
            if x == f64::INFINITY {
                return x;
            }
            if x == 0.0 {
                1
            } else if bits & SIGN == 0 {
                bits + 1
            } else {
                bits - 1
            }
        }
        Direction::Down => {
            if x == f64::NEG_INFINITY {
                return x;
            }
            if x == 0.0 {
                SIGN | 1
            } else if bits & SIGN == 0 {
                bits - 1
            } else {
                bits + 1
            }
        }
    };
    f64::from_bits(next)
}

/// The next representable value above (`Up`) or below (`Down`) `x`.
///
/// Both zeros behave the same: stepping down from either gives the smallest
/// negative subnormal.
pub fn next_after(x: f64, direction: Direction) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFiniteInput(x));
    }
    let y = raw_step(x, direction);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::Overflow)
    }
}

/// `next_after` applied `n` times.
pub fn step_n(x: f64, direction: Direction, n: u32) -> Result<f64> {
    let mut y = x;
    if !y.is_finite() {
        return Err(Error::NonFiniteInput(y));
    }
    for _ in 0..n {
        y = next_after(y, direction)?;
    }
    Ok(y)
}

#[inline]
pub fn next_up(x: f64) -> Result<f64> {
    next_after(x, Direction::Up)
}

#[inline]
pub fn next_down(x: f64) -> Result<f64> {
    next_after(x, Direction::Down)
}

/// Size of the gap between `|x|` and the next float of larger magnitude.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if !a.is_finite() {
        return f64::NAN;
    }
    if a == f64::MAX {
        return a - raw_step(a, Direction::Down);
    }
    raw_step(a, Direction::Up) - a
}

/// Signed distance between two finite floats measured in representable steps.
pub fn ulp_distance(a: f64, b: f64) -> i128 {
    ordered_key(b) as i128 - ordered_key(a) as i128
}

/// Maps a float onto a signed integer line where adjacent floats differ by
/// one and both zeros coincide.
pub(crate) fn ordered_key(x: f64) -> i64 {
    let bits = x.to_bits();
    let mag = (bits & !SIGN) as i64;
    if bits & SIGN == 0 {
        mag
    } else {
        -mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Sign-magnitude integer view of a float, independent of `raw_step`.
    fn oracle_step(x: f64, dir: Direction) -> f64 {
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let mag = (bits << 1 >> 1) as i128;
        let signed = if neg { -mag } else { mag };
        let stepped = match dir {
            Direction::Up => signed + 1,
            Direction::Down => signed - 1,
        };
        if stepped >= 0 {
            f64::from_bits(stepped as u64)
        } else {
            f64::from_bits((1u64 << 63) | (-stepped) as u64)
        }
    }

    #[test]
    fn one_neighbours() {
        assert_eq!(next_after(1.0, Direction::Up).unwrap(), 1.0000000000000002);
        assert_eq!(next_after(1.0, Direction::Down).unwrap(), 0.9999999999999999);
        assert_eq!(step_n(1.0, Direction::Up, 2).unwrap(), 1.0000000000000004);
    }

    #[test]
    fn zero_and_subnormals() {
        assert_eq!(next_up(0.0).unwrap(), 5e-324);
        assert_eq!(next_up(-0.0).unwrap(), 5e-324);
        assert_eq!(next_down(0.0).unwrap(), -5e-324);
        assert_eq!(next_down(5e-324).unwrap(), 0.0);
        assert_eq!(next_up(-5e-324).unwrap().to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn errors() {
        assert!(matches!(next_up(f64::NAN), Err(Error::NonFiniteInput(_))));
        assert!(matches!(next_up(f64::INFINITY), Err(Error::NonFiniteInput(_))));
        assert_eq!(next_up(f64::MAX).unwrap_err(), Error::Overflow);
        assert_eq!(next_down(-f64::MAX).unwrap_err(), Error::Overflow);
        assert_eq!(step_n(f64::MAX, Direction::Down, 3).unwrap(), 1.7976931348623151e308);
    }

    #[test]
    fn inverse_steps() {
        let y = step_n(1.5, Direction::Down, 3).unwrap();
        assert_eq!(step_n(y, Direction::Up, 3).unwrap(), 1.5);
        assert_eq!(FloatStep::new(1.0, Direction::Up, 1).apply().unwrap(), next_up(1.0).unwrap());
    }

    #[test]
    fn ulp_sizes() {
        assert_eq!(ulp(1.0), f64::EPSILON);
        assert_eq!(ulp(0.0), 5e-324);
        assert_eq!(ulp_distance(1.0, 1.0000000000000004), 2);
        assert_eq!(ulp_distance(-5e-324, 5e-324), 2);
    }

    proptest! {
        #[test]
        fn matches_bit_oracle(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite() && x != 0.0);
            for dir in [Direction::Up, Direction::Down] {
                match next_after(x, dir) {
                    Ok(y) => {
                        let z = oracle_step(x, dir);
                        prop_assert!(y.to_bits() == z.to_bits() || (y == 0.0 && z == 0.0));
                        match dir {
                            Direction::Up => prop_assert!(y > x),
                            Direction::Down => prop_assert!(y < x),
                        }
                    }
                    Err(e) => prop_assert_eq!(e, Error::Overflow),
                }
            }
        }

        #[test]
        fn up_down_roundtrip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_normal() && x.abs() < f64::MAX);
            let up = next_up(x).unwrap();
            prop_assert_eq!(next_down(up).unwrap().to_bits(), x.to_bits());
            let down = next_down(x).unwrap();
            prop_assert_eq!(next_up(down).unwrap().to_bits(), x.to_bits());
        }
    }
}
