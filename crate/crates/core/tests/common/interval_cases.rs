//! Randomized containment checks of interval operators against exact
//! dyadic arithmetic.

use fpcert::fp::next_up;
use fpcert::interval::{self, Interval, OutwardRounding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot_exact, quotient_within, sqrt_within, Dyadic};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Dot,
    Norm,
}

pub const OPS: [Op; 7] = [Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Sqrt, Op::Dot, Op::Norm];

pub fn random_float<R: Rng>(rng: &mut R) -> f64 {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    match rng.random_range(0..10) {
        0..=3 => rng.random_range(-1.0..=1.0),
        4..=6 => sign * (1.0 + rng.random::<f64>()) * 2f64.powi(rng.random_range(-60..=60)),
        7 => f64::from(rng.random_range(-8i32..=8)),
        8 => sign * (1.0 + rng.random::<f64>()) * 2f64.powi(rng.random_range(-1000..=1000)),
        _ => sign * f64::from_bits(rng.random_range(1u64..1 << 52)),
    }
}

pub fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let a = random_float(rng);
    match rng.random_range(0..10) {
        0..=3 => Interval::point(a),
        4..=6 => {
            let mut b = a;
            for _ in 0..rng.random_range(1..=4) {
                b = next_up(b).unwrap_or(b);
            }
            Interval::new(a, b).unwrap()
        }
        _ => {
            let b = random_float(rng);
            Interval::new(a.min(b), a.max(b)).unwrap()
        }
    }
}

fn nonzero_interval<R: Rng>(rng: &mut R) -> Interval {
    loop {
        let y = random_interval(rng);
        if !y.contains_zero() {
            return y;
        }
    }
}

fn nonneg_interval<R: Rng>(rng: &mut R) -> Interval {
    let y = random_interval(rng);
    let (a, b) = (y.lo().abs(), y.hi().abs());
    Interval::new(a.min(b), a.max(b)).unwrap()
}

fn corners(x: Interval) -> [f64; 2] {
    [x.lo(), x.hi()]
}

fn min_max(vals: Vec<Dyadic>) -> (Dyadic, Dyadic) {
    let mut lo = vals[0].clone();
    let mut hi = vals[0].clone();
    for v in vals.into_iter().skip(1) {
        if v.le(&lo) {
            lo = v.clone();
        }
        if hi.le(&v) {
            hi = v;
        }
    }
    (lo, hi)
}

fn d(v: f64) -> Dyadic {
    Dyadic::from_f64(v)
}

/// Exact range `[min, max]` of `x·y` over the two boxes.
fn product_range(x: Interval, y: Interval) -> (Dyadic, Dyadic) {
    let mut v = Vec::with_capacity(4);
    for a in corners(x) {
        for b in corners(y) {
            v.push(&d(a) * &d(b));
        }
    }
    min_max(v)
}

fn square_range(x: Interval) -> (Dyadic, Dyadic) {
    let (lo2, hi2) = min_max(vec![d(x.lo()).square(), d(x.hi()).square()]);
    if x.contains_zero() {
        (Dyadic::zero(), hi2)
    } else {
        (lo2, hi2)
    }
}

fn encloses(r: Interval, lo: &Dyadic, hi: &Dyadic) -> bool {
    lo.ge_f64(r.lo()) && hi.le_f64(r.hi())
}

/// One random case of `op` with kernel `K`. Returns whether the result
/// encloses the exact range.
pub fn check_case<K: OutwardRounding, G: Rng>(op: Op, rng: &mut G) -> bool {
    match op {
        Op::Add | Op::Sub => {
            let (x, y) = (random_interval(rng), random_interval(rng));
            let r = if op == Op::Add { x.add_with::<K>(y) } else { x.sub_with::<K>(y) };
            let (lo, hi) = if op == Op::Add {
                (&d(x.lo()) + &d(y.lo()), &d(x.hi()) + &d(y.hi()))
            } else {
                (&d(x.lo()) - &d(y.hi()), &d(x.hi()) - &d(y.lo()))
            };
            encloses(r, &lo, &hi)
        }
        Op::Mul => {
            let (x, y) = (random_interval(rng), random_interval(rng));
            let (lo, hi) = product_range(x, y);
            encloses(x.mul_with::<K>(y), &lo, &hi)
        }
        Op::Div => {
            let (x, y) = (random_interval(rng), nonzero_interval(rng));
            let r = x.div_with::<K>(y).expect("divisor excludes zero");
            corners(x).iter().all(|&a| {
                corners(y).iter().all(|&b| {
                    let (num, den) = if b < 0.0 { (d(-a), d(-b)) } else { (d(a), d(b)) };
                    quotient_within(&num, &den, r.lo(), r.hi())
                })
            })
        }
        Op::Sqrt => {
            let x = nonneg_interval(rng);
            let r = x.sqrt_with::<K>().expect("nonnegative operand");
            sqrt_within(&d(x.lo()), r.lo(), f64::INFINITY) && sqrt_within(&d(x.hi()), f64::NEG_INFINITY, r.hi())
        }
        Op::Dot => {
            let n = rng.random_range(1..=8);
            let a: Vec<Interval> = (0..n).map(|_| random_interval(rng)).collect();
            let b: Vec<Interval> = (0..n).map(|_| random_interval(rng)).collect();
            let r = interval::dot_with::<K>(&a, &b).unwrap();
            let (mut lo, mut hi) = (Dyadic::zero(), Dyadic::zero());
            for (x, y) in a.iter().zip(&b) {
                let (l, h) = product_range(*x, *y);
                lo = &lo + &l;
                hi = &hi + &h;
            }
            encloses(r, &lo, &hi)
        }
        Op::Norm => {
            let n = rng.random_range(1..=8);
            let a: Vec<Interval> = (0..n).map(|_| random_interval(rng)).collect();
            let r = interval::norm2_with::<K>(&a).unwrap();
            let (mut lo, mut hi) = (Dyadic::zero(), Dyadic::zero());
            for x in &a {
                let (l, h) = square_range(*x);
                lo = &lo + &l;
                hi = &hi + &h;
            }
            sqrt_within(&lo, r.lo(), f64::INFINITY) && sqrt_within(&hi, f64::NEG_INFINITY, r.hi())
        }
    }
}

/// Runs `cases` random cases; returns the number of enclosure failures.
pub fn run_op<K: OutwardRounding>(op: Op, cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases).filter(|_| !check_case::<K, _>(op, &mut rng)).count()
}

/// Exact `w·x` as a dyadic, for point-vector checks.
pub fn exact_dot(a: &[f64], b: &[f64]) -> Dyadic {
    dot_exact(a, b)
}
