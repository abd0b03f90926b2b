//! Closed intervals with dyadic endpoints.
//!
//! Negation, addition, subtraction and multiplication are exact. Division,
//! inversion and square root round their endpoints outward to a caller-given
//! number of mantissa bits.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::dyadic::{Direction, Dyadic, ExactRational};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Dyadic,
    hi: Dyadic,
}

/// A failed operator precondition. Not a crash: the caller simply cannot use
/// the theorem that needed the operator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("divisor interval contains zero")]
    DivisionByZero,
    #[error("square root of an interval with a negative lower bound")]
    NegativeSqrt,
    #[error("relative composition needs both intervals above -1")]
    BelowMinusOne,
}

impl Interval {
    /// Panics if `lo > hi`; use [`Interval::try_new`] for unchecked input.
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn try_new(lo: Dyadic, hi: Dyadic) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: Dyadic) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn from_ints(lo: i64, hi: i64) -> Self {
        Interval::new(Dyadic::from_int(lo), Dyadic::from_int(hi))
    }

    /// Smallest interval with `precision`-bit endpoints containing `[lo, hi]`.
    pub fn outward(lo: &ExactRational, hi: &ExactRational, precision: u32) -> Self {
        Interval::new(
            Dyadic::from_rational(lo, Direction::Down, precision),
            Dyadic::from_rational(hi, Direction::Up, precision),
        )
    }

    /// Largest interval with `precision`-bit endpoints inside `[lo, hi]`, if any.
    pub fn inward(lo: &ExactRational, hi: &ExactRational, precision: u32) -> Option<Self> {
        Interval::try_new(
            Dyadic::from_rational(lo, Direction::Up, precision),
            Dyadic::from_rational(hi, Direction::Down, precision),
        )
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_rational(&self, x: &ExactRational) -> bool {
        self.lo.cmp_rational(x).is_le() && self.hi.cmp_rational(x).is_ge()
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    /// `I >= 0`.
    pub fn is_nonneg(&self) -> bool {
        !self.lo.is_negative()
    }

    /// `I > 0`.
    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn width(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> Dyadic {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> Dyadic {
        if self.contains_zero() {
            Dyadic::zero()
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    /// Total mantissa bits of both endpoints.
    pub fn mantissa_bits(&self) -> u64 {
        self.lo.mantissa_bits() + self.hi.mantissa_bits()
    }

    /// Rounds both endpoints outward to `bits` mantissa bits.
    pub fn round_outward(&self, bits: u32) -> Interval {
        Interval {
            lo: self.lo.round_bits(bits, Direction::Down),
            hi: self.hi.round_bits(bits, Direction::Up),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.add(&other.neg())
    }

    /// All four endpoint products are computed exactly and the extremes kept.
    pub fn mul(&self, other: &Interval) -> Interval {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub fn inv(&self, precision: u32) -> Result<Interval, DomainError> {
        Interval::point(Dyadic::one()).div(self, precision)
    }

    pub fn div(&self, other: &Interval, precision: u32) -> Result<Interval, DomainError> {
        if other.contains_zero() {
            return Err(DomainError::DivisionByZero);
        }
        let mut quotients = Vec::with_capacity(4);
        for a in [&self.lo, &self.hi] {
            for b in [&other.lo, &other.hi] {
                quotients.push(a.to_rational() / b.to_rational());
            }
        }
        let lo = quotients.iter().min().unwrap();
        let hi = quotients.iter().max().unwrap();
        Ok(Interval::new(
            Dyadic::from_rational(lo, Direction::Down, precision),
            Dyadic::from_rational(hi, Direction::Up, precision),
        ))
    }

    pub fn sqrt(&self, precision: u32) -> Result<Interval, DomainError> {
        if self.lo.is_negative() {
            return Err(DomainError::NegativeSqrt);
        }
        Ok(Interval::new(
            sqrt_dyadic(&self.lo, Direction::Down, precision),
            sqrt_dyadic(&self.hi, Direction::Up, precision),
        ))
    }

    pub fn abs(&self) -> Interval {
        if self.is_nonneg() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            Interval {
                lo: Dyadic::zero(),
                hi: (-&self.lo).max(self.hi.clone()),
            }
        }
    }

    /// The enclosure of `a + b + a*b` for `a` in `self`, `b` in `other`.
    pub fn rel_compose(&self, other: &Interval) -> Result<Interval, DomainError> {
        let minus_one = Dyadic::from_int(-1);
        if self.lo < minus_one || other.lo < minus_one {
            return Err(DomainError::BelowMinusOne);
        }
        let lo = &(&self.lo + &other.lo) + &(&self.lo * &other.lo);
        let hi = &(&self.hi + &other.hi) + &(&self.hi * &other.hi);
        Ok(Interval { lo, hi })
    }

    /// `None` is the empty interval.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(
            self.lo.clone().max(other.lo.clone()),
            self.hi.clone().min(other.hi.clone()),
        )
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Lower endpoint as an exact rational, used by samplers and oracles.
    pub fn lo_rational(&self) -> BigRational {
        self.lo.to_rational()
    }

    pub fn hi_rational(&self) -> BigRational {
        self.hi.to_rational()
    }
}

/// Square root of a nonnegative dyadic rounded to `precision` bits.
pub fn sqrt_dyadic(x: &Dyadic, direction: Direction, precision: u32) -> Dyadic {
    assert!(!x.is_negative());
    if x.is_zero() {
        return Dyadic::zero();
    }
    let mut m = x.mantissa().clone();
    let mut e = x.exponent();
    if e % 2 != 0 {
        m <<= 1usize;
        e -= 1;
    }
    // Scale so the integer square root carries at least precision + 2 bits.
    let want = 2 * (precision as i64 + 2);
    let have = m.bits() as i64;
    let mut t = 0i64;
    if have < want {
        t = (want - have + 1) / 2;
        m <<= (2 * t) as usize;
    }
    let r: BigInt = m.sqrt();
    let exact = &r * &r == m;
    let r = if !exact && direction == Direction::Up {
        r + BigInt::one()
    } else {
        r
    };
    Dyadic::new(r, e / 2 - t).round_bits(precision, direction)
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: i64, e: i64) -> Dyadic {
        Dyadic::new(BigInt::from(m), e)
    }

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::from_ints(lo, hi)
    }

    #[test]
    fn exact_operators() {
        assert_eq!(iv(1, 2).add(&iv(3, 4)), iv(4, 6));
        assert_eq!(iv(-2, 3).neg(), iv(-3, 2));
        assert_eq!(iv(-2, 3).mul(&iv(-1, 4)), iv(-8, 12));
        assert_eq!(iv(1, 2).sub(&iv(3, 4)), iv(-3, -1));
    }

    #[test]
    fn mul_matches_grid_oracle() {
        // Dense grid over [-2,3] x [-1,4] in steps of 1/8.
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for a in -16..=24 {
            for b in -8..=32 {
                let p = a * b; // scaled by 64
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        assert_eq!(iv(-2, 3).mul(&iv(-1, 4)), Interval::new(d(lo, -6), d(hi, -6)));
    }

    #[test]
    fn division_and_roots() {
        assert_eq!(iv(1, 4).sqrt(64).unwrap(), iv(1, 2));
        assert_eq!(iv(1, 2).inv(8).unwrap(), Interval::new(d(128, -8), d(1, 0)));
        let third = iv(1, 3).inv(8).unwrap();
        let lo = third.lo().to_rational();
        let one_third = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert!(lo <= one_third);
        // lo * (1 + 2^-7) > 1/3
        let slack = BigRational::new(BigInt::from(129), BigInt::from(128));
        assert!(&lo * slack > one_third);
        assert_eq!(third.hi(), &Dyadic::one());
        assert_eq!(iv(1, 2).div(&iv(-1, 1), 8), Err(DomainError::DivisionByZero));
        assert_eq!(iv(-1, 2).sqrt(8), Err(DomainError::NegativeSqrt));
        let s3 = Interval::point(Dyadic::from_int(3)).sqrt(20).unwrap();
        assert!(s3.lo() < s3.hi());
        assert!((s3.lo() * s3.lo()) <= Dyadic::from_int(3));
        assert!((s3.hi() * s3.hi()) >= Dyadic::from_int(3));
    }

    #[test]
    fn absolute_value() {
        assert_eq!(iv(2, 5).abs(), iv(2, 5));
        assert_eq!(iv(-5, -2).abs(), iv(2, 5));
        assert_eq!(iv(-2, 5).abs(), iv(0, 5));
        assert_eq!(iv(-7, 5).abs(), iv(0, 7));
    }

    #[test]
    fn relative_composition() {
        let j = Interval::new(d(-1, -1), d(7, 0));
        assert_eq!(iv(0, 0).rel_compose(&j).unwrap(), j);
        let e = Interval::new(d(-1, -4), d(1, -4));
        let expected = Interval::new(&d(-1, -3) + &d(1, -8), &d(1, -3) + &d(1, -8));
        assert_eq!(e.rel_compose(&e).unwrap(), expected);
        assert_eq!(iv(-1, -1).rel_compose(&iv(0, 1)).unwrap(), iv(-1, -1));
        assert_eq!(iv(-2, 0).rel_compose(&iv(0, 1)), Err(DomainError::BelowMinusOne));
    }

    #[test]
    fn relative_composition_grid_oracle() {
        // a + b + ab over [-1/16, 1/16]^2 sampled at 1/256 steps.
        let mut best: Option<(BigRational, BigRational)> = None;
        for i in -16..=16 {
            for j in -16..=16 {
                let a = BigRational::new(BigInt::from(i), BigInt::from(256));
                let b = BigRational::new(BigInt::from(j), BigInt::from(256));
                let v = &a + &b + &a * &b;
                best = Some(match best {
                    None => (v.clone(), v),
                    Some((l, h)) => (l.min(v.clone()), h.max(v)),
                });
            }
        }
        let (l, h) = best.unwrap();
        let e = Interval::new(d(-1, -4), d(1, -4));
        let r = e.rel_compose(&e).unwrap();
        assert_eq!(r.lo().to_rational(), l);
        assert_eq!(r.hi().to_rational(), h);
    }

    #[test]
    fn set_operations() {
        assert_eq!(iv(0, 2).intersect(&iv(1, 3)), Some(iv(1, 2)));
        assert_eq!(iv(0, 1).intersect(&iv(2, 3)), None);
        assert_eq!(iv(0, 1).hull(&iv(3, 4)), iv(0, 4));
        assert!(iv(4, 6).is_subset(&iv(0, 6)));
        assert!(!iv(0, 6).is_subset(&iv(4, 6)));
        assert!(iv(-1, 1).contains_zero());
        assert!(!iv(1, 2).contains_zero());
    }

    #[test]
    fn outward_and_inward() {
        let r = BigRational::new(BigInt::from(13), BigInt::from(10));
        let o = Interval::outward(&r, &r, 8);
        assert_eq!(o, Interval::new(d(166, -7), d(167, -7)));
        assert!(Interval::inward(&r, &r, 128).is_none());
        let two = BigRational::from_integer(BigInt::from(2));
        assert_eq!(Interval::inward(&two, &two, 8), Some(iv(2, 2)));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn d(m: i64, e: i64) -> Dyadic {
        Dyadic::new(BigInt::from(m), e)
    }

    /// An interval and a rational point inside it.
    fn interval_with_point() -> impl Strategy<Value = (Interval, BigRational)> {
        (-1_000_000i64..1_000_000, 0i64..1_000_000, -20i64..5, 0u32..=1000).prop_map(|(lo, w, e, t)| {
            let i = Interval::new(d(lo, e), d(lo + w, e));
            let x = i.lo_rational() + (i.hi_rational() - i.lo_rational()) * BigRational::new(t.into(), 1000.into());
            (i, x)
        })
    }

    proptest! {
        #[test]
        fn arithmetic_contains_the_exact_result((a, x) in interval_with_point(), (b, y) in interval_with_point()) {
            prop_assert!(a.add(&b).contains_rational(&(&x + &y)));
            prop_assert!(a.sub(&b).contains_rational(&(&x - &y)));
            prop_assert!(a.mul(&b).contains_rational(&(&x * &y)));
            prop_assert!(a.neg().contains_rational(&-&x));
            prop_assert!(a.abs().contains_rational(&x.abs()));
            if !b.contains_zero() {
                prop_assert!(a.div(&b, 40).unwrap().contains_rational(&(&x / &y)));
                prop_assert!(b.inv(40).unwrap().contains_rational(&y.recip()));
            }
            if a.is_nonneg() {
                let s = a.sqrt(40).unwrap();
                prop_assert!(s.is_nonneg());
                let (lo, hi) = (s.lo_rational(), s.hi_rational());
                prop_assert!(&lo * &lo <= x && x <= &hi * &hi);
            }
        }

        #[test]
        fn lattice_operations((a, x) in interval_with_point(), (b, _y) in interval_with_point()) {
            let h = a.hull(&b);
            prop_assert!(a.is_subset(&h) && b.is_subset(&h));
            match a.intersect(&b) {
                Some(m) => prop_assert!(m.is_subset(&a) && m.is_subset(&b)),
                None => prop_assert!(!b.contains_rational(&x)),
            }
        }

        #[test]
        fn rel_compose_contains((a, x) in interval_with_point(), (b, y) in interval_with_point()) {
            if let Ok(r) = a.rel_compose(&b) {
                prop_assert!(r.contains_rational(&(&x + &y + &x * &y)));
            }
        }

        #[test]
        fn outward_rounding_contains(n in any::<i64>(), w in 0i64..1_000_000, den in 1i64..10_000, p in 2u32..64) {
            let lo = BigRational::new(n.into(), den.into());
            let hi = &lo + BigRational::new(w.into(), den.into());
            let i = Interval::outward(&lo, &hi, p);
            prop_assert!(i.contains_rational(&lo) && i.contains_rational(&hi));
            if let Some(j) = Interval::inward(&lo, &hi, p) {
                prop_assert!(j.lo_rational() >= lo && j.hi_rational() <= hi);
            }
        }
    }
}
