//! Rounding operators: fixed- and floating-point formats in eleven rounding
//! directions, and the interval enclosures of their absolute and relative
//! errors.
//!
//! A float format with precision `p` and minimum exponent `e_min` represents
//! `{ m * 2^e | e >= e_min, |m| < 2^p }`; a fixed format with lsb weight `e`
//! represents the integer multiples of `2^e`. There is no largest exponent:
//! overflow is not modelled.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::dyadic::{floor_log2_rational, Dyadic, ExactRational};
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoundingDirection {
    /// toward zero
    Zr,
    /// away from zero
    Aw,
    /// toward minus infinity
    Dn,
    /// toward plus infinity
    Up,
    /// to odd mantissa
    Od,
    /// nearest, ties to even
    Ne,
    /// nearest, ties to odd
    No,
    /// nearest, ties toward zero
    Nz,
    /// nearest, ties away from zero
    Na,
    /// nearest, ties toward minus infinity
    Nd,
    /// nearest, ties toward plus infinity
    Nu,
}

impl RoundingDirection {
    pub const ALL: [RoundingDirection; 11] = [
        RoundingDirection::Zr,
        RoundingDirection::Aw,
        RoundingDirection::Dn,
        RoundingDirection::Up,
        RoundingDirection::Od,
        RoundingDirection::Ne,
        RoundingDirection::No,
        RoundingDirection::Nz,
        RoundingDirection::Na,
        RoundingDirection::Nd,
        RoundingDirection::Nu,
    ];

    pub fn is_nearest(self) -> bool {
        use RoundingDirection::*;
        matches!(self, Ne | No | Nz | Na | Nd | Nu)
    }

    pub fn name(self) -> &'static str {
        use RoundingDirection::*;
        match self {
            Zr => "zr",
            Aw => "aw",
            Dn => "dn",
            Up => "up",
            Od => "od",
            Ne => "ne",
            No => "no",
            Nz => "nz",
            Na => "na",
            Nd => "nd",
            Nu => "nu",
        }
    }
}

impl FromStr for RoundingDirection {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        RoundingDirection::ALL.iter().copied().find(|d| d.name() == s).ok_or(())
    }
}

impl fmt::Display for RoundingDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormatKind {
    Float { precision: u32, min_exponent: i64 },
    Fixed { lsb: i64 },
}

/// A rounding operator: a representable set plus a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Format {
    pub kind: FormatKind,
    pub direction: RoundingDirection,
}

/// Predefined float formats: `(precision, minimum exponent)`.
pub fn named_format(name: &str) -> Option<(u32, i64)> {
    match name {
        "ieee_32" => Some((24, -149)),
        "ieee_64" => Some((53, -1074)),
        "ieee_128" => Some((113, -16494)),
        "x86_80" => Some((64, -16445)),
        _ => None,
    }
}

impl Format {
    pub fn float(precision: u32, min_exponent: i64, direction: RoundingDirection) -> Self {
        assert!(precision >= 1);
        Format {
            kind: FormatKind::Float {
                precision,
                min_exponent,
            },
            direction,
        }
    }

    pub fn fixed(lsb: i64, direction: RoundingDirection) -> Self {
        Format {
            kind: FormatKind::Fixed { lsb },
            direction,
        }
    }

    /// Smallest exponent of the representable set (`e_min` or the lsb weight).
    pub fn min_exponent(&self) -> i64 {
        match self.kind {
            FormatKind::Float { min_exponent, .. } => min_exponent,
            FormatKind::Fixed { lsb } => lsb,
        }
    }

    pub fn precision(&self) -> Option<u32> {
        match self.kind {
            FormatKind::Float { precision, .. } => Some(precision),
            FormatKind::Fixed { .. } => None,
        }
    }

    /// Exponent of the spacing of representable numbers around a nonzero `x`.
    fn quantum(&self, x: &Dyadic) -> i64 {
        match self.kind {
            FormatKind::Fixed { lsb } => lsb,
            FormatKind::Float {
                precision,
                min_exponent,
            } => {
                let l = x.floor_log2().expect("nonzero");
                (l - precision as i64 + 1).max(min_exponent)
            }
        }
    }

    pub fn is_representable(&self, x: &Dyadic) -> bool {
        if x.is_zero() {
            return true;
        }
        match self.kind {
            FormatKind::Fixed { lsb } => x.exponent() >= lsb,
            FormatKind::Float {
                precision,
                min_exponent,
            } => {
                // canonical mantissa is odd, so the smallest exponent is used
                x.exponent() >= min_exponent && x.mantissa_bits() <= precision as u64
            }
        }
    }

    /// Correctly rounded value of `x`.
    pub fn round(&self, x: &Dyadic) -> Dyadic {
        if x.is_zero() || self.is_representable(x) {
            return x.clone();
        }
        let q = self.quantum(x);
        let shift = (q - x.exponent()) as usize;
        debug_assert!(shift > 0);
        let m = x.mantissa();
        let (floor, rem) = m.div_mod_floor(&(BigInt::one() << shift));
        debug_assert!(!rem.is_zero());
        let ceil = &floor + 1;
        let positive = x.is_positive();
        use RoundingDirection::*;
        let pick_up = match self.direction {
            Dn => false,
            Up => true,
            Zr => !positive,
            Aw => positive,
            Od => floor.is_even(),
            nearest => {
                let twice = &rem << 1usize;
                let half = BigInt::one() << shift;
                match twice.cmp(&half) {
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => match nearest {
                        Ne => floor.is_odd(),
                        No => floor.is_even(),
                        Nz => !positive,
                        Na => positive,
                        Nd => false,
                        Nu => true,
                        _ => unreachable!(),
                    },
                }
            }
        };
        Dyadic::new(if pick_up { ceil } else { floor }, q)
    }

    /// Correctly rounded value of an exact rational.
    pub fn round_rational(&self, x: &ExactRational) -> Dyadic {
        if let Some(d) = Dyadic::from_rational_exact(x) {
            return self.round(&d);
        }
        let q = match self.kind {
            FormatKind::Fixed { lsb } => lsb,
            FormatKind::Float {
                precision,
                min_exponent,
            } => {
                let l = floor_log2_rational(x).expect("nonzero");
                (l - precision as i64 + 1).max(min_exponent)
            }
        };
        // x * 2^-q = num / den
        let (num, den) = if q >= 0 {
            (x.numer().clone(), x.denom() << q as usize)
        } else {
            (x.numer() << (-q) as usize, x.denom().clone())
        };
        let (floor, rem) = num.div_mod_floor(&den);
        // den has an odd factor, so rem != 0 and 2 * rem != den
        let positive = x.is_positive();
        use RoundingDirection::*;
        let pick_up = match self.direction {
            Dn => false,
            Up => true,
            Zr => !positive,
            Aw => positive,
            Od => floor.is_even(),
            _ => (&rem << 1usize) > den,
        };
        Dyadic::new(if pick_up { floor + 1 } else { floor }, q)
    }

    /// Smallest representable value `>= x`.
    pub fn round_up(&self, x: &Dyadic) -> Dyadic {
        Format {
            kind: self.kind,
            direction: RoundingDirection::Up,
        }
        .round(x)
    }

    /// Largest representable value `<= x`.
    pub fn round_down(&self, x: &Dyadic) -> Dyadic {
        Format {
            kind: self.kind,
            direction: RoundingDirection::Dn,
        }
        .round(x)
    }

    /// `[round(lo), round(hi)]`, which contains `round(x)` for every `x` in
    /// the interval since rounding is monotone.
    pub fn round_interval(&self, j: &Interval) -> Interval {
        Interval::new(self.round(j.lo()), self.round(j.hi()))
    }

    /// Tightest interval containing the representable values of `j`; `None`
    /// when `j` contains no representable value.
    pub fn representable_clip(&self, j: &Interval) -> Option<Interval> {
        Interval::try_new(self.round_up(j.lo()), self.round_down(j.hi()))
    }

    /// Smallest magnitude above which relative errors are bounded.
    fn normal_threshold(&self) -> Option<Dyadic> {
        match self.kind {
            FormatKind::Float {
                precision,
                min_exponent,
            } => Some(Dyadic::pow2(min_exponent + precision as i64 - 1)),
            FormatKind::Fixed { .. } => None,
        }
    }

    /// Enclosure of `round(x) - x` for every `x` compatible with `info`.
    /// `None` when this (format, info) combination is left undefined.
    pub fn abs_error_enclosure(&self, info: ErrorInfo<'_>, on: ErrorOn) -> Option<Interval> {
        let ulp_exp = match self.kind {
            FormatKind::Fixed { lsb } => lsb,
            FormatKind::Float {
                precision,
                min_exponent,
            } => {
                let m = match info {
                    ErrorInfo::None => return None,
                    ErrorInfo::Bnd(j) => j.mag(),
                    ErrorInfo::Abs(j) => j.hi().clone(),
                };
                if m.is_zero() && on == ErrorOn::Argument {
                    return Some(Interval::point(Dyadic::zero()));
                }
                let e = match on {
                    // values rounding to zero lie below the smallest quantum
                    ErrorOn::Result if m.is_zero() => min_exponent,
                    // |x| <= m: x lies below the smallest power of two >= m
                    ErrorOn::Argument => m.ceil_log2().unwrap() - precision as i64,
                    // |round(x)| <= m: round(x) lies in the binade of m or below
                    ErrorOn::Result => m.floor_log2().unwrap() - precision as i64 + 1,
                };
                e.max(min_exponent)
            }
        };
        let ulp = Dyadic::pow2(ulp_exp);
        let zero = Dyadic::zero();
        let sign = match (info, on) {
            (ErrorInfo::Bnd(j), ErrorOn::Argument) => sign_of(j),
            _ => None,
        };
        use RoundingDirection::*;
        let (lo, hi) = match self.direction {
            Dn => (-&ulp, zero),
            Up => (zero, ulp),
            Zr => match sign {
                Some(true) => (-&ulp, zero),
                Some(false) => (zero, ulp),
                None => (-&ulp, ulp),
            },
            Aw => match sign {
                Some(true) => (zero, ulp),
                Some(false) => (-&ulp, zero),
                None => (-&ulp, ulp),
            },
            Od => (-&ulp, ulp),
            _ => {
                let half = ulp.shl(-1);
                (-&half, half)
            }
        };
        Some(Interval::new(lo, hi))
    }

    /// Enclosure of `(round(x) - x) / x`; only defined for float formats when
    /// `x` is known to stay in the normal range.
    pub fn rel_error_enclosure(&self, info: ErrorInfo<'_>, on: ErrorOn) -> Option<Interval> {
        let precision = self.precision()?;
        let threshold = self.normal_threshold()?;
        let (smallest, sign) = match info {
            ErrorInfo::None => return None,
            ErrorInfo::Bnd(j) => {
                if j.contains_zero() {
                    return None;
                }
                (j.mig(), sign_of(j))
            }
            ErrorInfo::Abs(j) => (j.lo().clone(), None),
        };
        let needed = match on {
            ErrorOn::Argument => threshold,
            ErrorOn::Result => threshold.shl(1),
        };
        if smallest < needed {
            return None;
        }
        let zero = Dyadic::zero();
        let u = Dyadic::pow2(1 - precision as i64);
        use RoundingDirection::*;
        let (lo, hi) = match self.direction {
            Zr => (-&u, zero),
            Aw => (zero, u),
            Dn => match sign {
                Some(true) => (-&u, zero),
                Some(false) => (zero, u),
                None => (-&u, u),
            },
            Up => match sign {
                Some(true) => (zero, u),
                Some(false) => (-&u, zero),
                None => (-&u, u),
            },
            Od => (-&u, u),
            _ => {
                let half = u.shl(-1);
                (-&half, half)
            }
        };
        Some(Interval::new(lo, hi))
    }
}

/// `Some(true)` when the interval is nonnegative, `Some(false)` when nonpositive.
fn sign_of(j: &Interval) -> Option<bool> {
    if j.is_nonneg() {
        Some(true)
    } else if !j.hi().is_positive() {
        Some(false)
    } else {
        None
    }
}

/// What is known about the rounded quantity when bounding its error.
#[derive(Clone, Copy, Debug)]
pub enum ErrorInfo<'a> {
    None,
    Bnd(&'a Interval),
    Abs(&'a Interval),
}

/// Whether the known range is about the argument `x` or the result `round(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorOn {
    Argument,
    Result,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FormatKind::Float {
                precision,
                min_exponent,
            } => write!(f, "float<{precision},{min_exponent},{}>", self.direction),
            FormatKind::Fixed { lsb } => write!(f, "fixed<{lsb},{}>", self.direction),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelKind {
    Add,
    Sub,
    Mul,
}

impl RelKind {
    pub fn name(self) -> &'static str {
        match self {
            RelKind::Add => "add",
            RelKind::Sub => "sub",
            RelKind::Mul => "mul",
        }
    }

    pub fn apply(self, a: &Interval, b: &Interval) -> Interval {
        match self {
            RelKind::Add => a.add(b),
            RelKind::Sub => a.sub(b),
            RelKind::Mul => a.mul(b),
        }
    }
}

/// An under-specified operator `op_rel<precision[, min_exponent]>`: the exact
/// result perturbed by a relative error of at most `2^-precision`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelOp {
    pub kind: RelKind,
    pub precision: u32,
    pub min_exponent: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelOpBounds {
    /// Enclosure of the computed value.
    pub value: Interval,
    /// Enclosure of `(computed - exact) / exact`.
    pub rel_error: Interval,
    /// Enclosure of `computed - exact`.
    pub abs_error: Interval,
}

impl RelOp {
    pub fn error_bound(&self) -> Interval {
        let u = Dyadic::pow2(-(self.precision as i64));
        Interval::new(-&u, u)
    }

    /// Whether a fact may be instantiated for an exact result in `exact`.
    pub fn applies_to(&self, exact: &Interval) -> bool {
        match self.min_exponent {
            None => true,
            Some(e) => exact.mig() >= Dyadic::pow2(e),
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.min_exponent {
            Some(e) => write!(f, "{}_rel<{},{}>", self.kind.name(), self.precision, e),
            None => write!(f, "{}_rel<{}>", self.kind.name(), self.precision),
        }
    }
}

/// Bounds for `op_rel<precision[, min_exponent]>(a, b)`. Returns `None` when a
/// minimum exponent is given and the result may fall below `2^min_exponent`.
pub fn underspecified_rel_op(
    kind: RelKind,
    precision: u32,
    min_exponent: Option<i64>,
    a: &Interval,
    b: &Interval,
) -> Option<RelOpBounds> {
    let op = RelOp {
        kind,
        precision,
        min_exponent,
    };
    let exact = kind.apply(a, b);
    if !op.applies_to(&exact) {
        return None;
    }
    let eps = op.error_bound();
    let one = Interval::point(Dyadic::one());
    Some(RelOpBounds {
        value: exact.mul(&one.add(&eps)),
        rel_error: eps.clone(),
        abs_error: exact.mul(&eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn d(m: i64, e: i64) -> Dyadic {
        Dyadic::new(BigInt::from(m), e)
    }

    fn ieee32(dir: RoundingDirection) -> Format {
        let (p, e) = named_format("ieee_32").unwrap();
        Format::float(p, e, dir)
    }

    #[test]
    fn named_formats() {
        let f = ieee32(RoundingDirection::Ne);
        assert!(f.is_representable(&d(1, -149)));
        assert!(!f.is_representable(&d(1, -150)));
        assert!(f.is_representable(&d((1 << 24) - 1, -149)));
        assert!(!f.is_representable(&d((1 << 24) + 1, 0)));
        let (p, e) = named_format("ieee_64").unwrap();
        assert!(Format::float(p, e, RoundingDirection::Ne).is_representable(&d(1, -1074)));
    }

    #[test]
    fn rounding_examples() {
        // 1 + 2^-25 sits between 1 and 1 + 2^-23; it is below the midpoint.
        let x = &Dyadic::one() + &d(1, -25);
        assert_eq!(ieee32(RoundingDirection::Ne).round(&x), Dyadic::one());
        // exact tie 1 + 2^-24 rounds to the even mantissa 1
        let tie = &Dyadic::one() + &d(1, -24);
        assert_eq!(ieee32(RoundingDirection::Ne).round(&tie), Dyadic::one());
        assert_eq!(ieee32(RoundingDirection::No).round(&tie), &Dyadic::one() + &d(1, -23));
        let floor = Format::fixed(0, RoundingDirection::Dn);
        assert_eq!(floor.round(&d(13, -3)), Dyadic::one());
        assert_eq!(floor.round(&d(-13, -3)), Dyadic::from_int(-2));
        assert_eq!(ieee32(RoundingDirection::Up).round(&d(3, -1)), d(3, -1));
    }

    #[test]
    fn interval_rounding() {
        let floor = Format::fixed(0, RoundingDirection::Dn);
        assert_eq!(
            floor.round_interval(&Interval::new(d(3, -1), d(5, -1))),
            Interval::from_ints(1, 2)
        );
        assert_eq!(
            ieee32(RoundingDirection::Ne).round_interval(&Interval::from_ints(1, 2)),
            Interval::from_ints(1, 2)
        );
        // 1.3 bracketed at 128 bits, rounded to multiples of 1/2: both go to 3/2
        let r = crate::dyadic::parse_number("1.3").unwrap();
        let j = Interval::outward(&r, &r, 128);
        let half = Format::fixed(-1, RoundingDirection::Ne);
        assert_eq!(half.round_interval(&j), Interval::point(d(3, -1)));
    }

    #[test]
    fn clipping() {
        let int = Format::fixed(0, RoundingDirection::Ne);
        let a = Interval::new(d(3, -3), d(17, -3));
        assert_eq!(int.representable_clip(&a), Some(Interval::from_ints(1, 2)));
        assert_eq!(
            ieee32(RoundingDirection::Ne).representable_clip(&Interval::from_ints(1, 2)),
            Some(Interval::from_ints(1, 2))
        );
        let b = Interval::new(d(3, -3), d(7, -3));
        assert_eq!(int.representable_clip(&b), None);
    }

    #[test]
    fn absolute_error_examples() {
        let floor = Format::fixed(0, RoundingDirection::Dn);
        assert_eq!(
            floor.abs_error_enclosure(ErrorInfo::None, ErrorOn::Argument),
            Some(Interval::from_ints(-1, 0))
        );
        let j = Interval::from_ints(1, 2);
        // x in [1, 2]: the spacing below 2 is 2^-23, so half of it bounds the error.
        assert_eq!(
            ieee32(RoundingDirection::Ne).abs_error_enclosure(ErrorInfo::Abs(&j), ErrorOn::Argument),
            Some(Interval::new(d(-1, -24), d(1, -24)))
        );
        assert_eq!(
            ieee32(RoundingDirection::Ne).abs_error_enclosure(ErrorInfo::None, ErrorOn::Argument),
            None
        );
        let y = Interval::new(d(-1, 0), d(-1, -1));
        assert_eq!(
            ieee32(RoundingDirection::Ne).abs_error_enclosure(ErrorInfo::Bnd(&y), ErrorOn::Argument),
            Some(Interval::new(d(-1, -25), d(1, -25)))
        );
    }

    #[test]
    fn absolute_error_oracle_fixed_floor() {
        // floor(x) - x over a fine grid lies in [-1, 0]
        let floor = Format::fixed(0, RoundingDirection::Dn);
        let enc = floor.abs_error_enclosure(ErrorInfo::None, ErrorOn::Argument).unwrap();
        for k in -200..=200 {
            let x = d(k, -5);
            let err = &floor.round(&x) - &x;
            assert!(enc.contains(&err));
        }
    }

    #[test]
    fn relative_error_examples() {
        let j = Interval::from_ints(1, 2);
        assert_eq!(
            ieee32(RoundingDirection::Ne).rel_error_enclosure(ErrorInfo::Abs(&j), ErrorOn::Argument),
            Some(Interval::new(d(-1, -24), d(1, -24)))
        );
        assert_eq!(
            ieee32(RoundingDirection::Dn).rel_error_enclosure(ErrorInfo::Bnd(&j), ErrorOn::Argument),
            Some(Interval::new(d(-1, -23), Dyadic::zero()))
        );
        // a negative argument rounded down has a nonnegative relative error
        assert_eq!(
            ieee32(RoundingDirection::Dn).rel_error_enclosure(ErrorInfo::Abs(&j), ErrorOn::Argument),
            Some(Interval::new(d(-1, -23), d(1, -23)))
        );
        let tiny = Interval::new(d(1, -140), d(1, -139));
        assert_eq!(
            ieee32(RoundingDirection::Ne).rel_error_enclosure(ErrorInfo::Bnd(&tiny), ErrorOn::Argument),
            None
        );
    }

    #[test]
    fn representable_values_have_zero_error() {
        let f = ieee32(RoundingDirection::Ne);
        let x = d(3, -1);
        assert_eq!(&f.round(&x) - &x, Dyadic::zero());
        let rel = f
            .rel_error_enclosure(ErrorInfo::Bnd(&Interval::point(x)), ErrorOn::Argument)
            .unwrap();
        assert!(rel.contains_zero());
    }

    #[test]
    fn underspecified_operators() {
        let one = Interval::from_ints(1, 1);
        let zero = Interval::from_ints(0, 0);
        let r = underspecified_rel_op(RelKind::Mul, 20, None, &one, &zero).unwrap();
        assert_eq!(r.value, zero);
        assert_eq!(r.abs_error, zero);
        let s = underspecified_rel_op(RelKind::Add, 20, None, &one, &one).unwrap();
        let lo = &Dyadic::from_int(2) * &(&Dyadic::one() - &d(1, -20));
        let hi = &Dyadic::from_int(2) * &(&Dyadic::one() + &d(1, -20));
        assert!(s.value.is_subset(&Interval::new(lo, hi)));
        let small = Interval::new(d(1, -70), d(1, -61));
        assert!(underspecified_rel_op(RelKind::Add, 20, Some(-60), &small, &zero).is_none());
        assert!(underspecified_rel_op(RelKind::Add, 20, Some(-60), &one, &zero).is_some());
    }
}
