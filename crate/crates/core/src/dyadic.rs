//! Exact dyadic fractions `m * 2^e` and exact rationals for literal constants.
//!
//! Every interval endpoint in the crate is a [`Dyadic`]. They are closed under
//! addition, subtraction and multiplication, so those never lose information.
//! Rationals only appear for user constants such as `1.3`; they are converted
//! to dyadics at interval endpoints with an explicit direction.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational constant, always kept in lowest terms with a positive denominator.
pub type ExactRational = BigRational;

/// Default number of mantissa bits used when a value has to be rounded outward.
pub const DEFAULT_PRECISION: u32 = 128;

/// Direction of a one-sided conversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }
}

/// A dyadic fraction in canonical form: the mantissa is odd, or zero with a
/// zero exponent. Structural equality is therefore value equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        if mantissa.is_zero() {
            return Dyadic::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        Dyadic {
            mantissa: mantissa >> tz,
            exponent: exponent + tz as i64,
        }
    }

    pub fn zero() -> Self {
        Dyadic {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::pow2(0)
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        Dyadic {
            mantissa: BigInt::one(),
            exponent: e,
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Multiplies by `2^k`.
    pub fn shl(&self, k: i64) -> Dyadic {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic {
            mantissa: self.mantissa.clone(),
            exponent: self.exponent + k,
        }
    }

    /// Number of significant bits of the mantissa (0 for zero).
    pub fn mantissa_bits(&self) -> u64 {
        self.mantissa.bits()
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.mantissa.bits() as i64 - 1 + self.exponent)
        }
    }

    /// `ceil(log2 |x|)`; `None` for zero.
    pub fn ceil_log2(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else if self.mantissa.abs().is_one() {
            Some(self.exponent)
        } else {
            Some(self.mantissa.bits() as i64 + self.exponent)
        }
    }

    pub fn to_rational(&self) -> ExactRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as usize)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::one() << (-self.exponent) as usize)
        }
    }

    /// Exact conversion; `None` when the denominator is not a power of two.
    pub fn from_rational_exact(x: &ExactRational) -> Option<Dyadic> {
        let den = x.denom();
        let tz = den.trailing_zeros().unwrap_or(0);
        if (den >> tz).is_one() {
            Some(Dyadic::new(x.numer().clone(), -(tz as i64)))
        } else {
            None
        }
    }

    /// Rounds a rational to a dyadic with at most `precision` mantissa bits,
    /// below `x` for [`Direction::Down`] and above it for [`Direction::Up`].
    pub fn from_rational(x: &ExactRational, direction: Direction, precision: u32) -> Dyadic {
        assert!(precision >= 1, "precision must be positive");
        if x.is_zero() {
            return Dyadic::zero();
        }
        let negative = x.is_negative();
        let num = x.numer().abs();
        let den = x.denom().clone();
        let l = floor_log2_rational(x).expect("nonzero");
        let k = precision as i64 - 1 - l;
        let (q, r) = if k >= 0 {
            (&num << k as usize).div_rem(&den)
        } else {
            num.div_rem(&(&den << (-k) as usize))
        };
        let magnitude_up = !matches!((direction, negative), (Direction::Down, false) | (Direction::Up, true));
        let q = if !r.is_zero() && magnitude_up { q + 1 } else { q };
        let m = if negative { -q } else { q };
        Dyadic::new(m, -k)
    }

    /// Rounds to at most `bits` mantissa bits in the given direction.
    pub fn round_bits(&self, bits: u32, direction: Direction) -> Dyadic {
        let have = self.mantissa_bits();
        if have <= bits as u64 {
            return self.clone();
        }
        let shift = have - bits as u64;
        let mag = self.mantissa.abs();
        let q = &mag >> shift as usize;
        let exact = (&q << shift as usize) == mag;
        let magnitude_up = !matches!(
            (direction, self.is_negative()),
            (Direction::Down, false) | (Direction::Up, true)
        );
        let q = if !exact && magnitude_up { q + 1 } else { q };
        let m = if self.is_negative() { -q } else { q };
        Dyadic::new(m, self.exponent + shift as i64)
    }

    /// `floor(x / 2^e)` as an integer.
    pub fn floor_div_pow2(&self, e: i64) -> BigInt {
        let shift = e - self.exponent;
        if shift <= 0 {
            &self.mantissa << (-shift) as usize
        } else {
            // BigInt >> rounds toward negative infinity.
            &self.mantissa >> shift as usize
        }
    }

    /// True when `x` is an integer multiple of `2^e`.
    pub fn is_multiple_of_pow2(&self, e: i64) -> bool {
        self.is_zero() || self.exponent >= e
    }

    pub fn cmp_rational(&self, r: &ExactRational) -> Ordering {
        // m * 2^e vs p / q  <=>  m * q * 2^e vs p
        let lhs = &self.mantissa * r.denom();
        let rhs = r.numer().clone();
        if self.exponent >= 0 {
            (lhs << self.exponent as usize).cmp(&rhs)
        } else {
            lhs.cmp(&(rhs << (-self.exponent) as usize))
        }
    }

    /// Lossy conversion for display and sampling only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        let bits = self.mantissa_bits() as i64;
        if bits > 60 {
            let shift = bits - 60;
            let m = (&self.mantissa >> shift as usize).to_f64().unwrap_or(f64::NAN);
            m * 2f64.powi((self.exponent + shift).clamp(-2000, 2000) as i32)
        } else {
            let m = self.mantissa.to_f64().unwrap_or(f64::NAN);
            m * 2f64.powi(self.exponent.clamp(-2000, 2000) as i32)
        }
    }

    pub fn min(self, other: Dyadic) -> Dyadic {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.signum().cmp(&other.signum()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        if self.is_zero() {
            return Ordering::Equal;
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &'a Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exponent.min(rhs.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &rhs.mantissa << (rhs.exponent - e) as usize;
        Dyadic::new(a + b, e)
    }
}

impl<'a> Sub<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &'a Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a Dyadic> for &'a Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &'a Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -&self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// `m b e` rendering, e.g. `5b-1` for 2.5. This is the authoritative text form.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}b{}", self.mantissa, self.exponent)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `floor(log2 |x|)`, or `None` for zero.
pub fn floor_log2_rational(x: &ExactRational) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let num = x.numer().abs();
    let den = x.denom();
    let mut l = num.bits() as i64 - den.bits() as i64;
    let below = if l >= 0 {
        num < (den << l as usize)
    } else {
        (&num << (-l) as usize) < *den
    };
    if below {
        l -= 1;
    }
    Some(l)
}

/// Exact decimal rendering of a dyadic (always finite).
pub fn dyadic_to_decimal(d: &Dyadic) -> String {
    if d.exponent >= 0 {
        return (d.mantissa.clone() << d.exponent as usize).to_string();
    }
    // m / 2^k = m * 5^k / 10^k
    let k = (-d.exponent) as usize;
    let scaled = d.mantissa.abs() * num_traits::pow(BigInt::from(5), k);
    let mut digits = scaled.to_string();
    if digits.len() <= k {
        digits = "0".repeat(k + 1 - digits.len()) + &digits;
    }
    let (int, frac) = digits.split_at(digits.len() - k);
    let frac = frac.trim_end_matches('0');
    let sign = if d.is_negative() { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Short decimal rendering: exact when it has at most `max_digits` significant
/// digits, otherwise rounded in `direction` and prefixed with `~`.
pub fn dyadic_to_short_decimal(d: &Dyadic, direction: Direction, max_digits: usize) -> String {
    let exact = dyadic_to_decimal(d);
    let significant = exact
        .chars()
        .filter(|c| c.is_ascii_digit())
        .collect::<String>()
        .trim_start_matches('0')
        .len();
    if significant <= max_digits {
        return exact;
    }
    // Round to `max_digits` significant decimal digits in the requested direction.
    let r = d.to_rational();
    let mag = r.abs();
    let mut k: i64 = 0; // 10^k <= mag < 10^(k+1)
    let pow10 = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(num_traits::pow(BigInt::from(10), k as usize))
        } else {
            BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), (-k) as usize))
        }
    };
    while pow10(k) > mag {
        k -= 1;
    }
    while pow10(k + 1) <= mag {
        k += 1;
    }
    let scale = pow10(max_digits as i64 - 1 - k);
    let scaled = &r * &scale;
    let n = match direction {
        Direction::Down => scaled.floor(),
        Direction::Up => scaled.ceil(),
    };
    let value = n / scale;
    let mut s = rational_to_decimal_exact(&value);
    s.insert(0, '~');
    s
}

fn rational_to_decimal_exact(r: &ExactRational) -> String {
    // Only used on values with denominators 2^a 5^b.
    let den = r.denom().clone();
    let mut k = 0usize;
    let mut p10 = BigInt::one();
    while !(&p10 % &den).is_zero() {
        p10 *= 10;
        k += 1;
        if k > 4000 {
            break;
        }
    }
    let n = r.numer() * (&p10 / &den);
    let neg = n.is_negative();
    let mut digits = n.abs().to_string();
    if k == 0 {
        return if neg { format!("-{digits}") } else { digits };
    }
    if digits.len() <= k {
        digits = "0".repeat(k + 1 - digits.len()) + &digits;
    }
    let (int, frac) = digits.split_at(digits.len() - k);
    let frac = frac.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed number literal `{text}` at offset {position}: {message}")]
pub struct NumberError {
    pub text: String,
    pub position: usize,
    pub message: String,
}

/// Parses a number literal: optional sign, digits with an optional fraction,
/// then an optional decimal (`e`) or binary (`b`) exponent.
pub fn parse_number(text: &str) -> Result<ExactRational, NumberError> {
    let err = |position: usize, message: &str| NumberError {
        text: text.to_string(),
        position,
        message: message.to_string(),
    };
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut negative = false;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        negative = bytes[i] == b'-';
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let int_digits = &text[int_start..i];
    let mut frac_digits = "";
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let fs = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        frac_digits = &text[fs..i];
    }
    if int_digits.is_empty() && frac_digits.is_empty() {
        return Err(err(int_start, "expected digits"));
    }
    let mut dec_exp: i64 = 0;
    let mut bin_exp: i64 = 0;
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E' | b'b' | b'B') {
        let binary = matches!(bytes[i], b'b' | b'B');
        i += 1;
        let es = i;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let ds = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if ds == i {
            return Err(err(ds, "expected exponent digits"));
        }
        let v: i64 = text[es..i].parse().map_err(|_| err(es, "exponent out of range"))?;
        if binary {
            bin_exp = v;
        } else {
            dec_exp = v;
        }
    }
    if i != bytes.len() {
        return Err(err(i, "unexpected character"));
    }
    let digits = format!("{int_digits}{frac_digits}");
    let mantissa: BigInt = digits.parse().map_err(|_| err(int_start, "bad digits"))?;
    let dec_exp = dec_exp - frac_digits.len() as i64;
    if dec_exp.unsigned_abs() > 100_000 || bin_exp.unsigned_abs() > 1_000_000 {
        return Err(err(int_start, "exponent out of range"));
    }
    let mut value = BigRational::from_integer(mantissa);
    let ten = BigInt::from(10);
    if dec_exp >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, dec_exp as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-dec_exp) as usize));
    }
    if bin_exp >= 0 {
        value *= BigRational::from_integer(BigInt::one() << bin_exp as usize);
    } else {
        value /= BigRational::from_integer(BigInt::one() << (-bin_exp) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Renders a rational as `p/q` (or `p` for integers); accepted by [`parse_rational`].
pub fn rational_to_string(r: &ExactRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(text: &str) -> Option<ExactRational> {
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.parse().ok()?;
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => Some(BigRational::from_integer(text.parse().ok()?)),
    }
}

/// Parses the `m b e` rendering produced by `Display`.
pub fn parse_dyadic(text: &str) -> Option<Dyadic> {
    let (m, e) = text.split_once('b')?;
    Some(Dyadic::new(m.parse().ok()?, e.parse().ok()?))
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn dyadic() -> impl Strategy<Value = Dyadic> {
        (any::<i64>(), -200i64..200).prop_map(|(m, e)| Dyadic::new(BigInt::from(m), e))
    }

    proptest! {
        #[test]
        fn arithmetic_matches_rationals(a in dyadic(), b in dyadic()) {
            let (x, y) = (a.to_rational(), b.to_rational());
            prop_assert_eq!((&a + &b).to_rational(), &x + &y);
            prop_assert_eq!((&a - &b).to_rational(), &x - &y);
            prop_assert_eq!((&a * &b).to_rational(), &x * &y);
            prop_assert_eq!(a.cmp(&b), x.cmp(&y));
        }

        #[test]
        fn canonical_form_is_unique(m in any::<i32>(), e in -100i64..100, k in 0usize..40) {
            let a = Dyadic::new(BigInt::from(m), e);
            let b = Dyadic::new(BigInt::from(m) << k, e - k as i64);
            prop_assert_eq!(&a, &b);
            prop_assert!(a.is_zero() || a.mantissa().is_odd());
        }

        #[test]
        fn rational_rounding_brackets(n in any::<i64>(), d in 1i64..1_000_000, p in 2u32..80) {
            let x = ExactRational::new(BigInt::from(n), BigInt::from(d));
            let lo = Dyadic::from_rational(&x, Direction::Down, p);
            let hi = Dyadic::from_rational(&x, Direction::Up, p);
            prop_assert!(lo.to_rational() <= x && x <= hi.to_rational());
            prop_assert!(lo.mantissa_bits() <= p as u64 && hi.mantissa_bits() <= p as u64);
        }

        #[test]
        fn round_bits_is_directed(a in dyadic(), b in 1u32..64) {
            let d = a.round_bits(b, Direction::Down);
            let u = a.round_bits(b, Direction::Up);
            prop_assert!(d <= a && a <= u);
            prop_assert!(d.mantissa_bits() <= b as u64 && u.mantissa_bits() <= b as u64);
        }

        #[test]
        fn text_round_trip(a in dyadic()) {
            prop_assert_eq!(parse_dyadic(&a.to_string()), Some(a.clone()));
            prop_assert_eq!(parse_number(&dyadic_to_decimal(&a)).unwrap(), a.to_rational());
        }
    }
}
