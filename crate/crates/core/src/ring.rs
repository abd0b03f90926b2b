//! Normalization of expressions to quotients of polynomials with rational
//! coefficients. Variables and every node that is not a field operation
//! (rounding, square root, absolute value) are treated as opaque atoms.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::expr::{Arena, ExprId, Node};

/// Sorted list of (atom, exponent).
type Monomial = Vec<(ExprId, u32)>;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn atom(id: ExprId) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(id, 1)], BigRational::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let entry = terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(m);
            }
        }
        Poly { terms }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut terms = BTreeMap::new();
                terms.insert(mul_monomials(m1, m2), c1 * c2);
                out = out.add(&Poly { terms });
            }
        }
        out
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut map: BTreeMap<ExprId, u32> = a.iter().copied().collect();
    for &(v, e) in b {
        *map.entry(v).or_insert(0) += e;
    }
    map.into_iter().collect()
}

/// `num / den` with `den` never the zero polynomial.
#[derive(Clone, Debug)]
pub struct RatFn {
    pub num: Poly,
    pub den: Poly,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroDivisor(pub ExprId);

impl RatFn {
    fn poly(p: Poly) -> Self {
        RatFn {
            num: p,
            den: Poly::constant(BigRational::one()),
        }
    }

    fn add(&self, o: &RatFn) -> RatFn {
        if self.den == o.den {
            return RatFn {
                num: self.num.add(&o.num),
                den: self.den.clone(),
            };
        }
        RatFn {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }

    fn neg(&self) -> RatFn {
        RatFn {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    fn mul(&self, o: &RatFn) -> RatFn {
        RatFn {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn equals(&self, o: &RatFn) -> bool {
        self.num.mul(&o.den) == o.num.mul(&self.den)
    }
}

/// Normal form of `id`; fails on a division by an expression that
/// simplifies to zero, reporting the offending divisor.
pub fn normalize(arena: &Arena, id: ExprId) -> Result<RatFn, ZeroDivisor> {
    let mut memo = BTreeMap::new();
    norm(arena, id, &mut memo)
}

fn norm(arena: &Arena, id: ExprId, memo: &mut BTreeMap<ExprId, RatFn>) -> Result<RatFn, ZeroDivisor> {
    if let Some(r) = memo.get(&id) {
        return Ok(r.clone());
    }
    let r = match arena.node(id) {
        Node::Const(c) => RatFn::poly(Poly::constant(c.clone())),
        Node::Var(_) | Node::Abs(_) | Node::Sqrt(_) | Node::Round(..) | Node::Rel(..) => RatFn::poly(Poly::atom(id)),
        Node::Neg(a) => norm(arena, *a, memo)?.neg(),
        Node::Add(a, b) => norm(arena, *a, memo)?.add(&norm(arena, *b, memo)?),
        Node::Sub(a, b) => norm(arena, *a, memo)?.add(&norm(arena, *b, memo)?.neg()),
        Node::Mul(a, b) => norm(arena, *a, memo)?.mul(&norm(arena, *b, memo)?),
        Node::Div(a, b) => {
            let n = norm(arena, *a, memo)?;
            let d = norm(arena, *b, memo)?;
            if d.is_zero() {
                return Err(ZeroDivisor(*b));
            }
            n.mul(&RatFn { num: d.den, den: d.num })
        }
        Node::Fma(a, b, c) => {
            let p = norm(arena, *a, memo)?.mul(&norm(arena, *b, memo)?);
            p.add(&norm(arena, *c, memo)?)
        }
    };
    memo.insert(id, r.clone());
    Ok(r)
}

/// Whether two expressions are equal as rational functions.
pub fn ring_equal(arena: &Arena, a: ExprId, b: ExprId) -> bool {
    match (normalize(arena, a), normalize(arena, b)) {
        (Ok(x), Ok(y)) => x.equals(&y),
        _ => false,
    }
}

/// Divisors in the tree of `id` that normalize to zero.
pub fn zero_divisors(arena: &Arena, id: ExprId) -> Vec<ExprId> {
    let mut out = Vec::new();
    let mut stack = vec![id];
    let mut seen = std::collections::HashSet::new();
    while let Some(e) = stack.pop() {
        if !seen.insert(e) {
            continue;
        }
        if let Node::Div(_, d) = arena.node(e) {
            if matches!(normalize(arena, *d), Ok(r) if r.is_zero()) && !out.contains(d) {
                out.push(*d);
            }
        }
        stack.extend(arena.node(e).children());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arena_with(f: impl FnOnce(&mut Arena) -> (ExprId, ExprId)) -> (Arena, ExprId, ExprId) {
        let mut a = Arena::new();
        let (x, y) = f(&mut a);
        (a, x, y)
    }

    #[test]
    fn newton_identity() {
        // x*(2 - x*y) - 1/y == (x - 1/y)*(x - 1/y)*-y
        let (a, l, r) = arena_with(|a| {
            let x = a.var("x");
            let y = a.var("y");
            let two = a.int(2);
            let one = a.int(1);
            let xy = a.intern(Node::Mul(x, y));
            let t = a.intern(Node::Sub(two, xy));
            let xt = a.intern(Node::Mul(x, t));
            let inv = a.intern(Node::Div(one, y));
            let lhs = a.intern(Node::Sub(xt, inv));
            let d = a.intern(Node::Sub(x, inv));
            let dd = a.intern(Node::Mul(d, d));
            let ny = a.intern(Node::Neg(y));
            let rhs = a.intern(Node::Mul(dd, ny));
            (lhs, rhs)
        });
        assert!(ring_equal(&a, l, r));
    }

    #[test]
    fn unequal_sides() {
        let (a, l, r) = arena_with(|a| {
            let x = a.var("x");
            let y = a.var("y");
            let s = a.intern(Node::Add(x, y));
            let m = a.intern(Node::Mul(x, y));
            (s, m)
        });
        assert!(!ring_equal(&a, l, r));
    }

    #[test]
    fn trivially_zero_divisor() {
        let mut a = Arena::new();
        let x = a.var("x");
        let y = a.var("y");
        let z = a.intern(Node::Sub(x, x));
        let m = a.intern(Node::Mul(y, z));
        let d = a.intern(Node::Div(m, z));
        assert_eq!(zero_divisors(&a, d), vec![z]);
        assert_eq!(normalize(&a, d).unwrap_err(), ZeroDivisor(z));
    }

    #[test]
    fn opaque_atoms() {
        let mut a = Arena::new();
        let x = a.var("x");
        let s = a.intern(Node::Sqrt(x));
        let ss = a.intern(Node::Mul(s, s));
        assert!(!ring_equal(&a, ss, x));
        let two = a.int(2);
        let s2 = a.intern(Node::Add(s, s));
        let t = a.intern(Node::Mul(two, s));
        assert!(ring_equal(&a, s2, t));
    }
}
