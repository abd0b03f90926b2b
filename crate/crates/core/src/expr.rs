//! Hash-consed expression DAG.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::dyadic::{Dyadic, ExactRational};
use crate::formats::{Format, RelKind, RelOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprId(pub u32);

impl ExprId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Const(ExactRational),
    Var(String),
    Neg(ExprId),
    Abs(ExprId),
    Sqrt(ExprId),
    Add(ExprId, ExprId),
    Sub(ExprId, ExprId),
    Mul(ExprId, ExprId),
    Div(ExprId, ExprId),
    Fma(ExprId, ExprId, ExprId),
    Round(Format, ExprId),
    Rel(RelOp, ExprId, ExprId),
}

impl Node {
    pub fn children(&self) -> Vec<ExprId> {
        match *self {
            Node::Const(_) | Node::Var(_) => vec![],
            Node::Neg(a) | Node::Abs(a) | Node::Sqrt(a) | Node::Round(_, a) => vec![a],
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Rel(_, a, b) => vec![a, b],
            Node::Fma(a, b, c) => vec![a, b, c],
        }
    }
}

/// Interning arena. Nodes are never removed, so ids are stable and children
/// always have smaller ids than their parents.
#[derive(Clone, Debug, Default)]
pub struct Arena {
    nodes: Vec<Node>,
    index: HashMap<Node, ExprId>,
    names: HashMap<ExprId, String>,
    format_names: HashMap<Format, String>,
}

impl Arena {
    pub fn new() -> Self {
        Arena::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intern(&mut self, node: Node) -> ExprId {
        // constant folding keeps `-2` and the literal `-2` identical
        let node = match node {
            Node::Neg(a) => match &self.nodes[a.index()] {
                Node::Const(c) => Node::Const(-c),
                _ => node,
            },
            other => other,
        };
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = ExprId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn lookup(&self, node: &Node) -> Option<ExprId> {
        self.index.get(node).copied()
    }

    pub fn node(&self, id: ExprId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = ExprId> {
        (0..self.nodes.len() as u32).map(ExprId)
    }

    pub fn constant(&mut self, c: ExactRational) -> ExprId {
        self.intern(Node::Const(c))
    }

    pub fn int(&mut self, v: i64) -> ExprId {
        self.constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn var(&mut self, name: &str) -> ExprId {
        self.intern(Node::Var(name.to_string()))
    }

    pub fn is_const(&self, id: ExprId, v: i64) -> bool {
        matches!(self.node(id), Node::Const(c) if *c == BigRational::from_integer(BigInt::from(v)))
    }

    /// Attaches a display name; the first name given to a node wins.
    pub fn name(&mut self, id: ExprId, name: &str) {
        self.names.entry(id).or_insert_with(|| name.to_string());
    }

    pub fn name_of(&self, id: ExprId) -> Option<&str> {
        self.names.get(&id).map(String::as_str)
    }

    pub fn name_format(&mut self, f: Format, name: &str) {
        self.format_names.entry(f).or_insert_with(|| name.to_string());
    }

    /// Readable rendering using alias names.
    pub fn display(&self, id: ExprId) -> String {
        let mut out = String::new();
        self.write(id, 0, true, false, &mut out);
        out
    }

    /// Rendering of the node itself with alias names for its children.
    pub fn display_top(&self, id: ExprId) -> String {
        let mut out = String::new();
        self.write(id, 0, true, true, &mut out);
        out
    }

    /// Rendering without alias names; reparses to the same node.
    pub fn to_source(&self, id: ExprId) -> String {
        let mut out = String::new();
        self.write(id, 0, false, false, &mut out);
        out
    }

    fn write(&self, id: ExprId, ctx: u8, names: bool, top: bool, out: &mut String) {
        if names && !top {
            if let Some(n) = self.names.get(&id) {
                out.push_str(n);
                return;
            }
        }
        // ctx: 0 anywhere, 1 right of `-`, 2 operand of `*`, 3 right of `/`, 4 unary
        let prec = self.precedence(id);
        let needs = match ctx {
            0 => false,
            1 => prec <= 1,
            2 => prec <= 1,
            3 => prec <= 2,
            _ => prec <= 3,
        };
        if needs {
            out.push('(');
        }
        match self.node(id) {
            Node::Const(c) => out.push_str(&constant_literal(c)),
            Node::Var(v) => out.push_str(v),
            Node::Neg(a) => {
                out.push('-');
                self.write(*a, 4, names, false, out);
            }
            Node::Abs(a) => {
                out.push('|');
                self.write(*a, 0, names, false, out);
                out.push('|');
            }
            Node::Sqrt(a) => {
                out.push_str("sqrt(");
                self.write(*a, 0, names, false, out);
                out.push(')');
            }
            Node::Add(a, b) => {
                self.write(*a, 0, names, false, out);
                out.push_str(" + ");
                self.write(*b, 1, names, false, out);
            }
            Node::Sub(a, b) => {
                self.write(*a, 0, names, false, out);
                out.push_str(" - ");
                self.write(*b, 1, names, false, out);
            }
            Node::Mul(a, b) => {
                self.write(*a, 2, names, false, out);
                out.push_str(" * ");
                self.write(*b, 3, names, false, out);
            }
            Node::Div(a, b) => {
                self.write(*a, 2, names, false, out);
                out.push_str(" / ");
                self.write(*b, 3, names, false, out);
            }
            Node::Fma(a, b, c) => {
                out.push_str("fma(");
                self.write(*a, 0, names, false, out);
                out.push_str(", ");
                self.write(*b, 0, names, false, out);
                out.push_str(", ");
                self.write(*c, 0, names, false, out);
                out.push(')');
            }
            Node::Round(f, a) => {
                match self.format_names.get(f) {
                    Some(n) if names => out.push_str(n),
                    _ => out.push_str(&format_syntax(f)),
                }
                out.push('(');
                self.write(*a, 0, names, false, out);
                out.push(')');
            }
            Node::Rel(op, a, b) => {
                let _ = write!(out, "{op}(");
                self.write(*a, 0, names, false, out);
                out.push_str(", ");
                self.write(*b, 0, names, false, out);
                out.push(')');
            }
        }
        if needs {
            out.push(')');
        }
    }

    fn precedence(&self, id: ExprId) -> u8 {
        match self.node(id) {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if c.is_negative() => 3,
            _ => 4,
        }
    }

    /// Exact value under a valuation of the free variables. `None` when a
    /// variable is missing, a divisor vanishes, a square root is irrational,
    /// or an under-specified operator is reached.
    pub fn eval(&self, id: ExprId, env: &HashMap<String, ExactRational>) -> Option<ExactRational> {
        let mut cache = HashMap::new();
        self.eval_cached(id, env, &mut cache)
    }

    pub fn eval_cached(
        &self,
        id: ExprId,
        env: &HashMap<String, ExactRational>,
        cache: &mut HashMap<ExprId, Option<ExactRational>>,
    ) -> Option<ExactRational> {
        if let Some(v) = cache.get(&id) {
            return v.clone();
        }
        let mut ev = |e: ExprId| self.eval_cached(e, env, cache);
        let v = match self.node(id).clone() {
            Node::Const(c) => Some(c),
            Node::Var(v) => env.get(&v).cloned(),
            Node::Neg(a) => ev(a).map(|x| -x),
            Node::Abs(a) => ev(a).map(|x| x.abs()),
            Node::Sqrt(a) => ev(a).and_then(|x| rational_sqrt(&x)),
            Node::Add(a, b) => ev(a).and_then(|x| ev(b).map(|y| x + y)),
            Node::Sub(a, b) => ev(a).and_then(|x| ev(b).map(|y| x - y)),
            Node::Mul(a, b) => ev(a).and_then(|x| ev(b).map(|y| x * y)),
            Node::Div(a, b) => ev(a).and_then(|x| ev(b).and_then(|y| if y.is_zero() { None } else { Some(x / y) })),
            Node::Fma(a, b, c) => ev(a).and_then(|x| ev(b).and_then(|y| ev(c).map(|z| x * y + z))),
            Node::Round(f, a) => ev(a).map(|x| f.round_rational(&x).to_rational()),
            Node::Rel(..) => None,
        };
        cache.insert(id, v.clone());
        v
    }

    /// Free variable names in first-occurrence order.
    pub fn free_vars(&self, id: ExprId) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(e) = stack.pop() {
            if !seen.insert(e) {
                continue;
            }
            if let Node::Var(v) = self.node(e) {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            let mut ch = self.node(e).children();
            ch.reverse();
            stack.extend(ch);
        }
        out
    }

    /// Whether `sub` occurs in the tree of `id`.
    pub fn contains(&self, id: ExprId, sub: ExprId) -> bool {
        if id == sub {
            return true;
        }
        if id < sub {
            return false;
        }
        self.node(id).children().into_iter().any(|c| self.contains(c, sub))
    }
}

fn rational_sqrt(x: &ExactRational) -> Option<ExactRational> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    (&n * &n == *x.numer() && &d * &d == *x.denom()).then(|| BigRational::new(n, d))
}

/// Literal text for a constant that reparses to the same rational.
pub fn constant_literal(c: &ExactRational) -> String {
    if c.is_integer() {
        return c.numer().to_string();
    }
    if let Some(d) = Dyadic::from_rational_exact(c) {
        return format!("{}b{}", d.mantissa(), d.exponent());
    }
    // denominators of literals divide a power of ten
    let mut den = c.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("({}/{})", c.numer(), c.denom());
    }
    let k = twos.max(fives);
    let scaled = c * BigRational::from_integer(num_traits::pow(BigInt::from(10), k as usize));
    let digits = scaled.to_integer().abs().to_string();
    let k = k as usize;
    let padded = format!("{digits:0>width$}", width = k + 1);
    let (int, frac) = padded.split_at(padded.len() - k);
    let sign = if c.is_negative() { "-" } else { "" };
    format!("{sign}{int}.{frac}")
}

pub fn format_syntax(f: &Format) -> String {
    use crate::formats::FormatKind;
    match f.kind {
        FormatKind::Float {
            precision,
            min_exponent,
        } => format!("float<{precision},{min_exponent},{}>", f.direction),
        FormatKind::Fixed { lsb } => format!("fixed<{lsb},{}>", f.direction),
    }
}

/// The exact operation an under-specified operator approximates.
pub fn rel_exact_node(kind: RelKind, a: ExprId, b: ExprId) -> Node {
    match kind {
        RelKind::Add => Node::Add(a, b),
        RelKind::Sub => Node::Sub(a, b),
        RelKind::Mul => Node::Mul(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::parse_number;
    use crate::formats::RoundingDirection;

    fn q(s: &str) -> ExactRational {
        parse_number(s).unwrap()
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let mut a = Arena::new();
        let x = a.var("x");
        let one = a.int(1);
        let s1 = a.intern(Node::Sub(one, x));
        let m1 = a.intern(Node::Mul(x, s1));
        let s2 = a.intern(Node::Sub(one, x));
        let m2 = a.intern(Node::Mul(x, s2));
        assert_eq!(m1, m2);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn negated_constants_fold() {
        let mut a = Arena::new();
        let two = a.int(2);
        let n = a.intern(Node::Neg(two));
        assert_eq!(n, a.int(-2));
    }

    #[test]
    fn rendering() {
        let mut a = Arena::new();
        let x = a.var("x");
        let y = a.var("y");
        let s = a.intern(Node::Sub(x, y));
        let d = a.intern(Node::Div(s, y));
        assert_eq!(a.display(d), "(x - y) / y");
        let s2 = a.intern(Node::Sub(x, s));
        assert_eq!(a.display(s2), "x - (x - y)");
        let f = Format::float(24, -149, RoundingDirection::Ne);
        let r = a.intern(Node::Round(f, s));
        assert_eq!(a.to_source(r), "float<24,-149,ne>(x - y)");
        a.name_format(f, "rnd");
        assert_eq!(a.display(r), "rnd(x - y)");
        a.name(s, "e");
        assert_eq!(a.display(r), "rnd(e)");
        assert_eq!(a.display_top(s), "x - y");
    }

    #[test]
    fn literals_round_trip() {
        for s in ["1.3", "0.0217", "-2.5", "3", "0.1"] {
            let c = q(s);
            assert_eq!(q(&constant_literal(&c)), c, "{s}");
        }
        assert_eq!(constant_literal(&q("1b-26")), "1b-26");
        assert_eq!(constant_literal(&q("0.0217")), "0.0217");
    }

    #[test]
    fn evaluation() {
        let mut a = Arena::new();
        let x = a.var("x");
        let f = Format::fixed(0, RoundingDirection::Dn);
        let r = a.intern(Node::Round(f, x));
        let d = a.intern(Node::Sub(r, x));
        let env: HashMap<_, _> = [("x".to_string(), q("1.3"))].into();
        assert_eq!(a.eval(d, &env), Some(q("-0.3")));
        let four = a.int(4);
        let s = a.intern(Node::Sqrt(four));
        assert_eq!(a.eval(s, &env), Some(q("2")));
        let two = a.int(2);
        let s2 = a.intern(Node::Sqrt(two));
        assert_eq!(a.eval(s2, &env), None);
    }
}
