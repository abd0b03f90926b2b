//! Built-in rewriting rules and the pattern matcher.
//!
//! Metavariables `a b c d` match any expression. `A` and `B` stand for
//! expressions related to `a` and `b` by the approximation registry: when
//! the lowercase letter is bound, the uppercase one ranges over what it
//! approximates, and conversely.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::expr::{Arena, ExprId, Node};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pat {
    Var(char),
    Const(i64),
    Neg(Box<Pat>),
    Sqrt(Box<Pat>),
    Add(Box<Pat>, Box<Pat>),
    Sub(Box<Pat>, Box<Pat>),
    Mul(Box<Pat>, Box<Pat>),
    Div(Box<Pat>, Box<Pat>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleGuard {
    /// The two sides must be different nodes.
    Distinct(Pat, Pat),
    /// The binding must not be the constant 1.
    NotOne(char),
    NonZero(Pat),
    NonNeg(Pat),
    Positive(Pat),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardKind {
    NonZero,
    NonNeg,
    Positive,
}

impl GuardKind {
    pub fn name(self) -> &'static str {
        match self {
            GuardKind::NonZero => "nonzero",
            GuardKind::NonNeg => "nonneg",
            GuardKind::Positive => "positive",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "nonzero" => Some(GuardKind::NonZero),
            "nonneg" => Some(GuardKind::NonNeg),
            "positive" => Some(GuardKind::Positive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub name: &'static str,
    pub lhs: Pat,
    pub rhs: Pat,
    pub guards: Vec<RuleGuard>,
}

impl Rule {
    /// Semantic guards as (kind, pattern), in declaration order.
    pub fn semantic_guards(&self) -> Vec<(GuardKind, &Pat)> {
        self.guards
            .iter()
            .filter_map(|g| match g {
                RuleGuard::NonZero(p) => Some((GuardKind::NonZero, p)),
                RuleGuard::NonNeg(p) => Some((GuardKind::NonNeg, p)),
                RuleGuard::Positive(p) => Some((GuardKind::Positive, p)),
                _ => None,
            })
            .collect()
    }
}

// (name, before, after, guards). Guards: `x!=y` distinct, `x!=1` not the
// constant one, `nz:p` nonzero, `ge:p` nonnegative, `gt:p` positive.
const TABLE: &[(&str, &str, &str, &str)] = &[
    ("opp_mibs", "-a - -b", "-(a - b)", "a!=b"),
    ("opp_mibq", "(-a - -b) / -b", "(a - b) / b", "nz:b a!=b"),
    ("add_xals", "a + b", "(a - A) + (A + b)", ""),
    ("add_xars", "c + a", "(c + A) + (a - A)", ""),
    ("add_mibs", "(a + b) - (c + d)", "(a - c) + (b - d)", "a!=c b!=d"),
    ("add_fils", "(a + b) - (a + c)", "b - c", "b!=c"),
    ("add_firs", "(a + b) - (c + b)", "a - c", "a!=c"),
    ("sub_xals", "a - b", "(a - A) + (A - b)", "a!=b A!=b"),
    ("sub_xars", "b - a", "(b - A) + -(a - A)", "b!=a"),
    ("sub_mibs", "(a - b) - (c - d)", "(a - c) + -(b - d)", "a!=c b!=d"),
    ("sub_fils", "(a - b) - (a - c)", "-(b - c)", "b!=c"),
    ("sub_firs", "(a - b) - (c - b)", "a - c", "a!=c"),
    ("mul_xals", "a * b", "(a - A) * b + A * b", ""),
    ("mul_xars", "b * a", "b * (a - A) + b * A", ""),
    ("mul_fils", "a * b - a * c", "a * (b - c)", "b!=c"),
    ("mul_firs", "a * c - b * c", "(a - b) * c", "a!=b"),
    ("mul_mars", "a * b - c * d", "a * (b - d) + (a - c) * d", "a!=c b!=d"),
    ("mul_mals", "a * b - c * d", "(a - c) * b + c * (b - d)", "a!=c b!=d"),
    (
        "mul_mabs",
        "a * b - c * d",
        "a * (b - d) + (a - c) * b + -((a - c) * (b - d))",
        "a!=c b!=d",
    ),
    (
        "mul_mibs",
        "a * b - c * d",
        "c * (b - d) + (a - c) * d + (a - c) * (b - d)",
        "a!=c b!=d",
    ),
    ("mul_filq", "(a * b - a * c) / (a * c)", "(b - c) / c", "nz:a nz:c b!=c"),
    ("mul_firq", "(a * b - c * b) / (c * b)", "(a - c) / c", "nz:b nz:c a!=c"),
    (
        "div_mibq",
        "(a / b - c / d) / (c / d)",
        "((a - c) / c - (b - d) / d) / (1 + (b - d) / d)",
        "nz:b nz:c nz:d b!=d",
    ),
    ("div_firq", "(a / b - c / b) / (c / b)", "(a - c) / c", "nz:b nz:c a!=c"),
    (
        "sqrt_mibs",
        "sqrt(a) - sqrt(b)",
        "(a - b) / (sqrt(a) + sqrt(b))",
        "ge:a ge:b a!=b",
    ),
    (
        "sqrt_mibq",
        "(sqrt(a) - sqrt(b)) / sqrt(b)",
        "sqrt(1 + (a - b) / b) - 1",
        "ge:a gt:b a!=b",
    ),
    ("sub_xebs", "b - A", "(b - a) + (a - A)", "A!=b a!=b"),
    ("err_fabq", "1 + (a - b) / b", "a / b", "nz:b a!=b"),
    ("val_xabs", "a", "A + (a - A)", ""),
    ("val_xebs", "A", "a + -(a - A)", ""),
    ("val_xabq", "a", "A * (1 + (a - A) / A)", "nz:A"),
    ("val_xebq", "A", "a / (1 + (a - A) / A)", "nz:a nz:A"),
    ("square_sqrt", "sqrt(a) * sqrt(a)", "a", "ge:a"),
    ("addf_1", "a / (a + b)", "1 / (1 + b / a)", "nz:a nz:a+b a!=1"),
    ("addf_2", "a / (a + b)", "1 - 1 / (1 + a / b)", "nz:b nz:a+b a!=1"),
    ("addf_3", "a / (a - b)", "1 / (1 - b / a)", "nz:a nz:a-b a!=1"),
    ("addf_4", "a / (a - b)", "1 + 1 / (a / b - 1)", "nz:b nz:a-b a!=1"),
];

pub fn rules() -> &'static [Rule] {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    RULES.get_or_init(|| {
        TABLE
            .iter()
            .map(|(name, lhs, rhs, guards)| Rule {
                name,
                lhs: parse_pattern(lhs),
                rhs: parse_pattern(rhs),
                guards: guards.split_whitespace().map(parse_guard).collect(),
            })
            .collect()
    })
}

pub fn rule(name: &str) -> Option<&'static Rule> {
    rules().iter().find(|r| r.name == name)
}

fn parse_guard(s: &str) -> RuleGuard {
    if let Some(p) = s.strip_prefix("nz:") {
        RuleGuard::NonZero(parse_pattern(p))
    } else if let Some(p) = s.strip_prefix("ge:") {
        RuleGuard::NonNeg(parse_pattern(p))
    } else if let Some(p) = s.strip_prefix("gt:") {
        RuleGuard::Positive(parse_pattern(p))
    } else if let Some((l, r)) = s.split_once("!=") {
        if r == "1" {
            RuleGuard::NotOne(l.chars().next().unwrap())
        } else {
            RuleGuard::Distinct(parse_pattern(l), parse_pattern(r))
        }
    } else {
        panic!("bad guard {s}")
    }
}

/// Parser for the small pattern language used in the rule table.
pub fn parse_pattern(s: &str) -> Pat {
    let toks: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let p = pat_sum(&toks, &mut pos);
    assert_eq!(pos, toks.len(), "trailing input in pattern {s}");
    p
}

fn pat_sum(t: &[char], pos: &mut usize) -> Pat {
    let mut lhs = pat_prod(t, pos);
    while *pos < t.len() && matches!(t[*pos], '+' | '-') {
        let op = t[*pos];
        *pos += 1;
        let rhs = pat_prod(t, pos);
        lhs = if op == '+' {
            Pat::Add(Box::new(lhs), Box::new(rhs))
        } else {
            Pat::Sub(Box::new(lhs), Box::new(rhs))
        };
    }
    lhs
}

fn pat_prod(t: &[char], pos: &mut usize) -> Pat {
    let mut lhs = pat_unary(t, pos);
    while *pos < t.len() && matches!(t[*pos], '*' | '/') {
        let op = t[*pos];
        *pos += 1;
        let rhs = pat_unary(t, pos);
        lhs = if op == '*' {
            Pat::Mul(Box::new(lhs), Box::new(rhs))
        } else {
            Pat::Div(Box::new(lhs), Box::new(rhs))
        };
    }
    lhs
}

fn pat_unary(t: &[char], pos: &mut usize) -> Pat {
    match t[*pos] {
        '-' => {
            *pos += 1;
            Pat::Neg(Box::new(pat_unary(t, pos)))
        }
        '(' => {
            *pos += 1;
            let p = pat_sum(t, pos);
            assert_eq!(t[*pos], ')');
            *pos += 1;
            p
        }
        c if c.is_ascii_digit() => {
            *pos += 1;
            Pat::Const(c.to_digit(10).unwrap() as i64)
        }
        's' if t.get(*pos + 1) == Some(&'q') => {
            *pos += 4;
            assert_eq!(t[*pos], '(');
            *pos += 1;
            let p = pat_sum(t, pos);
            assert_eq!(t[*pos], ')');
            *pos += 1;
            Pat::Sqrt(Box::new(p))
        }
        c if c.is_ascii_alphabetic() => {
            *pos += 1;
            Pat::Var(c)
        }
        c => panic!("bad pattern character {c}"),
    }
}

/// Metavariable bindings, indexed `a b c d A B`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bindings(pub [Option<ExprId>; 6]);

pub const METAVARS: [char; 6] = ['a', 'b', 'c', 'd', 'A', 'B'];

fn slot(v: char) -> usize {
    METAVARS.iter().position(|&m| m == v).expect("metavariable")
}

impl Bindings {
    pub fn get(&self, v: char) -> Option<ExprId> {
        self.0[slot(v)]
    }

    pub fn set(&mut self, v: char, e: ExprId) {
        self.0[slot(v)] = Some(e);
    }

    pub fn bound(&self) -> Vec<(char, ExprId)> {
        METAVARS
            .iter()
            .zip(self.0.iter())
            .filter_map(|(&c, e)| e.map(|e| (c, e)))
            .collect()
    }
}

/// Approximation relation seen by the matcher.
pub trait Approximations {
    /// Expressions `X` such that `e` approximates `X`.
    fn approximated(&self, e: ExprId) -> Vec<ExprId>;
    /// Expressions `x` that approximate `e`.
    fn approximants(&self, e: ExprId) -> Vec<ExprId>;
}

fn structural(arena: &Arena, p: &Pat, e: ExprId, b: &mut Bindings) -> bool {
    match p {
        Pat::Var(v) => match b.get(*v) {
            Some(x) => x == e,
            None => {
                b.set(*v, e);
                true
            }
        },
        Pat::Const(c) => arena.is_const(e, *c),
        Pat::Neg(p1) => matches!(arena.node(e), Node::Neg(x) if structural(arena, p1, *x, b)),
        Pat::Sqrt(p1) => matches!(arena.node(e), Node::Sqrt(x) if structural(arena, p1, *x, b)),
        Pat::Add(p1, p2) => {
            matches!(arena.node(e), Node::Add(x, y) if structural(arena, p1, *x, b) && structural(arena, p2, *y, b))
        }
        Pat::Sub(p1, p2) => {
            matches!(arena.node(e), Node::Sub(x, y) if structural(arena, p1, *x, b) && structural(arena, p2, *y, b))
        }
        Pat::Mul(p1, p2) => {
            matches!(arena.node(e), Node::Mul(x, y) if structural(arena, p1, *x, b) && structural(arena, p2, *y, b))
        }
        Pat::Div(p1, p2) => {
            matches!(arena.node(e), Node::Div(x, y) if structural(arena, p1, *x, b) && structural(arena, p2, *y, b))
        }
    }
}

fn vars(p: &Pat, out: &mut Vec<char>) {
    match p {
        Pat::Var(v) => {
            if !out.contains(v) {
                out.push(*v)
            }
        }
        Pat::Const(_) => {}
        Pat::Neg(a) | Pat::Sqrt(a) => vars(a, out),
        Pat::Add(a, b) | Pat::Sub(a, b) | Pat::Mul(a, b) | Pat::Div(a, b) => {
            vars(a, out);
            vars(b, out)
        }
    }
}

/// Builds the pattern instance, interning new nodes.
pub fn instantiate(arena: &mut Arena, p: &Pat, b: &Bindings) -> ExprId {
    match p {
        Pat::Var(v) => b.get(*v).expect("unbound metavariable"),
        Pat::Const(c) => arena.constant(BigRational::from_integer(BigInt::from(*c))),
        Pat::Neg(x) => {
            let x = instantiate(arena, x, b);
            arena.intern(Node::Neg(x))
        }
        Pat::Sqrt(x) => {
            let x = instantiate(arena, x, b);
            arena.intern(Node::Sqrt(x))
        }
        Pat::Add(x, y) => {
            let (x, y) = (instantiate(arena, x, b), instantiate(arena, y, b));
            arena.intern(Node::Add(x, y))
        }
        Pat::Sub(x, y) => {
            let (x, y) = (instantiate(arena, x, b), instantiate(arena, y, b));
            arena.intern(Node::Sub(x, y))
        }
        Pat::Mul(x, y) => {
            let (x, y) = (instantiate(arena, x, b), instantiate(arena, y, b));
            arena.intern(Node::Mul(x, y))
        }
        Pat::Div(x, y) => {
            let (x, y) = (instantiate(arena, x, b), instantiate(arena, y, b));
            arena.intern(Node::Div(x, y))
        }
    }
}

/// The pattern instance if every node already exists.
pub fn lookup_instance(arena: &Arena, p: &Pat, b: &Bindings) -> Option<ExprId> {
    let node = match p {
        Pat::Var(v) => return b.get(*v),
        Pat::Const(c) => Node::Const(BigRational::from_integer(BigInt::from(*c))),
        Pat::Neg(x) => Node::Neg(lookup_instance(arena, x, b)?),
        Pat::Sqrt(x) => Node::Sqrt(lookup_instance(arena, x, b)?),
        Pat::Add(x, y) => Node::Add(lookup_instance(arena, x, b)?, lookup_instance(arena, y, b)?),
        Pat::Sub(x, y) => Node::Sub(lookup_instance(arena, x, b)?, lookup_instance(arena, y, b)?),
        Pat::Mul(x, y) => Node::Mul(lookup_instance(arena, x, b)?, lookup_instance(arena, y, b)?),
        Pat::Div(x, y) => Node::Div(lookup_instance(arena, x, b)?, lookup_instance(arena, y, b)?),
    };
    arena.lookup(&node)
}

/// A successful rule application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub rule: &'static str,
    pub bindings: Bindings,
    pub rhs: ExprId,
    pub guards: Vec<(GuardKind, ExprId)>,
}

/// Whether the syntactic side conditions hold for complete bindings.
pub fn syntactic_guards_hold(arena: &Arena, rule: &Rule, b: &Bindings) -> bool {
    rule.guards.iter().all(|g| match g {
        RuleGuard::Distinct(p, q) => {
            match (lookup_instance(arena, p, b), lookup_instance(arena, q, b)) {
                (Some(x), Some(y)) => x != y,
                // a node that does not exist yet differs from any existing one
                (None, Some(_)) | (Some(_), None) => true,
                (None, None) => false,
            }
        }
        RuleGuard::NotOne(v) => b.get(*v).is_some_and(|e| !arena.is_const(e, 1)),
        _ => true,
    })
}

/// All applications of `rule` at `subject`.
pub fn apply_rule(
    arena: &mut Arena,
    rule: &'static Rule,
    subject: ExprId,
    approx: &dyn Approximations,
) -> Vec<Instance> {
    let mut b = Bindings::default();
    if !structural(arena, &rule.lhs, subject, &mut b) {
        return Vec::new();
    }
    let mut needed = Vec::new();
    vars(&rule.rhs, &mut needed);
    for g in &rule.guards {
        match g {
            RuleGuard::Distinct(p, q) => {
                vars(p, &mut needed);
                vars(q, &mut needed);
            }
            RuleGuard::NotOne(v) => needed.push(*v),
            RuleGuard::NonZero(p) | RuleGuard::NonNeg(p) | RuleGuard::Positive(p) => vars(p, &mut needed),
        }
    }
    let mut candidates = vec![b];
    for v in needed {
        let mut next = Vec::new();
        for b in candidates {
            if b.get(v).is_some() {
                next.push(b);
                continue;
            }
            let partner = if v.is_ascii_uppercase() {
                v.to_ascii_lowercase()
            } else {
                v.to_ascii_uppercase()
            };
            let Some(p) = METAVARS.contains(&partner).then(|| b.get(partner)).flatten() else {
                continue;
            };
            let options = if v.is_ascii_uppercase() {
                approx.approximated(p)
            } else {
                approx.approximants(p)
            };
            for o in options {
                let mut nb = b;
                nb.set(v, o);
                next.push(nb);
            }
        }
        candidates = next;
    }
    let mut out = Vec::new();
    for b in candidates {
        if !syntactic_guards_hold(arena, rule, &b) {
            continue;
        }
        let rhs = instantiate(arena, &rule.rhs, &b);
        if rhs == subject {
            continue;
        }
        let guards = rule
            .semantic_guards()
            .into_iter()
            .map(|(k, p)| (k, instantiate(arena, p, &b)))
            .collect();
        out.push(Instance {
            rule: rule.name,
            bindings: b,
            rhs,
            guards,
        });
    }
    out
}

/// Checks a recorded application: the left side instantiates to `subject`,
/// the right side to `rhs`, and the syntactic guards hold.
pub fn verify_instance(arena: &Arena, rule: &Rule, b: &Bindings, subject: ExprId, rhs: ExprId) -> bool {
    lookup_instance(arena, &rule.lhs, b) == Some(subject)
        && lookup_instance(arena, &rule.rhs, b) == Some(rhs)
        && syntactic_guards_hold(arena, rule, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Pairs(Vec<(ExprId, ExprId)>);

    impl Approximations for Pairs {
        fn approximated(&self, e: ExprId) -> Vec<ExprId> {
            self.0.iter().filter(|p| p.0 == e).map(|p| p.1).collect()
        }
        fn approximants(&self, e: ExprId) -> Vec<ExprId> {
            self.0.iter().filter(|p| p.1 == e).map(|p| p.0).collect()
        }
    }

    #[test]
    fn table_is_complete() {
        assert_eq!(rules().len(), 37);
        let mut names: Vec<_> = rules().iter().map(|r| r.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 37);
    }

    #[test]
    fn rounding_error_split() {
        // rnd(a + b) - (A + B) splits into a rounding error and a propagated error
        let mut ar = Arena::new();
        let a = ar.var("a");
        let b = ar.var("b");
        let big_a = ar.var("A");
        let big_b = ar.var("B");
        let s = ar.intern(Node::Add(a, b));
        let f = crate::formats::Format::float(24, -149, crate::formats::RoundingDirection::Ne);
        let r = ar.intern(Node::Round(f, s));
        let exact = ar.intern(Node::Add(big_a, big_b));
        let subject = ar.intern(Node::Sub(r, exact));
        let pairs = Pairs(vec![(r, s), (a, big_a), (b, big_b)]);
        let out = apply_rule(&mut ar, rule("sub_xals").unwrap(), subject, &pairs);
        assert_eq!(out.len(), 1);
        assert_eq!(
            ar.display(out[0].rhs),
            "float<24,-149,ne>(a + b) - (a + b) + (a + b - (A + B))"
        );
        let inner = ar.intern(Node::Sub(s, exact));
        let out = apply_rule(&mut ar, rule("add_mibs").unwrap(), inner, &pairs);
        assert_eq!(ar.display(out[0].rhs), "a - A + (b - B)");
    }

    #[test]
    fn guards() {
        let mut ar = Arena::new();
        let a = ar.var("a");
        let na = ar.intern(Node::Neg(a));
        let subject = ar.intern(Node::Sub(na, na));
        let out = apply_rule(&mut ar, rule("opp_mibs").unwrap(), subject, &Pairs(vec![]));
        assert!(out.is_empty());
        let b = ar.var("b");
        let s = ar.intern(Node::Add(a, b));
        let d = ar.intern(Node::Div(a, s));
        let out = apply_rule(&mut ar, rule("addf_1").unwrap(), d, &Pairs(vec![]));
        assert_eq!(out[0].guards, vec![(GuardKind::NonZero, a), (GuardKind::NonZero, s)]);
        let one = ar.int(1);
        let s1 = ar.intern(Node::Add(one, b));
        let d1 = ar.intern(Node::Div(one, s1));
        assert!(apply_rule(&mut ar, rule("addf_1").unwrap(), d1, &Pairs(vec![])).is_empty());
    }

    #[test]
    fn lowercase_from_uppercase() {
        let mut ar = Arena::new();
        let x = ar.var("x");
        let y = ar.var("y");
        let sub = ar.intern(Node::Sub(y, x));
        let f = crate::formats::Format::fixed(0, crate::formats::RoundingDirection::Dn);
        let fx = ar.intern(Node::Round(f, x));
        let pairs = Pairs(vec![(fx, x)]);
        let out = apply_rule(&mut ar, rule("sub_xebs").unwrap(), sub, &pairs);
        assert_eq!(out.len(), 1);
        assert_eq!(ar.display(out[0].rhs), "y - fixed<0,dn>(x) + (fixed<0,dn>(x) - x)");
        let rhs = out[0].rhs;
        assert!(verify_instance(
            &ar,
            rule("sub_xebs").unwrap(),
            &out[0].bindings,
            sub,
            rhs
        ));
        assert!(!verify_instance(
            &ar,
            rule("sub_xals").unwrap(),
            &out[0].bindings,
            sub,
            rhs
        ));
    }

    #[test]
    fn instances_preserve_value() {
        let mut ar = Arena::new();
        let names = ["a", "b", "c", "d"];
        let vs: Vec<ExprId> = names.iter().map(|n| ar.var(n)).collect();
        let upper = [ar.var("A"), ar.var("B")];
        let mut b = Bindings::default();
        for (i, v) in vs.iter().enumerate() {
            b.set(METAVARS[i], *v);
        }
        b.set('A', upper[0]);
        b.set('B', upper[1]);
        let env: HashMap<String, BigRational> = [("a", 3), ("b", 5), ("c", 7), ("d", 11), ("A", 13), ("B", 2)]
            .iter()
            .map(|(n, v)| (n.to_string(), BigRational::from_integer(BigInt::from(*v))))
            .collect();
        for r in rules()
            .iter()
            .filter(|r| !r.name.starts_with("sqrt") && r.name != "square_sqrt")
        {
            let l = instantiate(&mut ar, &r.lhs, &b);
            let rh = instantiate(&mut ar, &r.rhs, &b);
            assert_eq!(ar.eval(l, &env), ar.eval(rh, &env), "{}", r.name);
        }
    }
}
