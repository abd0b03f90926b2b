//! Lexer and recursive-descent parser for scripts of the form
//! `aliases { proposition } hints`.
//!
//! Precedence, loosest first: `->` (right associative), `\/`, `/\`, `not`;
//! in expressions `+ -`, then `* /`, then unary signs.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

use crate::dyadic::{parse_number, ExactRational};
use crate::expr::{Arena, ExprId, Node};
use crate::formats::{named_format, Format, RelKind, RelOp, RoundingDirection};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoundingFn {
    Format(Format),
    Rel(RelKind, u32, Option<i64>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomKind {
    In(ExactRational, ExactRational),
    Le(ExactRational),
    Ge(ExactRational),
    Query,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub expr: ExprId,
    pub kind: AtomKind,
}

impl Atom {
    pub fn is_query(&self) -> bool {
        self.kind == AtomKind::Query
    }

    pub fn display(&self, arena: &Arena) -> String {
        let e = arena.display(self.expr);
        match &self.kind {
            AtomKind::In(lo, hi) => format!("{e} in [{}, {}]", show_q(lo), show_q(hi)),
            AtomKind::Le(c) => format!("{e} <= {}", show_q(c)),
            AtomKind::Ge(c) => format!("{e} >= {}", show_q(c)),
            AtomKind::Query => format!("{e} in ?"),
        }
    }
}

fn show_q(q: &ExactRational) -> String {
    crate::expr::constant_literal(q)
        .trim_start_matches('(')
        .trim_end_matches(')')
        .to_string()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prop {
    Atom(Atom),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Impl(Box<Prop>, Box<Prop>),
    Not(Box<Prop>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BisectMode {
    Even(u32),
    Points(Vec<ExactRational>),
    Dichotomy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisectAxis {
    pub expr: ExprId,
    pub mode: BisectMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HintKind {
    Rewrite {
        lhs: ExprId,
        rhs: ExprId,
    },
    Approx {
        approx: ExprId,
        exact: ExprId,
    },
    Bisect {
        targets: Vec<ExprId>,
        axes: Vec<BisectAxis>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hint {
    pub kind: HintKind,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Script {
    pub arena: Arena,
    pub aliases: Vec<(String, ExprId)>,
    pub rounding_aliases: Vec<(String, RoundingFn)>,
    pub prop: Prop,
    pub hints: Vec<Hint>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 25] = [
    "->", "/\\", "\\/", "<=", ">=", "+", "-", "*", "/", "|", "(", ")", "[", "]", "{", "}", "<", ">", ",", ";", "=",
    "@", "$", "~", "?",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: start.0,
                column: start.1,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            let take_digits = |i: &mut usize, col: &mut usize, s: &mut String| {
                while *i < chars.len() && chars[*i].is_ascii_digit() {
                    s.push(chars[*i]);
                    *i += 1;
                    *col += 1;
                }
            };
            take_digits(&mut i, &mut col, &mut s);
            if i < chars.len() && chars[i] == '.' {
                s.push('.');
                i += 1;
                col += 1;
                take_digits(&mut i, &mut col, &mut s);
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E' | 'b' | 'B') {
                let sign = chars.get(i + 1).copied();
                let digit_at = if matches!(sign, Some('+' | '-')) { i + 2 } else { i + 1 };
                if chars.get(digit_at).is_some_and(|d| d.is_ascii_digit()) {
                    while i < digit_at {
                        s.push(chars[i]);
                        i += 1;
                        col += 1;
                    }
                    take_digits(&mut i, &mut col, &mut s);
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                return Err(ParseError {
                    line,
                    column: col,
                    message: format!("malformed number `{s}{}`", chars[i]),
                });
            }
            out.push(Token {
                tok: Tok::Number(s),
                line: start.0,
                column: start.1,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: start.0,
                    column: start.1,
                });
            }
            None => {
                return Err(ParseError {
                    line,
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[derive(Clone, Debug)]
enum Param {
    Int(BigInt),
    Name(String),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    arena: Arena,
    aliases: Vec<(String, ExprId)>,
    alias_map: HashMap<String, ExprId>,
    rounding: HashMap<String, RoundingFn>,
    rounding_list: Vec<(String, RoundingFn)>,
    free_used: HashSet<String>,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse(src: &str) -> Result<Script, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        arena: Arena::new(),
        aliases: Vec::new(),
        alias_map: HashMap::new(),
        rounding: HashMap::new(),
        rounding_list: Vec::new(),
        free_used: HashSet::new(),
    };
    p.prog()?;
    p.expect("{")?;
    let prop = p.prop()?;
    p.expect("}")?;
    let hints = p.hints()?;
    Ok(Script {
        arena: p.arena,
        aliases: p.aliases,
        rounding_aliases: p.rounding_list,
        prop,
        hints,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.column)
    }

    fn error_here<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, column) = self.here();
        Err(ParseError {
            line,
            column,
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.error_here(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            t => self.error_here(format!("expected identifier, found {t}")),
        }
    }

    fn prog(&mut self) -> PResult<()> {
        loop {
            if self.is_sym("{") {
                return Ok(());
            }
            let (line, column) = self.here();
            if self.eat("@") {
                let name = self.ident()?;
                self.check_new_name(&name, line, column + 1)?;
                self.expect("=")?;
                let f = self.function()?;
                self.expect(";")?;
                if let RoundingFn::Format(fmt) = f {
                    self.arena.name_format(fmt, &name);
                }
                self.rounding.insert(name.clone(), f);
                self.rounding_list.push((name, f));
                continue;
            }
            let name = self.ident()?;
            self.check_new_name(&name, line, column)?;
            let sugar = if self.eat("=") {
                None
            } else {
                let f = self.function()?;
                self.expect("=")?;
                Some(f)
            };
            let e = self.real(sugar)?;
            self.expect(";")?;
            self.arena.name(e, &name);
            self.alias_map.insert(name.clone(), e);
            self.aliases.push((name, e));
        }
    }

    fn check_new_name(&self, name: &str, line: usize, column: usize) -> PResult<()> {
        let message = if self.alias_map.contains_key(name) || self.rounding.contains_key(name) {
            format!("`{name}` is already aliased")
        } else if self.free_used.contains(name) {
            format!("`{name}` is aliased after being used as a free variable")
        } else {
            return Ok(());
        };
        Err(ParseError { line, column, message })
    }

    fn function(&mut self) -> PResult<RoundingFn> {
        let (line, column) = self.here();
        let name = self.ident()?;
        let mut params = Vec::new();
        if self.eat("<") {
            loop {
                let (l, c) = self.here();
                match self.peek().clone() {
                    Tok::Ident(s) => {
                        self.pos += 1;
                        params.push(Param::Name(s));
                    }
                    _ => {
                        let v = self.snumber()?;
                        if !v.is_integer() {
                            return Err(ParseError {
                                line: l,
                                column: c,
                                message: "expected an integer parameter".into(),
                            });
                        }
                        params.push(Param::Int(v.to_integer()));
                    }
                }
                if self.eat(">") {
                    break;
                }
                self.expect(",")?;
            }
        }
        resolve_function(&name, &params, &self.rounding).map_err(|message| ParseError { line, column, message })
    }

    fn snumber(&mut self) -> PResult<ExactRational> {
        let negative = if self.eat("-") {
            true
        } else {
            self.eat("+");
            false
        };
        let (line, column) = self.here();
        match self.peek().clone() {
            Tok::Number(s) => {
                self.pos += 1;
                let v = parse_number(&s).map_err(|e| ParseError {
                    line,
                    column: column + e.position,
                    message: e.message,
                })?;
                Ok(if negative { -v } else { v })
            }
            t => self.error_here(format!("expected a number, found {t}")),
        }
    }

    fn real(&mut self, sugar: Option<RoundingFn>) -> PResult<ExprId> {
        let mut lhs = self.term(sugar)?;
        loop {
            let op = if self.eat("+") {
                '+'
            } else if self.eat("-") {
                '-'
            } else {
                return Ok(lhs);
            };
            let rhs = self.term(sugar)?;
            let node = if op == '+' {
                Node::Add(lhs, rhs)
            } else {
                Node::Sub(lhs, rhs)
            };
            lhs = self.build(node, sugar)?;
        }
    }

    fn term(&mut self, sugar: Option<RoundingFn>) -> PResult<ExprId> {
        let mut lhs = self.unary(sugar)?;
        loop {
            let op = if self.eat("*") {
                '*'
            } else if self.is_sym("/") {
                self.pos += 1;
                '/'
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary(sugar)?;
            let node = if op == '*' {
                Node::Mul(lhs, rhs)
            } else {
                Node::Div(lhs, rhs)
            };
            lhs = self.build(node, sugar)?;
        }
    }

    /// Interns `node`, wrapping it in the `name rnd= ...` rounding when given.
    fn build(&mut self, node: Node, sugar: Option<RoundingFn>) -> PResult<ExprId> {
        let id = self.arena.intern(node.clone());
        Ok(match sugar {
            None => id,
            Some(RoundingFn::Format(f)) => self.arena.intern(Node::Round(f, id)),
            Some(RoundingFn::Rel(kind, p, e)) => {
                let op = RelOp {
                    kind,
                    precision: p,
                    min_exponent: e,
                };
                match (kind, node) {
                    (RelKind::Add, Node::Add(a, b))
                    | (RelKind::Sub, Node::Sub(a, b))
                    | (RelKind::Mul, Node::Mul(a, b)) => self.arena.intern(Node::Rel(op, a, b)),
                    _ => return self.error_here(format!("`{op}` cannot round this operation")),
                }
            }
        })
    }

    fn unary(&mut self, sugar: Option<RoundingFn>) -> PResult<ExprId> {
        if self.eat("-") {
            let a = self.unary(sugar)?;
            return Ok(self.arena.intern(Node::Neg(a)));
        }
        if self.eat("+") {
            return self.unary(sugar);
        }
        self.primary(sugar)
    }

    fn primary(&mut self, sugar: Option<RoundingFn>) -> PResult<ExprId> {
        let (line, column) = self.here();
        match self.peek().clone() {
            Tok::Number(_) => {
                let v = self.snumber()?;
                Ok(self.arena.constant(v))
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.real(sugar)?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Sym("|") => {
                self.pos += 1;
                let e = self.real(sugar)?;
                self.expect("|")?;
                Ok(self.arena.intern(Node::Abs(e)))
            }
            Tok::Ident(name) if name == "sqrt" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.pos += 2;
                let e = self.real(sugar)?;
                self.expect(")")?;
                self.build(Node::Sqrt(e), sugar)
            }
            Tok::Ident(name) if name == "fma" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.pos += 2;
                let a = self.real(sugar)?;
                self.expect(",")?;
                let b = self.real(sugar)?;
                self.expect(",")?;
                let c = self.real(sugar)?;
                self.expect(")")?;
                match sugar {
                    Some(RoundingFn::Rel(..)) => self.error_here("fma cannot use a relative-error operator"),
                    _ => self.build(Node::Fma(a, b, c), sugar),
                }
            }
            Tok::Ident(name) => {
                if matches!(self.peek_at(1), Tok::Sym("(") | Tok::Sym("<")) {
                    let f = self.function()?;
                    self.expect("(")?;
                    let mut args = vec![self.real(sugar)?];
                    while self.eat(",") {
                        args.push(self.real(sugar)?);
                    }
                    self.expect(")")?;
                    return match (f, args.as_slice()) {
                        (RoundingFn::Format(f), [a]) => Ok(self.arena.intern(Node::Round(f, *a))),
                        (RoundingFn::Rel(kind, p, e), [a, b]) => {
                            let op = RelOp {
                                kind,
                                precision: p,
                                min_exponent: e,
                            };
                            Ok(self.arena.intern(Node::Rel(op, *a, *b)))
                        }
                        _ => Err(ParseError {
                            line,
                            column,
                            message: format!("wrong number of arguments for `{name}`"),
                        }),
                    };
                }
                self.pos += 1;
                if matches!(name.as_str(), "in" | "not") {
                    return Err(ParseError {
                        line,
                        column,
                        message: format!("unexpected keyword `{name}`"),
                    });
                }
                if self.rounding.contains_key(&name) {
                    return Err(ParseError {
                        line,
                        column,
                        message: format!("rounding operator `{name}` used without argument"),
                    });
                }
                if let Some(&e) = self.alias_map.get(&name) {
                    return Ok(e);
                }
                self.free_used.insert(name.clone());
                Ok(self.arena.var(&name))
            }
            t => self.error_here(format!("expected an expression, found {t}")),
        }
    }

    fn prop(&mut self) -> PResult<Prop> {
        let lhs = self.or_prop()?;
        if self.eat("->") {
            let rhs = self.prop()?;
            return Ok(Prop::Impl(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or_prop(&mut self) -> PResult<Prop> {
        let mut lhs = self.and_prop()?;
        while self.eat("\\/") {
            let rhs = self.and_prop()?;
            lhs = Prop::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_prop(&mut self) -> PResult<Prop> {
        let mut lhs = self.not_prop()?;
        while self.eat("/\\") {
            let rhs = self.not_prop()?;
            lhs = Prop::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_prop(&mut self) -> PResult<Prop> {
        if self.is_keyword("not") {
            self.pos += 1;
            let p = self.not_prop()?;
            return Ok(Prop::Not(Box::new(p)));
        }
        if self.is_sym("(") {
            let save = self.pos;
            let first = match self.atom() {
                Ok(a) => return Ok(Prop::Atom(a)),
                Err(e) => (e, self.pos),
            };
            self.pos = save + 1;
            let second = self.prop().and_then(|p| self.expect(")").map(|_| p));
            return match second {
                Ok(p) => Ok(p),
                Err(e2) => {
                    let e1 = first.0;
                    if (e2.line, e2.column) >= (e1.line, e1.column) {
                        Err(e2)
                    } else {
                        Err(e1)
                    }
                }
            };
        }
        Ok(Prop::Atom(self.atom()?))
    }

    fn atom(&mut self) -> PResult<Atom> {
        let expr = self.real(None)?;
        let kind = if self.is_keyword("in") {
            self.pos += 1;
            if self.eat("?") {
                AtomKind::Query
            } else {
                self.expect("[")?;
                let (line, column) = self.here();
                let lo = self.snumber()?;
                self.expect(",")?;
                let hi = self.snumber()?;
                self.expect("]")?;
                if lo > hi {
                    return Err(ParseError {
                        line,
                        column,
                        message: "interval lower bound exceeds upper bound".into(),
                    });
                }
                AtomKind::In(lo, hi)
            }
        } else if self.eat("<=") {
            AtomKind::Le(self.snumber()?)
        } else if self.eat(">=") {
            AtomKind::Ge(self.snumber()?)
        } else {
            return self.error_here(format!("expected `in`, `<=` or `>=`, found {}", self.peek()));
        };
        Ok(Atom { expr, kind })
    }

    fn hints(&mut self) -> PResult<Vec<Hint>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            let line = self.here().0;
            if self.eat("$") {
                let axes = self.dvars(false)?;
                self.expect(";")?;
                out.push(Hint {
                    kind: HintKind::Bisect { targets: vec![], axes },
                    line,
                });
                continue;
            }
            let first = self.real(None)?;
            let kind = if self.eat("->") {
                let rhs = self.real(None)?;
                HintKind::Rewrite { lhs: first, rhs }
            } else if self.eat("~") {
                let exact = self.real(None)?;
                HintKind::Approx { approx: first, exact }
            } else {
                let mut targets = vec![first];
                while self.eat(",") {
                    targets.push(self.real(None)?);
                }
                self.expect("$")?;
                let axes = self.dvars(true)?;
                HintKind::Bisect { targets, axes }
            };
            self.expect(";")?;
            out.push(Hint { kind, line });
        }
        Ok(out)
    }

    fn dvars(&mut self, targeted: bool) -> PResult<Vec<BisectAxis>> {
        let mut axes = Vec::new();
        loop {
            let expr = self.real(None)?;
            let mode = if self.is_keyword("in") {
                self.pos += 1;
                if self.eat("(") {
                    let mut pts = vec![self.snumber()?];
                    while self.eat(",") {
                        pts.push(self.snumber()?);
                    }
                    self.expect(")")?;
                    BisectMode::Points(pts)
                } else {
                    let (line, column) = self.here();
                    let n = match self.peek().clone() {
                        Tok::Number(s) => {
                            self.pos += 1;
                            s.parse::<u32>().ok().filter(|n| *n >= 1)
                        }
                        _ => None,
                    };
                    BisectMode::Even(n.ok_or(ParseError {
                        line,
                        column,
                        message: "expected a positive number of sub-intervals".into(),
                    })?)
                }
            } else if targeted {
                BisectMode::Dichotomy
            } else {
                BisectMode::Even(4)
            };
            axes.push(BisectAxis { expr, mode });
            if !self.eat(",") {
                return Ok(axes);
            }
        }
    }
}

fn resolve_function(name: &str, params: &[Param], aliases: &HashMap<String, RoundingFn>) -> Result<RoundingFn, String> {
    let int = |p: &Param| -> Result<i64, String> {
        match p {
            Param::Int(v) => v.to_i64().ok_or_else(|| "parameter out of range".to_string()),
            Param::Name(s) => Err(format!("expected an integer, found `{s}`")),
        }
    };
    let dir = |p: &Param| -> Result<RoundingDirection, String> {
        match p {
            Param::Name(s) => s.parse().map_err(|_| format!("unknown rounding direction `{s}`")),
            Param::Int(_) => Err("expected a rounding direction".into()),
        }
    };
    let precision = |p: &Param| -> Result<u32, String> {
        let v = int(p)?;
        u32::try_from(v)
            .ok()
            .filter(|v| *v >= 1)
            .ok_or_else(|| "precision must be a positive integer".to_string())
    };
    match (name, params) {
        ("float", [Param::Name(n), d]) => {
            let (p, e) = named_format(n).ok_or_else(|| format!("unknown format `{n}`"))?;
            Ok(RoundingFn::Format(Format::float(p, e, dir(d)?)))
        }
        ("float", [p, e, d]) => Ok(RoundingFn::Format(Format::float(precision(p)?, int(e)?, dir(d)?))),
        ("fixed", [e, d]) => Ok(RoundingFn::Format(Format::fixed(int(e)?, dir(d)?))),
        ("int", [d]) => Ok(RoundingFn::Format(Format::fixed(0, dir(d)?))),
        ("add_rel" | "sub_rel" | "mul_rel", [p, rest @ ..]) if rest.len() <= 1 => {
            let kind = match name {
                "add_rel" => RelKind::Add,
                "sub_rel" => RelKind::Sub,
                _ => RelKind::Mul,
            };
            let e = rest.first().map(int).transpose()?;
            Ok(RoundingFn::Rel(kind, precision(p)?, e))
        }
        ("float" | "fixed" | "int" | "add_rel" | "sub_rel" | "mul_rel", _) => {
            Err(format!("wrong parameters for `{name}`"))
        }
        (_, []) => aliases
            .get(name)
            .copied()
            .ok_or_else(|| format!("unknown rounding operator `{name}`")),
        _ => Err(format!("unknown rounding operator `{name}`")),
    }
}

/// A diagnostic that does not stop processing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "warning (line {l}): {}", self.message),
            None => write!(f, "warning: {}", self.message),
        }
    }
}

pub fn lint(script: &Script) -> Vec<Warning> {
    let arena = &script.arena;
    let mut out = Vec::new();
    let mut named: HashMap<ExprId, &str> = HashMap::new();
    for (name, id) in &script.aliases {
        match named.get(id) {
            Some(first) => out.push(Warning {
                line: None,
                message: format!("`{first}` and `{name}` are two names for the same expression"),
            }),
            None => {
                named.insert(*id, name);
            }
        }
    }
    let auto_pairs = crate::engine::automatic_pairs(script);
    for hint in &script.hints {
        let line = Some(hint.line);
        match &hint.kind {
            HintKind::Rewrite { lhs, rhs } => {
                let mut zero = false;
                for side in [lhs, rhs] {
                    for d in crate::ring::zero_divisors(arena, *side) {
                        zero = true;
                        out.push(Warning {
                            line,
                            message: format!("divisor `{}` is trivially zero", arena.display(d)),
                        });
                    }
                }
                if !zero && !crate::ring::ring_equal(arena, *lhs, *rhs) {
                    out.push(Warning {
                        line,
                        message: format!(
                            "`{}` and `{}` are not provably equal; the rule is assumed",
                            arena.display(*lhs),
                            arena.display(*rhs)
                        ),
                    });
                }
            }
            HintKind::Approx { approx, exact } => {
                if auto_pairs.contains(&(*approx, *exact)) {
                    out.push(Warning {
                        line,
                        message: format!(
                            "`{}` is already known to approximate `{}`; the hint is useless",
                            arena.display(*approx),
                            arena.display(*exact)
                        ),
                    });
                }
            }
            HintKind::Bisect { .. } => {}
        }
    }
    out
}

impl Script {
    /// Free variables of the whole script, in order of first use.
    pub fn free_variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for id in self.arena.ids() {
            if let Node::Var(v) = self.arena.node(id) {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

/// Renders a rational as a literal-like string for messages.
pub fn rational_literal(q: &BigRational) -> String {
    if q.is_negative() {
        format!("-{}", show_q(&-q))
    } else {
        show_q(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(p: &Prop, out: &mut Vec<Atom>) {
        match p {
            Prop::Atom(a) => out.push(a.clone()),
            Prop::And(a, b) | Prop::Or(a, b) | Prop::Impl(a, b) => {
                atoms(a, out);
                atoms(b, out);
            }
            Prop::Not(a) => atoms(a, out),
        }
    }

    #[test]
    fn rounding_sugar_matches_explicit_form() {
        let s =
            parse("@rnd = float<ieee_32, ne>;\n y = rnd(x * rnd(1 - x));\n z rnd= x * (1 - x);\n { y in ? }").unwrap();
        let y = s.aliases[0].1;
        let z = s.aliases[1].1;
        assert_eq!(y, z);
        let w = lint(&s);
        assert!(w.iter().any(|w| w.message.contains("two names")), "{w:?}");
    }

    #[test]
    fn proposition_structure() {
        let s = parse("{ x - 2 in [-2,0] /\\ (x + 1 in [0,2] -> y in [3,4]) -> not x <= 1 \\/ x + y in ? }").unwrap();
        let Prop::Impl(lhs, rhs) = &s.prop else {
            panic!("expected implication")
        };
        assert!(matches!(**lhs, Prop::And(..)));
        let Prop::Or(l, r) = &**rhs else {
            panic!("expected disjunction")
        };
        assert!(matches!(**l, Prop::Not(_)));
        assert!(matches!(
            **r,
            Prop::Atom(Atom {
                kind: AtomKind::Query,
                ..
            })
        ));
        let mut a = Vec::new();
        atoms(&s.prop, &mut a);
        assert_eq!(a.len(), 5);
        assert_eq!(s.arena.display(a[4].expr), "x + y");
    }

    #[test]
    fn alias_errors() {
        let e = parse("b = a * 2; a = 1; { b in ? }").unwrap_err();
        assert_eq!((e.line, e.column), (1, 12));
        assert!(e.message.contains("after being used"));
        let e = parse("a = 1;\na = 2; { a in ? }").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("already aliased"));
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = parse("{ x in [1, }").unwrap_err();
        assert_eq!((e.line, e.column), (1, 12));
        let e = parse("{ x in [2, 1] }").unwrap_err();
        assert!(e.message.contains("exceeds"));
        let e = parse("{ x <= 1\n /\\ y }").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse("{ x ^ 2 in ? }").is_err());
        assert!(parse("@r = float<ieee_99, ne>; { r(x) in ? }").is_err());
        assert!(parse("@r = float<ieee_32, xx>; { r(x) in ? }").is_err());
        assert!(parse("{ 1x in ? }").is_err());
    }

    #[test]
    fn formats_and_functions() {
        let s = parse(
            "@a = float<24,-149,zr>; @b = fixed<-3,up>; @c = int<dn>; @d = add_rel<20,-60>;\n\
             u = a(x) + b(x) + c(x) + d(x, y) + mul_rel<10>(x, y) + fma(x, y, x) + sqrt(|x|);\n{ u in ? }",
        )
        .unwrap();
        assert_eq!(s.rounding_aliases.len(), 4);
        assert_eq!(s.rounding_aliases[3].1, RoundingFn::Rel(RelKind::Add, 20, Some(-60)));
        assert!(parse("@d = add_rel<20>; { d(x) in ? }").is_err());
    }

    #[test]
    fn hints() {
        let s = parse(
            "{ x in [0,3] -> |z| <= 1b-26 }\n|z| $ x;\n$ x in 6;\n$ x in (0.5, 2);\na, b $ u, v in 3, w;\nx ~ y;\nx * (2 - x * y) - 1/y -> (x - 1/y) * (x - 1/y) * -y;",
        )
        .unwrap();
        assert_eq!(s.hints.len(), 6);
        let HintKind::Bisect { targets, axes } = &s.hints[0].kind else {
            panic!()
        };
        assert_eq!(targets.len(), 1);
        assert_eq!(axes[0].mode, BisectMode::Dichotomy);
        let HintKind::Bisect { axes, .. } = &s.hints[1].kind else {
            panic!()
        };
        assert_eq!(axes[0].mode, BisectMode::Even(6));
        let HintKind::Bisect { axes, .. } = &s.hints[3].kind else {
            panic!()
        };
        assert_eq!(axes[1].mode, BisectMode::Even(3));
        assert_eq!(axes[2].mode, BisectMode::Dichotomy);
        assert!(matches!(s.hints[5].kind, HintKind::Rewrite { .. }));
        let s = parse("{ x in [0,3] }\n$ x;").unwrap();
        let HintKind::Bisect { axes, .. } = &s.hints[0].kind else {
            panic!()
        };
        assert_eq!(axes[0].mode, BisectMode::Even(4));
    }

    #[test]
    fn lint_rules() {
        let s = parse("{ y in ? }\ny -> y * (x - x) / (x - x);\nx * y -> x + y;").unwrap();
        let w = lint(&s);
        assert!(w.iter().any(|w| w.message.contains("trivially zero")));
        assert!(w
            .iter()
            .any(|w| w.message.contains("not provably equal") && w.line == Some(3)));
        let s = parse("@floor = int<dn>;\n{ x - y in [-0.1,0.1] -> floor(x) - y in ? }\nx ~ y;").unwrap();
        assert!(lint(&s).iter().any(|w| w.message.contains("useless")));
    }

    #[test]
    fn pretty_print_round_trip() {
        let src = "@rnd = float<ieee_32, ne>; a = 8388676b-24;\n q rnd= r * r * (a + r * 0.0217) / -(s - 1.3);\n { |q - sqrt(fma(r, s, -2))| in ? }";
        let s = parse(src).unwrap();
        let Prop::Atom(atom) = &s.prop else { panic!() };
        let text = s.arena.to_source(atom.expr);
        let again = parse(&format!("{{ {text} in ? }}")).unwrap();
        let Prop::Atom(atom2) = &again.prop else { panic!() };
        assert_eq!(again.arena.to_source(atom2.expr), text);
        assert_eq!(
            count_reachable(&again.arena, atom2.expr),
            count_reachable(&s.arena, atom.expr)
        );
    }

    fn count_reachable(a: &Arena, id: ExprId) -> usize {
        let mut seen = HashSet::new();
        let mut st = vec![id];
        while let Some(e) = st.pop() {
            if seen.insert(e) {
                st.extend(a.node(e).children());
            }
        }
        seen.len()
    }
}
