//! Proof certificates: emission, widening, and an independent checker.
//!
//! A certificate lists the expressions involved, the sequents, and for every
//! tile of every sequent a topologically ordered list of lemmas. Each lemma
//! names the theorem it instantiates and carries the dyadic data needed to
//! re-check it. The checker evaluates side conditions with exact dyadic
//! additions, multiplications and comparisons only; division and square root
//! are checked by cross-multiplication and squaring.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bisect::{Paving, SequentProof};
use crate::dyadic::{parse_dyadic, parse_rational, rational_to_string, Direction, Dyadic, ExactRational};
use crate::engine::{Absurd, Pred, Step, StepId, Theorem, Verdict};
use crate::expr::{rel_exact_node, Arena, ExprId, Node};
use crate::formats::{ErrorInfo, ErrorOn, Format, FormatKind, RelKind, RelOp, RoundingDirection};
use crate::interval::Interval;
use crate::logic::Sequent;
use crate::parser::{Atom, AtomKind, Hint, HintKind};
use crate::ring::ring_equal;
use crate::rules::{lookup_instance, rule, verify_instance, Bindings, GuardKind, METAVARS};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Claim {
    Bnd(Interval),
    Abs(Interval),
    Fix(i64),
    Flt(u32),
}

impl Claim {
    fn interval(&self) -> Option<&Interval> {
        match self {
            Claim::Bnd(i) | Claim::Abs(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Hyp(usize),
    Refine(usize),
    Intersect,
    Named(String),
    Rewrite(String, Bindings),
    /// User rewrite hint, by index in the hint table.
    User(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma {
    pub by: Justification,
    pub subject: ExprId,
    pub claim: Claim,
    pub operands: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conclusion {
    /// Goal `goal` of the sequent holds by lemma `lemma`.
    Prove {
        goal: usize,
        lemma: usize,
    },
    Disjoint(usize, usize),
    Refine {
        lemma: usize,
        hyp: usize,
    },
    AbsSign(usize, usize),
    Unrepresentable(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileCert {
    pub lemmas: Vec<Lemma>,
    pub conclusion: Conclusion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertPaving {
    Leaf,
    Split {
        axis: ExprId,
        at: Dyadic,
        below: Box<CertPaving>,
        above: Box<CertPaving>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequentCert {
    pub hyps: Vec<Atom>,
    pub goals: Vec<Atom>,
    pub paving: CertPaving,
    /// One per leaf of `paving`, in left-to-right order.
    pub tiles: Vec<TileCert>,
}

/// A user rewrite `lhs -> rhs`; `ring` records whether the identity was
/// discharged by ring normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HintCert {
    pub lhs: ExprId,
    pub rhs: ExprId,
    pub ring: bool,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub tool: String,
    pub script_sha256: String,
    pub precision: u32,
    pub arena: Arena,
    pub hints: Vec<HintCert>,
    pub sequents: Vec<SequentCert>,
}

impl PartialEq for Certificate {
    fn eq(&self, other: &Self) -> bool {
        self.to_text() == other.to_text()
    }
}

impl Certificate {
    pub fn assumed(&self) -> usize {
        self.hints.iter().filter(|h| !h.ring).count()
    }

    pub fn lemma_count(&self) -> usize {
        self.sequents
            .iter()
            .flat_map(|s| &s.tiles)
            .map(|t| t.lemmas.len())
            .sum()
    }

    /// Sum of the mantissa bit lengths of every interval endpoint.
    pub fn endpoint_bits(&self) -> u64 {
        self.sequents
            .iter()
            .flat_map(|s| &s.tiles)
            .flat_map(|t| &t.lemmas)
            .filter_map(|l| l.claim.interval())
            .map(|i| i.lo().mantissa_bits() + i.hi().mantissa_bits())
            .sum()
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A proved sequent, ready for emission.
pub struct ProvedSequent<'a> {
    pub sequent: &'a Sequent,
    pub proof: &'a SequentProof,
}

/// Builds the certificate of proved sequents. Query goals are replaced by
/// the enclosure answered for them.
pub fn emit(source: &str, arena: &Arena, hints: &[Hint], proved: &[ProvedSequent], precision: u32) -> Certificate {
    let mut b = TableBuilder::new(arena);
    let mut hint_map: HashMap<usize, usize> = HashMap::new();
    let mut hint_certs = Vec::new();
    for (k, h) in hints.iter().enumerate() {
        if let HintKind::Rewrite { lhs, rhs } = h.kind {
            hint_map.insert(k, hint_certs.len());
            hint_certs.push((lhs, rhs, ring_equal(arena, lhs, rhs)));
        }
    }
    let mut sequents = Vec::new();
    for ps in proved {
        let seq = ps.sequent;
        let proof = ps.proof;
        let mut goals = seq.goals.clone();
        for (g, goal) in goals.iter_mut().enumerate() {
            if goal.is_query() {
                let mut hull: Option<Interval> = None;
                for leaf in proof.paving.leaves() {
                    let o = &proof.tiles[leaf].outcome;
                    if let Verdict::Proved { goal: k, step } = o.verdict {
                        if k == g {
                            let i = o.steps[step].pred.interval().expect("enclosure").clone();
                            hull = Some(hull.map_or(i.clone(), |h| h.hull(&i)));
                        }
                    }
                }
                if let Some(h) = hull {
                    goal.kind = AtomKind::In(h.lo().to_rational(), h.hi().to_rational());
                }
            }
        }
        let mut tiles = Vec::new();
        for leaf in proof.paving.leaves() {
            let o = &proof.tiles[leaf].outcome;
            tiles.push(tile_cert(&mut b, &o.steps, &o.verdict, &hint_map));
        }
        let hyps = seq.hyps.iter().map(|a| b.atom(a)).collect();
        let goals = goals.iter().map(|a| b.atom(a)).collect();
        let paving = b.paving(&proof.paving);
        sequents.push(SequentCert {
            hyps,
            goals,
            paving,
            tiles,
        });
    }
    let hints = hint_certs
        .into_iter()
        .map(|(l, r, ring)| HintCert {
            lhs: b.map(l),
            rhs: b.map(r),
            ring,
        })
        .collect();
    Certificate {
        tool: format!("boundcert {}", env!("CARGO_PKG_VERSION")),
        script_sha256: sha256_hex(source),
        precision,
        arena: b.out,
        hints,
        sequents,
    }
}

/// Copies the nodes a certificate needs into a fresh arena.
struct TableBuilder<'a> {
    src: &'a Arena,
    out: Arena,
    map: HashMap<ExprId, ExprId>,
}

impl<'a> TableBuilder<'a> {
    fn new(src: &'a Arena) -> Self {
        TableBuilder {
            src,
            out: Arena::new(),
            map: HashMap::new(),
        }
    }

    fn map(&mut self, e: ExprId) -> ExprId {
        if let Some(&m) = self.map.get(&e) {
            return m;
        }
        let node = match self.src.node(e).clone() {
            Node::Neg(a) => Node::Neg(self.map(a)),
            Node::Abs(a) => Node::Abs(self.map(a)),
            Node::Sqrt(a) => Node::Sqrt(self.map(a)),
            Node::Add(a, b) => Node::Add(self.map(a), self.map(b)),
            Node::Sub(a, b) => Node::Sub(self.map(a), self.map(b)),
            Node::Mul(a, b) => Node::Mul(self.map(a), self.map(b)),
            Node::Div(a, b) => Node::Div(self.map(a), self.map(b)),
            Node::Fma(a, b, c) => Node::Fma(self.map(a), self.map(b), self.map(c)),
            Node::Round(f, a) => Node::Round(f, self.map(a)),
            Node::Rel(op, a, b) => Node::Rel(op, self.map(a), self.map(b)),
            n @ (Node::Const(_) | Node::Var(_)) => n,
        };
        let m = self.out.intern(node);
        if let Some(name) = self.src.name_of(e) {
            self.out.name(m, name);
        }
        self.map.insert(e, m);
        m
    }

    fn atom(&mut self, a: &Atom) -> Atom {
        Atom {
            expr: self.map(a.expr),
            kind: a.kind.clone(),
        }
    }

    fn paving(&mut self, p: &Paving) -> CertPaving {
        match p {
            Paving::Leaf(_) => CertPaving::Leaf,
            Paving::Split { axis, at, below, above } => CertPaving::Split {
                axis: self.map(*axis),
                at: at.clone(),
                below: Box::new(self.paving(below)),
                above: Box::new(self.paving(above)),
            },
        }
    }
}

fn tile_cert(b: &mut TableBuilder, steps: &[Step], verdict: &Verdict, hint_map: &HashMap<usize, usize>) -> TileCert {
    let roots: Vec<StepId> = match verdict {
        Verdict::Proved { step, .. } => vec![*step],
        Verdict::Absurd(a) => match a {
            Absurd::Disjoint(x, y) | Absurd::AbsSign(x, y) => vec![*x, *y],
            Absurd::Refine(x, _) | Absurd::Unrepresentable(x) => vec![*x],
        },
        Verdict::Unproved => panic!("only proved tiles have certificates"),
    };
    let mut needed = vec![false; steps.len()];
    let mut stack = roots.clone();
    while let Some(s) = stack.pop() {
        if !needed[s] {
            needed[s] = true;
            stack.extend(steps[s].operands.iter().copied());
        }
    }
    let mut renum = HashMap::new();
    let mut lemmas = Vec::new();
    for (s, step) in steps.iter().enumerate() {
        if !needed[s] {
            continue;
        }
        let by = match &step.theorem {
            Theorem::Hyp(k) => Justification::Hyp(*k),
            Theorem::Refine(k) => Justification::Refine(*k),
            Theorem::Intersect => Justification::Intersect,
            Theorem::Named(n) => Justification::Named(n.to_string()),
            Theorem::Rewrite(r, bind) => {
                let mut nb = Bindings::default();
                for (v, e) in bind.bound() {
                    nb.set(v, b.map(e));
                }
                Justification::Rewrite(r.to_string(), nb)
            }
            Theorem::User(k) => Justification::User(hint_map[k]),
        };
        let claim = match &step.pred {
            Pred::Bnd(i) => Claim::Bnd(i.clone()),
            Pred::Abs(i) => Claim::Abs(i.clone()),
            Pred::Fix(e) => Claim::Fix(*e),
            Pred::Flt(p) => Claim::Flt(*p),
        };
        renum.insert(s, lemmas.len());
        lemmas.push(Lemma {
            by,
            subject: b.map(step.subject),
            claim,
            operands: step.operands.iter().map(|o| renum[o]).collect(),
        });
    }
    let conclusion = match verdict {
        Verdict::Proved { goal, step } => Conclusion::Prove {
            goal: *goal,
            lemma: renum[step],
        },
        Verdict::Absurd(Absurd::Disjoint(x, y)) => Conclusion::Disjoint(renum[x], renum[y]),
        Verdict::Absurd(Absurd::AbsSign(x, y)) => Conclusion::AbsSign(renum[x], renum[y]),
        Verdict::Absurd(Absurd::Refine(x, k)) => Conclusion::Refine {
            lemma: renum[x],
            hyp: *k,
        },
        Verdict::Absurd(Absurd::Unrepresentable(x)) => Conclusion::Unrepresentable(renum[x]),
        Verdict::Unproved => unreachable!(),
    };
    TileCert { lemmas, conclusion }
}

// ---------------------------------------------------------------------------
// checking

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("malformed certificate: {0}")]
    Structural(String),
    #[error("sequent {sequent}, tile {tile}, {}: {reason}", lemma.map_or("conclusion".to_string(), |j| format!("lemma {j}")))]
    Invalid {
        sequent: usize,
        tile: usize,
        /// `None` when the tile conclusion fails.
        lemma: Option<usize>,
        reason: String,
    },
}

impl CheckError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CheckError::Structural(_) => 2,
            CheckError::Invalid { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub sequents: usize,
    pub tiles: usize,
    pub lemmas: usize,
    /// User identities taken on trust.
    pub assumed: usize,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "valid: {} sequent(s), {} tile(s), {} lemma(s)",
            self.sequents, self.tiles, self.lemmas
        )?;
        if self.assumed > 0 {
            write!(
                f,
                ", modulo {} assumed identit{}",
                self.assumed,
                if self.assumed == 1 { "y" } else { "ies" }
            )?;
        }
        Ok(())
    }
}

struct TileCtx<'a> {
    arena: &'a Arena,
    hints: &'a [HintCert],
    hyps: &'a [Atom],
    goals: &'a [Atom],
}

/// Checks every lemma and conclusion of a certificate.
pub fn check(cert: &Certificate) -> Result<CheckReport, CheckError> {
    structure(cert)?;
    let mut tiles = 0;
    for (si, s) in cert.sequents.iter().enumerate() {
        let boxes = tile_hyps(&s.paving, &s.hyps).map_err(CheckError::Structural)?;
        for (ti, (t, hyps)) in s.tiles.iter().zip(&boxes).enumerate() {
            tiles += 1;
            let ctx = TileCtx {
                arena: &cert.arena,
                hints: &cert.hints,
                hyps,
                goals: &s.goals,
            };
            for j in 0..t.lemmas.len() {
                check_lemma(&ctx, &t.lemmas, j).map_err(|reason| CheckError::Invalid {
                    sequent: si,
                    tile: ti,
                    lemma: Some(j),
                    reason,
                })?;
            }
            check_conclusion(&ctx, &t.lemmas, &t.conclusion).map_err(|reason| CheckError::Invalid {
                sequent: si,
                tile: ti,
                lemma: None,
                reason,
            })?;
        }
    }
    Ok(CheckReport {
        sequents: cert.sequents.len(),
        tiles,
        lemmas: cert.lemma_count(),
        assumed: cert.assumed(),
    })
}

/// Index bounds, operand order and tile counts.
fn structure(cert: &Certificate) -> Result<(), CheckError> {
    let n = cert.arena.len();
    let bad = |m: String| Err(CheckError::Structural(m));
    let node_ok = |e: ExprId| e.index() < n;
    for h in &cert.hints {
        if !node_ok(h.lhs) || !node_ok(h.rhs) {
            return bad("hint refers to an unknown expression".into());
        }
    }
    for (si, s) in cert.sequents.iter().enumerate() {
        if s.hyps.iter().chain(&s.goals).any(|a| !node_ok(a.expr)) {
            return bad(format!("sequent {si} refers to an unknown expression"));
        }
        if count_leaves(&s.paving) != s.tiles.len() {
            return bad(format!("sequent {si}: paving and tile count disagree"));
        }
        for (ti, t) in s.tiles.iter().enumerate() {
            for (j, l) in t.lemmas.iter().enumerate() {
                if !node_ok(l.subject) {
                    return bad(format!("sequent {si}, tile {ti}, lemma {j}: unknown subject"));
                }
                if l.operands.iter().any(|&o| o >= j) {
                    return bad(format!(
                        "sequent {si}, tile {ti}, lemma {j}: operands must precede the lemma"
                    ));
                }
            }
            let refs: Vec<usize> = match t.conclusion {
                Conclusion::Prove { lemma, .. } => vec![lemma],
                Conclusion::Disjoint(a, b) | Conclusion::AbsSign(a, b) => vec![a, b],
                Conclusion::Refine { lemma, .. } | Conclusion::Unrepresentable(lemma) => vec![lemma],
            };
            if refs.iter().any(|&r| r >= t.lemmas.len()) {
                return bad(format!("sequent {si}, tile {ti}: conclusion cites an unknown lemma"));
            }
        }
    }
    Ok(())
}

fn count_leaves(p: &CertPaving) -> usize {
    match p {
        CertPaving::Leaf => 1,
        CertPaving::Split { below, above, .. } => count_leaves(below) + count_leaves(above),
    }
}

impl SequentCert {
    /// Hypotheses of every tile, in leaf order.
    pub fn tile_hypotheses(&self) -> Result<Vec<Vec<Atom>>, String> {
        tile_hyps(&self.paving, &self.hyps)
    }
}

fn tile_hyps(p: &CertPaving, hyps: &[Atom]) -> Result<Vec<Vec<Atom>>, String> {
    match p {
        CertPaving::Leaf => Ok(vec![hyps.to_vec()]),
        CertPaving::Split { axis, at, below, above } => {
            let k = hyps
                .iter()
                .position(|h| h.expr == *axis && matches!(h.kind, AtomKind::In(..)))
                .ok_or("split on an expression without an enclosing hypothesis")?;
            let AtomKind::In(lo, hi) = hyps[k].kind.clone() else {
                unreachable!()
            };
            if !(at.cmp_rational(&lo).is_gt() && at.cmp_rational(&hi).is_lt()) {
                return Err("split point outside the open range".into());
            }
            let mut b = hyps.to_vec();
            b[k].kind = AtomKind::In(lo, at.to_rational());
            let mut a = hyps.to_vec();
            a[k].kind = AtomKind::In(at.to_rational(), hi);
            let mut out = tile_hyps(below, &b)?;
            out.extend(tile_hyps(above, &a)?);
            Ok(out)
        }
    }
}

/// `outer` contains `inner`.
fn covers(outer: &Interval, inner: &Interval) -> Result<(), String> {
    if outer.lo() <= inner.lo() && inner.hi() <= outer.hi() {
        Ok(())
    } else {
        Err(format!(
            "[{}, {}] does not contain [{}, {}]",
            outer.lo(),
            outer.hi(),
            inner.lo(),
            inner.hi()
        ))
    }
}

fn ensure(c: bool, msg: &str) -> Result<(), String> {
    if c {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn check_lemma(ctx: &TileCtx, lemmas: &[Lemma], j: usize) -> Result<(), String> {
    let l = &lemmas[j];
    let ops: Vec<&Lemma> = l.operands.iter().map(|&o| &lemmas[o]).collect();
    if let Claim::Abs(i) = &l.claim {
        ensure(!i.lo().is_negative(), "absolute value range below zero")?;
    }
    if let Claim::Flt(p) = l.claim {
        ensure(p >= 1, "precision must be positive")?;
    }
    let arity = |n: usize| ensure(ops.len() == n, "wrong number of operands");
    let on = |k: usize, e: ExprId| -> Result<&Lemma, String> {
        let o = ops.get(k).ok_or("missing operand")?;
        ensure(o.subject == e, "operand about another expression")?;
        Ok(o)
    };
    let bnd = |k: usize, e: ExprId| -> Result<&Interval, String> {
        match &on(k, e)?.claim {
            Claim::Bnd(i) => Ok(i),
            _ => Err("operand is not an enclosure".into()),
        }
    };
    let abs = |k: usize, e: ExprId| -> Result<&Interval, String> {
        match &on(k, e)?.claim {
            Claim::Abs(i) => Ok(i),
            _ => Err("operand is not an absolute enclosure".into()),
        }
    };
    let fix = |k: usize, e: ExprId| -> Result<i64, String> {
        match on(k, e)?.claim {
            Claim::Fix(v) => Ok(v),
            _ => Err("operand is not a fixed-point fact".into()),
        }
    };
    let flt = |k: usize, e: ExprId| -> Result<u32, String> {
        match on(k, e)?.claim {
            Claim::Flt(v) => Ok(v),
            _ => Err("operand is not a floating-point fact".into()),
        }
    };
    let want_bnd = || match &l.claim {
        Claim::Bnd(i) => Ok(i),
        _ => Err("conclusion must be an enclosure".to_string()),
    };
    let want_abs = || match &l.claim {
        Claim::Abs(i) => Ok(i),
        _ => Err("conclusion must be an absolute enclosure".to_string()),
    };
    let want_fix = || match l.claim {
        Claim::Fix(v) => Ok(v),
        _ => Err("conclusion must be a fixed-point fact".to_string()),
    };
    let want_flt = || match l.claim {
        Claim::Flt(v) => Ok(v),
        _ => Err("conclusion must be a floating-point fact".to_string()),
    };
    let s = l.subject;
    let node = ctx.arena.node(s).clone();
    let pt = |d: Dyadic| Interval::point(d);
    match &l.by {
        Justification::Hyp(k) => {
            arity(0)?;
            let h = ctx.hyps.get(*k).ok_or("unknown hypothesis")?;
            ensure(h.expr == s, "hypothesis about another expression")?;
            let AtomKind::In(lo, hi) = &h.kind else {
                return Err("not a two-sided hypothesis".into());
            };
            let i = want_bnd()?;
            ensure(
                i.lo().cmp_rational(lo).is_le() && i.hi().cmp_rational(hi).is_ge(),
                "does not contain the hypothesis range",
            )
        }
        Justification::Refine(k) => {
            arity(1)?;
            let h = ctx.hyps.get(*k).ok_or("unknown hypothesis")?;
            ensure(h.expr == s, "hypothesis about another expression")?;
            let j = bnd(0, s)?;
            let i = want_bnd()?;
            match &h.kind {
                AtomKind::Le(c) => ensure(
                    i.lo() <= j.lo() && (i.hi() >= j.hi() || i.hi().cmp_rational(c).is_ge()),
                    "refinement too narrow",
                ),
                AtomKind::Ge(c) => ensure(
                    i.hi() >= j.hi() && (i.lo() <= j.lo() || i.lo().cmp_rational(c).is_le()),
                    "refinement too narrow",
                ),
                _ => Err("not a one-sided hypothesis".into()),
            }
        }
        Justification::Intersect => {
            arity(2)?;
            let (a, b) = (ops[0], ops[1]);
            ensure(a.subject == s && b.subject == s, "operand about another expression")?;
            let (j, k) = match (&a.claim, &b.claim, &l.claim) {
                (Claim::Bnd(j), Claim::Bnd(k), Claim::Bnd(_)) | (Claim::Abs(j), Claim::Abs(k), Claim::Abs(_)) => (j, k),
                _ => return Err("intersection of different predicates".into()),
            };
            let m = j.intersect(k).ok_or("empty intersection")?;
            covers(l.claim.interval().unwrap(), &m)
        }
        Justification::User(k) => {
            arity(1)?;
            let h = ctx.hints.get(*k).ok_or("unknown hint")?;
            ensure(h.lhs == s, "hint rewrites another expression")?;
            covers(want_bnd()?, bnd(0, h.rhs)?)
        }
        Justification::Rewrite(name, b) => {
            let r = rule(name).ok_or("unknown rule")?;
            let rhs = ops.first().ok_or("missing operand")?.subject;
            ensure(verify_instance(ctx.arena, r, b, s, rhs), "rule does not match")?;
            let guards = r.semantic_guards();
            arity(1 + guards.len())?;
            for (k, (kind, p)) in guards.iter().enumerate() {
                let g = lookup_instance(ctx.arena, p, b).ok_or("guard expression missing")?;
                let o = on(k + 1, g)?;
                let ok = match (&o.claim, kind) {
                    (Claim::Bnd(i), GuardKind::NonZero) => !i.contains_zero(),
                    (Claim::Abs(i), GuardKind::NonZero) => i.lo().is_positive(),
                    (Claim::Bnd(i), GuardKind::NonNeg) => i.is_nonneg(),
                    (Claim::Bnd(i), GuardKind::Positive) => i.is_positive(),
                    _ => false,
                };
                ensure(ok, "guard not established")?;
            }
            covers(want_bnd()?, bnd(0, rhs)?)
        }
        Justification::Named(name) => {
            let child = |k: usize| {
                node.children()
                    .get(k)
                    .copied()
                    .ok_or("wrong expression shape".to_string())
            };
            match name.as_str() {
                "abs_of_bnd" => {
                    arity(1)?;
                    covers(want_abs()?, &bnd(0, s)?.abs())
                }
                "bnd_of_abs" => {
                    arity(1)?;
                    let j = abs(0, s)?;
                    covers(want_bnd()?, &Interval::new(-j.hi(), j.hi().clone()))
                }
                "bnd_abs_refine" => {
                    arity(2)?;
                    let j = bnd(0, s)?;
                    let k = abs(1, s)?;
                    let parts = [j.intersect(k), j.intersect(&k.neg())];
                    let m = parts
                        .iter()
                        .flatten()
                        .cloned()
                        .reduce(|a, b| a.hull(&b))
                        .ok_or("incompatible ranges")?;
                    covers(want_bnd()?, &m)
                }
                "fix_of_flt" => {
                    arity(2)?;
                    let p = flt(0, s)?;
                    let k = abs(1, s)?;
                    let e = want_fix()?;
                    // |x| >= lo and |m| < 2^p force an exponent above log2(lo) - p
                    ensure(Dyadic::pow2(e + p as i64 - 1) <= *k.lo(), "exponent too large")
                }
                "flt_of_fix" => {
                    arity(2)?;
                    let q = fix(0, s)?;
                    let k = abs(1, s)?;
                    let p = want_flt()?;
                    ensure(*k.hi() < Dyadic::pow2(p as i64 + q), "precision too small")
                }
                "fix_of_point" => {
                    arity(1)?;
                    let j = bnd(0, s)?;
                    ensure(
                        j.is_point() && j.lo().is_multiple_of_pow2(want_fix()?),
                        "not a multiple",
                    )
                }
                "flt_of_point" => {
                    arity(1)?;
                    let j = bnd(0, s)?;
                    ensure(
                        j.is_point() && j.lo().mantissa_bits() <= want_flt()? as u64,
                        "mantissa too wide",
                    )
                }
                "constant" => {
                    arity(0)?;
                    let Node::Const(c) = &node else {
                        return Err("not a constant".into());
                    };
                    ensure(want_bnd()?.contains_rational(c), "constant outside the range")
                }
                "neg" => {
                    arity(1)?;
                    let Node::Neg(a) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_bnd()?, &bnd(0, a)?.neg())
                }
                "abs_neg" => {
                    arity(1)?;
                    let Node::Neg(a) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_abs()?, abs(0, a)?)
                }
                "abs" => {
                    arity(1)?;
                    let Node::Abs(a) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_bnd()?, abs(0, a)?)
                }
                "bnd_absval" => {
                    arity(1)?;
                    let Node::Abs(a) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_bnd()?, &bnd(0, a)?.abs())
                }
                "abs_of_absval" => {
                    arity(1)?;
                    let v = ctx.arena.lookup(&Node::Abs(s)).ok_or("no absolute value node")?;
                    let j = bnd(0, v)?;
                    let lo = j.lo().clone().max(Dyadic::zero());
                    ensure(lo <= *j.hi(), "negative absolute value")?;
                    covers(want_abs()?, &Interval::new(lo, j.hi().clone()))
                }
                "sqrt" => {
                    arity(1)?;
                    let Node::Sqrt(a) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let j = bnd(0, a)?;
                    let i = want_bnd()?;
                    ensure(!j.lo().is_negative(), "square root of a negative range")?;
                    // lo <= sqrt(j.lo) and sqrt(j.hi) <= hi, by squaring
                    ensure(
                        !i.lo().is_positive() || &(i.lo() * i.lo()) <= j.lo(),
                        "lower bound too high",
                    )?;
                    ensure(
                        !i.hi().is_negative() && &(i.hi() * i.hi()) >= j.hi(),
                        "upper bound too low",
                    )
                }
                "add" | "sub" | "mul" => {
                    arity(2)?;
                    let (a, b) = (child(0)?, child(1)?);
                    let ok = matches!(
                        (&node, name.as_str()),
                        (Node::Add(..), "add") | (Node::Sub(..), "sub") | (Node::Mul(..), "mul")
                    );
                    ensure(ok, "wrong expression shape")?;
                    let (j, k) = (bnd(0, a)?, bnd(1, b)?);
                    let r = match name.as_str() {
                        "add" => j.add(k),
                        "sub" => j.sub(k),
                        _ => j.mul(k),
                    };
                    covers(want_bnd()?, &r)
                }
                "div" => {
                    arity(2)?;
                    let Node::Div(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    quotient_covers(want_bnd()?, bnd(0, a)?, bnd(1, b)?)
                }
                "fma" => {
                    arity(3)?;
                    let Node::Fma(a, b, c) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_bnd()?, &bnd(0, a)?.mul(bnd(1, b)?).add(bnd(2, c)?))
                }
                "abs_add" | "abs_sub" => {
                    arity(2)?;
                    let ok = matches!(
                        (&node, name.as_str()),
                        (Node::Add(..), "abs_add") | (Node::Sub(..), "abs_sub")
                    );
                    ensure(ok, "wrong expression shape")?;
                    let (j, k) = (abs(0, child(0)?)?, abs(1, child(1)?)?);
                    let lo = Dyadic::zero().max(j.lo() - k.hi()).max(k.lo() - j.hi());
                    covers(want_abs()?, &Interval::new(lo, j.hi() + k.hi()))
                }
                "abs_mul" => {
                    arity(2)?;
                    let Node::Mul(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_abs()?, &abs(0, a)?.mul(abs(1, b)?))
                }
                "abs_div" => {
                    arity(2)?;
                    let Node::Div(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let k = abs(1, b)?;
                    ensure(k.lo().is_positive(), "divisor may vanish")?;
                    quotient_covers(want_abs()?, abs(0, a)?, k)
                }
                "fix_add" | "fix_sub" | "fix_mul" => {
                    arity(2)?;
                    let ok = matches!(
                        (&node, name.as_str()),
                        (Node::Add(..), "fix_add") | (Node::Sub(..), "fix_sub") | (Node::Mul(..), "fix_mul")
                    );
                    ensure(ok, "wrong expression shape")?;
                    let (f, g) = (fix(0, child(0)?)?, fix(1, child(1)?)?);
                    let bound = if name == "fix_mul" { f + g } else { f.min(g) };
                    ensure(want_fix()? <= bound, "exponent too large")
                }
                "flt_mul" => {
                    arity(2)?;
                    let Node::Mul(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(want_flt()? >= flt(0, a)? + flt(1, b)?, "precision too small")
                }
                "sub_self" => {
                    arity(0)?;
                    ensure(matches!(node, Node::Sub(a, b) if a == b), "wrong expression shape")?;
                    ensure(want_bnd()?.contains(&Dyadic::zero()), "zero outside the range")
                }
                "square" => {
                    arity(1)?;
                    let Node::Mul(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(a == b, "not a square")?;
                    let m = bnd(0, a)?.abs();
                    covers(want_bnd()?, &m.mul(&m))
                }
                "div_self" => {
                    arity(1)?;
                    let Node::Div(a, b) = node else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(a == b, "not a self quotient")?;
                    let o = on(0, a)?;
                    let nz = match &o.claim {
                        Claim::Bnd(i) => !i.contains_zero(),
                        Claim::Abs(i) => i.lo().is_positive(),
                        _ => false,
                    };
                    ensure(nz, "divisor may vanish")?;
                    ensure(want_bnd()?.contains(&Dyadic::one()), "one outside the range")
                }
                "rel_compose" => {
                    arity(2)?;
                    let Node::Add(l, m) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let Node::Add(x, y) = *ctx.arena.node(l) else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(*ctx.arena.node(m) == Node::Mul(x, y), "wrong expression shape")?;
                    let r = bnd(0, x)?.rel_compose(bnd(1, y)?).map_err(|e| e.to_string())?;
                    covers(want_bnd()?, &r)
                }
                "err_0" | "err_1" | "err_2" | "err_3" | "err_4" => {
                    let Node::Sub(r, x) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let Node::Round(f, y) = *ctx.arena.node(r) else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(x == y, "not a rounding error")?;
                    let (info, on_) = match name.as_str() {
                        "err_0" => {
                            arity(0)?;
                            (ErrorInfo::None, ErrorOn::Argument)
                        }
                        "err_1" => (ErrorInfo::Bnd(bnd(0, x)?), ErrorOn::Argument),
                        "err_2" => (ErrorInfo::Bnd(bnd(0, r)?), ErrorOn::Result),
                        "err_3" => (ErrorInfo::Abs(abs(0, x)?), ErrorOn::Argument),
                        _ => (ErrorInfo::Abs(abs(0, r)?), ErrorOn::Result),
                    };
                    if name != "err_0" {
                        arity(1)?;
                    }
                    let e = f
                        .abs_error_enclosure(info, on_)
                        .ok_or("no error bound for this format")?;
                    covers(want_bnd()?, &e)
                }
                "err_5" | "err_6" | "err_7" | "err_8" => {
                    arity(1)?;
                    let Node::Div(d, x) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let Node::Sub(r, y) = *ctx.arena.node(d) else {
                        return Err("wrong expression shape".into());
                    };
                    let Node::Round(f, z) = *ctx.arena.node(r) else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(x == y && y == z, "not a relative rounding error")?;
                    let (info, on_) = match name.as_str() {
                        "err_5" => (ErrorInfo::Bnd(bnd(0, x)?), ErrorOn::Argument),
                        "err_6" => (ErrorInfo::Bnd(bnd(0, r)?), ErrorOn::Result),
                        "err_7" => (ErrorInfo::Abs(abs(0, x)?), ErrorOn::Argument),
                        _ => (ErrorInfo::Abs(abs(0, r)?), ErrorOn::Result),
                    };
                    let e = f
                        .rel_error_enclosure(info, on_)
                        .ok_or("no relative bound for this range")?;
                    covers(want_bnd()?, &e)
                }
                "exact_rnd" => {
                    let Node::Sub(r, x) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let Node::Round(f, y) = *ctx.arena.node(r) else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(x == y, "not a rounding error")?;
                    ensure(fix(0, x)? >= f.min_exponent(), "exponent below the format")?;
                    match f.precision() {
                        Some(p) => {
                            arity(2)?;
                            ensure(flt(1, x)? <= p, "precision above the format")?;
                        }
                        None => arity(1)?,
                    }
                    ensure(want_bnd()?.contains(&Dyadic::zero()), "zero outside the range")
                }
                "rnd" => {
                    arity(1)?;
                    let Node::Round(f, x) = node else {
                        return Err("wrong expression shape".into());
                    };
                    covers(want_bnd()?, &f.round_interval(bnd(0, x)?))
                }
                "rnd_clip" => {
                    arity(1)?;
                    let Node::Round(f, _) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let j = bnd(0, s)?;
                    let i = want_bnd()?;
                    ensure(
                        *i.lo() <= f.round_up(j.lo()) && *i.hi() >= f.round_down(j.hi()),
                        "range too narrow",
                    )
                }
                "fix_rnd" => {
                    arity(0)?;
                    let Node::Round(f, _) = node else {
                        return Err("wrong expression shape".into());
                    };
                    ensure(want_fix()? <= f.min_exponent(), "exponent too large")
                }
                "flt_rnd" => {
                    arity(0)?;
                    let Node::Round(f, _) = node else {
                        return Err("wrong expression shape".into());
                    };
                    let p = f.precision().ok_or("not a floating-point format")?;
                    ensure(want_flt()? >= p, "precision too small")
                }
                "relop_val" | "relop_abs" | "relop_rel" => {
                    arity(1)?;
                    let (v, x) = match (name.as_str(), &node) {
                        ("relop_val", _) => (s, None),
                        ("relop_abs", Node::Sub(v, x)) => (*v, Some(*x)),
                        ("relop_rel", Node::Div(d, x)) => match *ctx.arena.node(*d) {
                            Node::Sub(v, y) if y == *x => (v, Some(*x)),
                            _ => return Err("wrong expression shape".into()),
                        },
                        _ => return Err("wrong expression shape".into()),
                    };
                    let Node::Rel(op, p, q) = *ctx.arena.node(v) else {
                        return Err("wrong expression shape".into());
                    };
                    let exact = ctx
                        .arena
                        .lookup(&rel_exact_node(op.kind, p, q))
                        .ok_or("exact operation missing")?;
                    ensure(x.is_none_or(|x| x == exact), "not the exact operation")?;
                    let j = bnd(0, exact)?;
                    ensure(op.applies_to(j), "result may fall below the minimum exponent")?;
                    let eps = op.error_bound();
                    let r = match name.as_str() {
                        "relop_val" => j.mul(&pt(Dyadic::one()).add(&eps)),
                        "relop_abs" => j.mul(&eps),
                        _ => {
                            ensure(!j.contains_zero(), "relative error of a vanishing value")?;
                            eps
                        }
                    };
                    covers(want_bnd()?, &r)
                }
                other => Err(format!("unknown theorem `{other}`")),
            }
        }
    }
}

/// `out` contains `{j / k}` for `j` in `num` and `k` in `den`, where `den`
/// excludes zero. The quotient is monotone in each argument, so the corners
/// suffice; each corner is checked by multiplying through by `k`.
fn quotient_covers(out: &Interval, num: &Interval, den: &Interval) -> Result<(), String> {
    ensure(!den.contains_zero(), "divisor may vanish")?;
    for j in [num.lo(), num.hi()] {
        for k in [den.lo(), den.hi()] {
            let (lo_k, hi_k) = (out.lo() * k, out.hi() * k);
            let ok = if k.is_positive() {
                &lo_k <= j && j <= &hi_k
            } else {
                &lo_k >= j && j >= &hi_k
            };
            ensure(ok, "quotient outside the range")?;
        }
    }
    Ok(())
}

fn check_conclusion(ctx: &TileCtx, lemmas: &[Lemma], c: &Conclusion) -> Result<(), String> {
    match c {
        Conclusion::Prove { goal, lemma } => {
            let g = ctx.goals.get(*goal).ok_or("unknown goal")?;
            let l = &lemmas[*lemma];
            ensure(l.subject == g.expr, "lemma about another expression")?;
            let Claim::Bnd(i) = &l.claim else {
                return Err("not an enclosure".into());
            };
            let ok = match &g.kind {
                AtomKind::In(lo, hi) => i.lo().cmp_rational(lo).is_ge() && i.hi().cmp_rational(hi).is_le(),
                AtomKind::Le(c) => i.hi().cmp_rational(c).is_le(),
                AtomKind::Ge(c) => i.lo().cmp_rational(c).is_ge(),
                AtomKind::Query => false,
            };
            ensure(ok, "enclosure does not imply the goal")
        }
        Conclusion::Disjoint(a, b) => {
            let (x, y) = (&lemmas[*a], &lemmas[*b]);
            ensure(x.subject == y.subject, "lemmas about different expressions")?;
            match (&x.claim, &y.claim) {
                (Claim::Bnd(i), Claim::Bnd(j)) | (Claim::Abs(i), Claim::Abs(j)) => {
                    ensure(i.intersect(j).is_none(), "ranges overlap")
                }
                _ => Err("incomparable lemmas".into()),
            }
        }
        Conclusion::AbsSign(a, b) => {
            let (x, y) = (&lemmas[*a], &lemmas[*b]);
            ensure(x.subject == y.subject, "lemmas about different expressions")?;
            let (Claim::Bnd(i), Claim::Abs(j)) = (&x.claim, &y.claim) else {
                return Err("expected an enclosure and an absolute enclosure".into());
            };
            ensure(
                i.intersect(j).is_none() && i.intersect(&j.neg()).is_none(),
                "ranges overlap",
            )
        }
        Conclusion::Refine { lemma, hyp } => {
            let l = &lemmas[*lemma];
            let h = ctx.hyps.get(*hyp).ok_or("unknown hypothesis")?;
            ensure(h.expr == l.subject, "hypothesis about another expression")?;
            let Claim::Bnd(i) = &l.claim else {
                return Err("not an enclosure".into());
            };
            match &h.kind {
                AtomKind::Le(c) => ensure(i.lo().cmp_rational(c).is_gt(), "bound is compatible"),
                AtomKind::Ge(c) => ensure(i.hi().cmp_rational(c).is_lt(), "bound is compatible"),
                _ => Err("not a one-sided hypothesis".into()),
            }
        }
        Conclusion::Unrepresentable(lemma) => {
            let l = &lemmas[*lemma];
            let Node::Round(f, _) = ctx.arena.node(l.subject) else {
                return Err("not a rounded value".into());
            };
            let Claim::Bnd(i) = &l.claim else {
                return Err("not an enclosure".into());
            };
            ensure(f.representable_clip(i).is_none(), "range holds a representable value")
        }
    }
}

// ---------------------------------------------------------------------------
// widening

/// Replaces interval endpoints by dyadics with fewer significant bits,
/// from the last lemma backwards, whenever every lemma reading the interval
/// and the tile conclusion still check.
pub fn widen(cert: &Certificate) -> Certificate {
    let mut out = cert.clone();
    for s in &mut out.sequents {
        let Ok(boxes) = tile_hyps(&s.paving, &s.hyps) else {
            continue;
        };
        for (t, hyps) in s.tiles.iter_mut().zip(&boxes) {
            let ctx = TileCtx {
                arena: &cert.arena,
                hints: &cert.hints,
                hyps,
                goals: &s.goals,
            };
            widen_tile(&ctx, t);
        }
    }
    out
}

fn concl_refs(c: &Conclusion) -> Vec<usize> {
    match *c {
        Conclusion::Prove { lemma, .. } => vec![lemma],
        Conclusion::Disjoint(a, b) | Conclusion::AbsSign(a, b) => vec![a, b],
        Conclusion::Refine { lemma, .. } | Conclusion::Unrepresentable(lemma) => vec![lemma],
    }
}

fn widen_tile(ctx: &TileCtx, t: &mut TileCert) {
    let n = t.lemmas.len();
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, l) in t.lemmas.iter().enumerate() {
        for &o in &l.operands {
            if !users[o].contains(&j) {
                users[o].push(j);
            }
        }
    }
    let in_concl = concl_refs(&t.conclusion);
    for j in (0..n).rev() {
        for upper in [false, true] {
            let Some(i) = t.lemmas[j].claim.interval().cloned() else {
                continue;
            };
            let is_abs = matches!(t.lemmas[j].claim, Claim::Abs(_));
            let cur = if upper { i.hi().clone() } else { i.lo().clone() };
            for cand in candidates(&cur, upper) {
                if is_abs && cand.is_negative() {
                    continue;
                }
                let widened = if upper {
                    Interval::new(i.lo().clone(), cand)
                } else {
                    Interval::new(cand, i.hi().clone())
                };
                let saved = t.lemmas[j].claim.clone();
                t.lemmas[j].claim = if is_abs {
                    Claim::Abs(widened)
                } else {
                    Claim::Bnd(widened)
                };
                let ok = check_lemma(ctx, &t.lemmas, j).is_ok()
                    && users[j].iter().all(|&u| check_lemma(ctx, &t.lemmas, u).is_ok())
                    && (!in_concl.contains(&j) || check_conclusion(ctx, &t.lemmas, &t.conclusion).is_ok());
                if ok {
                    break;
                }
                t.lemmas[j].claim = saved;
            }
        }
    }
}

/// Endpoints further out than `cur` with fewer significant bits, simplest
/// first.
fn candidates(cur: &Dyadic, upper: bool) -> Vec<Dyadic> {
    let bits = cur.mantissa_bits();
    let mut out = Vec::new();
    if !cur.is_zero() && (upper == cur.is_negative()) {
        out.push(Dyadic::zero());
    }
    let dir = if upper { Direction::Up } else { Direction::Down };
    for b in 1..bits {
        let c = cur.round_bits(b as u32, dir);
        if c != *cur && !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// text format

fn fmt_format(f: &Format) -> String {
    match f.kind {
        FormatKind::Float {
            precision,
            min_exponent,
        } => format!("float:{precision}:{min_exponent}:{}", f.direction),
        FormatKind::Fixed { lsb } => format!("fixed:{lsb}:{}", f.direction),
    }
}

fn parse_format(s: &str) -> Option<Format> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["float", p, e, d] => {
            let p: u32 = p.parse().ok()?;
            if p == 0 {
                return None;
            }
            Some(Format::float(p, e.parse().ok()?, d.parse::<RoundingDirection>().ok()?))
        }
        ["fixed", l, d] => Some(Format::fixed(l.parse().ok()?, d.parse::<RoundingDirection>().ok()?)),
        _ => None,
    }
}

fn fmt_relop(op: &RelOp) -> String {
    let e = op.min_exponent.map_or("none".to_string(), |e| e.to_string());
    format!("{}:{}:{}", op.kind.name(), op.precision, e)
}

fn parse_relop(s: &str) -> Option<RelOp> {
    let parts: Vec<&str> = s.split(':').collect();
    let [k, p, e] = parts.as_slice() else { return None };
    let kind = match *k {
        "add" => RelKind::Add,
        "sub" => RelKind::Sub,
        "mul" => RelKind::Mul,
        _ => return None,
    };
    let min_exponent = if *e == "none" { None } else { Some(e.parse().ok()?) };
    Some(RelOp {
        kind,
        precision: p.parse().ok()?,
        min_exponent,
    })
}

fn fmt_atom(a: &Atom) -> String {
    match &a.kind {
        AtomKind::In(lo, hi) => format!("{} in {} {}", a.expr.0, rational_to_string(lo), rational_to_string(hi)),
        AtomKind::Le(c) => format!("{} le {}", a.expr.0, rational_to_string(c)),
        AtomKind::Ge(c) => format!("{} ge {}", a.expr.0, rational_to_string(c)),
        AtomKind::Query => format!("{} query", a.expr.0),
    }
}

fn fmt_claim(c: &Claim) -> String {
    match c {
        Claim::Bnd(i) => format!("bnd {} {}", i.lo(), i.hi()),
        Claim::Abs(i) => format!("abs {} {}", i.lo(), i.hi()),
        Claim::Fix(e) => format!("fix {e}"),
        Claim::Flt(p) => format!("flt {p}"),
    }
}

fn fmt_paving(p: &CertPaving, out: &mut String) {
    match p {
        CertPaving::Leaf => out.push_str("leaf\n"),
        CertPaving::Split { axis, at, below, above } => {
            let _ = writeln!(out, "split {} {}", axis.0, at);
            fmt_paving(below, out);
            fmt_paving(above, out);
        }
    }
}

impl Certificate {
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "certificate {FORMAT_VERSION}");
        let _ = writeln!(o, "tool {}", self.tool);
        let _ = writeln!(o, "script sha256 {}", self.script_sha256);
        let _ = writeln!(o, "precision {}", self.precision);
        for id in self.arena.ids() {
            let n = match self.arena.node(id) {
                Node::Const(c) => format!("const {}", rational_to_string(c)),
                Node::Var(v) => format!("var {v}"),
                Node::Neg(a) => format!("neg {}", a.0),
                Node::Abs(a) => format!("abs {}", a.0),
                Node::Sqrt(a) => format!("sqrt {}", a.0),
                Node::Add(a, b) => format!("add {} {}", a.0, b.0),
                Node::Sub(a, b) => format!("sub {} {}", a.0, b.0),
                Node::Mul(a, b) => format!("mul {} {}", a.0, b.0),
                Node::Div(a, b) => format!("div {} {}", a.0, b.0),
                Node::Fma(a, b, c) => format!("fma {} {} {}", a.0, b.0, c.0),
                Node::Round(f, a) => format!("round {} {}", fmt_format(f), a.0),
                Node::Rel(op, a, b) => format!("rel {} {} {}", fmt_relop(op), a.0, b.0),
            };
            let _ = writeln!(o, "node {} {n}", id.0);
            if let Some(name) = self.arena.name_of(id) {
                let _ = writeln!(o, "name {} {name}", id.0);
            }
        }
        for (k, h) in self.hints.iter().enumerate() {
            let tag = if h.ring { "ring" } else { "assumed-equality" };
            let _ = writeln!(o, "hint {k} {tag} {} {}", h.lhs.0, h.rhs.0);
        }
        for (si, s) in self.sequents.iter().enumerate() {
            let _ = writeln!(o, "sequent {si}");
            for h in &s.hyps {
                let _ = writeln!(o, "hyp {}", fmt_atom(h));
            }
            for g in &s.goals {
                let _ = writeln!(o, "goal {}", fmt_atom(g));
            }
            fmt_paving(&s.paving, &mut o);
            for (ti, t) in s.tiles.iter().enumerate() {
                let _ = writeln!(o, "tile {ti}");
                for (j, l) in t.lemmas.iter().enumerate() {
                    let by = match &l.by {
                        Justification::Hyp(k) => format!("hyp:{k}"),
                        Justification::Refine(k) => format!("refine:{k}"),
                        Justification::Intersect => "intersect".to_string(),
                        Justification::Named(n) => n.clone(),
                        Justification::Rewrite(r, _) => format!("rewrite:{r}"),
                        Justification::User(k) => format!("user:{k}"),
                    };
                    let _ = write!(o, "lemma {j} {by} {} {}", l.subject.0, fmt_claim(&l.claim));
                    if !l.operands.is_empty() {
                        let ops: Vec<String> = l.operands.iter().map(|x| x.to_string()).collect();
                        let _ = write!(o, " ops {}", ops.join(" "));
                    }
                    if let Justification::Rewrite(_, b) = &l.by {
                        let bs: Vec<String> = b.bound().iter().map(|(v, e)| format!("{v}={}", e.0)).collect();
                        let _ = write!(o, " bind {}", bs.join(","));
                    }
                    o.push('\n');
                }
                let c = match &t.conclusion {
                    Conclusion::Prove { goal, lemma } => format!("prove {goal} {lemma}"),
                    Conclusion::Disjoint(a, b) => format!("absurd disjoint {a} {b}"),
                    Conclusion::AbsSign(a, b) => format!("absurd abssign {a} {b}"),
                    Conclusion::Refine { lemma, hyp } => format!("absurd refine {lemma} {hyp}"),
                    Conclusion::Unrepresentable(a) => format!("absurd unrepresentable {a}"),
                };
                let _ = writeln!(o, "{c}");
            }
        }
        o.push_str("end\n");
        o
    }

    pub fn parse(text: &str) -> Result<Certificate, CheckError> {
        Reader::new(text).certificate()
    }
}

struct Reader<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

type R<T> = Result<T, CheckError>;

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Reader { lines, pos: 0 }
    }

    fn err<T>(&self, msg: &str) -> R<T> {
        let line = self.lines.get(self.pos).map_or(0, |l| l.0);
        Err(CheckError::Structural(format!("line {line}: {msg}")))
    }

    fn peek(&self) -> Option<&str> {
        self.lines.get(self.pos).and_then(|l| l.1.first().copied())
    }

    fn next(&mut self, head: &str) -> R<Vec<&'a str>> {
        match self.lines.get(self.pos) {
            Some((_, t)) if t[0] == head => {
                self.pos += 1;
                Ok(t[1..].to_vec())
            }
            _ => self.err(&format!("expected `{head}`")),
        }
    }

    fn num<T: std::str::FromStr>(&self, s: Option<&&str>) -> R<T> {
        match s.and_then(|s| s.parse().ok()) {
            Some(v) => Ok(v),
            None => self.err("expected a number"),
        }
    }

    fn id(&self, s: Option<&&str>, n: usize) -> R<ExprId> {
        let v: u32 = self.num(s)?;
        if (v as usize) < n {
            Ok(ExprId(v))
        } else {
            self.err("unknown expression")
        }
    }

    fn dyadic(&self, s: Option<&&str>) -> R<Dyadic> {
        match s.and_then(|s| parse_dyadic(s)) {
            Some(d) => Ok(d),
            None => self.err("expected a dyadic `mbe`"),
        }
    }

    fn rational(&self, s: Option<&&str>) -> R<ExactRational> {
        match s.and_then(|s| parse_rational(s)) {
            Some(d) => Ok(d),
            None => self.err("expected a rational"),
        }
    }

    fn interval(&self, a: Option<&&str>, b: Option<&&str>) -> R<Interval> {
        match Interval::try_new(self.dyadic(a)?, self.dyadic(b)?) {
            Some(i) => Ok(i),
            None => self.err("empty interval"),
        }
    }

    fn certificate(&mut self) -> R<Certificate> {
        let v = self.next("certificate")?;
        if v.first() != Some(&FORMAT_VERSION.to_string().as_str()) {
            return self.err("unsupported certificate version");
        }
        let tool = self.next("tool")?.join(" ");
        let sh = self.next("script")?;
        let script_sha256 = match sh.as_slice() {
            ["sha256", h] => h.to_string(),
            _ => return self.err("expected `script sha256 HEX`"),
        };
        let p = self.next("precision")?;
        let precision = self.num(p.first())?;
        let mut arena = Arena::new();
        while self.peek() == Some("node") || self.peek() == Some("name") {
            if self.peek() == Some("name") {
                let t = self.next("name")?;
                let id = self.id(t.first(), arena.len())?;
                let name = t.get(1).map(|s| s.to_string());
                match name {
                    Some(n) => arena.name(id, &n),
                    None => return self.err("expected a name"),
                }
                continue;
            }
            let t = self.next("node")?;
            let idx: usize = self.num(t.first())?;
            let n = arena.len();
            let a = |k: usize| self.id(t.get(k), n);
            let node = match t.get(1).copied() {
                Some("const") => Node::Const(self.rational(t.get(2))?),
                Some("var") => match t.get(2) {
                    Some(v) => Node::Var(v.to_string()),
                    None => return self.err("expected a variable name"),
                },
                Some("neg") => Node::Neg(a(2)?),
                Some("abs") => Node::Abs(a(2)?),
                Some("sqrt") => Node::Sqrt(a(2)?),
                Some("add") => Node::Add(a(2)?, a(3)?),
                Some("sub") => Node::Sub(a(2)?, a(3)?),
                Some("mul") => Node::Mul(a(2)?, a(3)?),
                Some("div") => Node::Div(a(2)?, a(3)?),
                Some("fma") => Node::Fma(a(2)?, a(3)?, a(4)?),
                Some("round") => match t.get(2).and_then(|s| parse_format(s)) {
                    Some(f) => Node::Round(f, a(3)?),
                    None => return self.err("bad format"),
                },
                Some("rel") => match t.get(2).and_then(|s| parse_relop(s)) {
                    Some(op) => Node::Rel(op, a(3)?, a(4)?),
                    None => return self.err("bad operator"),
                },
                _ => return self.err("unknown node kind"),
            };
            if idx != n || arena.intern(node).index() != n {
                return self.err("expression table out of order or duplicated");
            }
        }
        let n = arena.len();
        let mut hints = Vec::new();
        while self.peek() == Some("hint") {
            let t = self.next("hint")?;
            let k: usize = self.num(t.first())?;
            if k != hints.len() {
                return self.err("hints out of order");
            }
            let ring = match t.get(1).copied() {
                Some("ring") => true,
                Some("assumed-equality") => false,
                _ => return self.err("expected `ring` or `assumed-equality`"),
            };
            let (lhs, rhs) = (self.id(t.get(2), n)?, self.id(t.get(3), n)?);
            if ring && !ring_equal(&arena, lhs, rhs) {
                return self.err("identity is not a ring identity");
            }
            hints.push(HintCert { lhs, rhs, ring });
        }
        let mut sequents = Vec::new();
        while self.peek() == Some("sequent") {
            let t = self.next("sequent")?;
            if self.num::<usize>(t.first())? != sequents.len() {
                return self.err("sequents out of order");
            }
            let mut hyps = Vec::new();
            while self.peek() == Some("hyp") {
                let t = self.next("hyp")?;
                hyps.push(self.atom(&t, n)?);
            }
            let mut goals = Vec::new();
            while self.peek() == Some("goal") {
                let t = self.next("goal")?;
                goals.push(self.atom(&t, n)?);
            }
            let paving = self.paving(n, 0)?;
            let mut tiles = Vec::new();
            while self.peek() == Some("tile") {
                let t = self.next("tile")?;
                if self.num::<usize>(t.first())? != tiles.len() {
                    return self.err("tiles out of order");
                }
                tiles.push(self.tile(n)?);
            }
            sequents.push(SequentCert {
                hyps,
                goals,
                paving,
                tiles,
            });
        }
        self.next("end")?;
        if self.pos != self.lines.len() {
            return self.err("trailing content");
        }
        let cert = Certificate {
            tool,
            script_sha256,
            precision,
            arena,
            hints,
            sequents,
        };
        structure(&cert)?;
        Ok(cert)
    }

    fn atom(&self, t: &[&str], n: usize) -> R<Atom> {
        let expr = self.id(t.first(), n)?;
        let kind = match t.get(1).copied() {
            Some("in") => {
                let (lo, hi) = (self.rational(t.get(2))?, self.rational(t.get(3))?);
                if lo > hi {
                    return self.err("empty range");
                }
                AtomKind::In(lo, hi)
            }
            Some("le") => AtomKind::Le(self.rational(t.get(2))?),
            Some("ge") => AtomKind::Ge(self.rational(t.get(2))?),
            Some("query") => AtomKind::Query,
            _ => return self.err("bad atom"),
        };
        Ok(Atom { expr, kind })
    }

    fn paving(&mut self, n: usize, depth: usize) -> R<CertPaving> {
        if depth > 10_000 {
            return self.err("paving too deep");
        }
        match self.peek() {
            Some("leaf") => {
                self.next("leaf")?;
                Ok(CertPaving::Leaf)
            }
            Some("split") => {
                let t = self.next("split")?;
                let axis = self.id(t.first(), n)?;
                let at = self.dyadic(t.get(1))?;
                let below = Box::new(self.paving(n, depth + 1)?);
                let above = Box::new(self.paving(n, depth + 1)?);
                Ok(CertPaving::Split { axis, at, below, above })
            }
            _ => self.err("expected `leaf` or `split`"),
        }
    }

    fn tile(&mut self, n: usize) -> R<TileCert> {
        let mut lemmas = Vec::new();
        while self.peek() == Some("lemma") {
            let t = self.next("lemma")?;
            if self.num::<usize>(t.first())? != lemmas.len() {
                return self.err("lemmas out of order");
            }
            let Some(by) = t.get(1) else {
                return self.err("missing theorem");
            };
            let subject = self.id(t.get(2), n)?;
            let (claim, mut k) = match t.get(3).copied() {
                Some("bnd") => (Claim::Bnd(self.interval(t.get(4), t.get(5))?), 6),
                Some("abs") => (Claim::Abs(self.interval(t.get(4), t.get(5))?), 6),
                Some("fix") => (Claim::Fix(self.num(t.get(4))?), 5),
                Some("flt") => (Claim::Flt(self.num(t.get(4))?), 5),
                _ => return self.err("bad predicate"),
            };
            let mut operands = Vec::new();
            if t.get(k) == Some(&"ops") {
                k += 1;
                while k < t.len() && t[k] != "bind" {
                    operands.push(self.num(t.get(k))?);
                    k += 1;
                }
            }
            let mut bindings = Bindings::default();
            if t.get(k) == Some(&"bind") {
                let Some(spec) = t.get(k + 1) else {
                    return self.err("missing bindings");
                };
                for part in spec.split(',') {
                    let Some((v, e)) = part.split_once('=') else {
                        return self.err("bad binding");
                    };
                    let mut cs = v.chars();
                    let (Some(c), None) = (cs.next(), cs.next()) else {
                        return self.err("bad binding");
                    };
                    if !METAVARS.contains(&c) {
                        return self.err("unknown metavariable");
                    }
                    bindings.set(c, self.id(Some(&e), n)?);
                }
                k += 2;
            }
            if k != t.len() {
                return self.err("trailing tokens on lemma line");
            }
            let by = if let Some(r) = by.strip_prefix("hyp:") {
                Justification::Hyp(self.num(Some(&r))?)
            } else if let Some(r) = by.strip_prefix("refine:") {
                Justification::Refine(self.num(Some(&r))?)
            } else if let Some(r) = by.strip_prefix("user:") {
                Justification::User(self.num(Some(&r))?)
            } else if let Some(r) = by.strip_prefix("rewrite:") {
                Justification::Rewrite(r.to_string(), bindings)
            } else if *by == "intersect" {
                Justification::Intersect
            } else {
                Justification::Named(by.to_string())
            };
            lemmas.push(Lemma {
                by,
                subject,
                claim,
                operands,
            });
        }
        let t = match self.peek() {
            Some("prove") => {
                let t = self.next("prove")?;
                Conclusion::Prove {
                    goal: self.num(t.first())?,
                    lemma: self.num(t.get(1))?,
                }
            }
            Some("absurd") => {
                let t = self.next("absurd")?;
                match t.first().copied() {
                    Some("disjoint") => Conclusion::Disjoint(self.num(t.get(1))?, self.num(t.get(2))?),
                    Some("abssign") => Conclusion::AbsSign(self.num(t.get(1))?, self.num(t.get(2))?),
                    Some("refine") => Conclusion::Refine {
                        lemma: self.num(t.get(1))?,
                        hyp: self.num(t.get(2))?,
                    },
                    Some("unrepresentable") => Conclusion::Unrepresentable(self.num(t.get(1))?),
                    _ => return self.err("unknown contradiction"),
                }
            }
            _ => return self.err("expected a tile conclusion"),
        };
        Ok(TileCert { lemmas, conclusion: t })
    }
}
