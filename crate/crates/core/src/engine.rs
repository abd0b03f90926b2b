//! Saturation prover.
//!
//! Every node reachable from the goals and hypotheses gets a set of schemes:
//! ways of deriving a BND, ABS, FIX or FLT fact about it from facts about
//! other nodes. Schemes are re-evaluated whenever a fact they read improves,
//! until nothing changes. Rewriting adds new nodes one level at a time, so
//! the search is breadth-first over rewrite depth.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::dyadic::{Direction, Dyadic, ExactRational, DEFAULT_PRECISION};
use crate::expr::{rel_exact_node, Arena, ExprId, Node};
use crate::formats::{ErrorInfo, ErrorOn, FormatKind};
use crate::interval::Interval;
use crate::logic::{decompose, select_disjunct};
use crate::parser::{Atom, AtomKind, Hint, HintKind, Script};
use crate::rules::{apply_rule, rules, Approximations, Bindings, GuardKind};

#[derive(Clone, Debug)]
pub struct Config {
    /// Mantissa bits of derived interval endpoints.
    pub precision: u32,
    /// Propagation rounds per rewrite level.
    pub max_iterations: usize,
    /// Scheme evaluations per proof attempt.
    pub max_applications: usize,
    /// Rewrite levels explored.
    pub max_depth: usize,
    /// No rewriting once the arena holds this many nodes.
    pub max_nodes: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            precision: DEFAULT_PRECISION,
            max_iterations: 100,
            max_applications: 1_000_000,
            max_depth: 20,
            max_nodes: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredKind {
    Bnd,
    Abs,
    Fix,
    Flt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pred {
    Bnd(Interval),
    Abs(Interval),
    Fix(i64),
    Flt(u32),
}

impl Pred {
    pub fn kind(&self) -> PredKind {
        match self {
            Pred::Bnd(_) => PredKind::Bnd,
            Pred::Abs(_) => PredKind::Abs,
            Pred::Fix(_) => PredKind::Fix,
            Pred::Flt(_) => PredKind::Flt,
        }
    }

    pub fn interval(&self) -> Option<&Interval> {
        match self {
            Pred::Bnd(i) | Pred::Abs(i) => Some(i),
            _ => None,
        }
    }
}

pub type StepId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Theorem {
    /// Hypothesis `i` of the sequent.
    Hyp(usize),
    /// One-sided hypothesis `i` applied to an existing enclosure.
    Refine(usize),
    /// Two enclosures of the same subject.
    Intersect,
    Named(&'static str),
    Rewrite(&'static str, Bindings),
    /// User rewrite hint `i`.
    User(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub theorem: Theorem,
    pub subject: ExprId,
    pub pred: Pred,
    pub operands: Vec<StepId>,
}

/// Evidence that the hypotheses cannot hold together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Absurd {
    /// Two BND or two ABS facts on one subject with disjoint intervals.
    Disjoint(StepId, StepId),
    /// A BND fact violating one-sided hypothesis `i`.
    Refine(StepId, usize),
    /// A BND and an ABS fact on one subject that exclude each other.
    AbsSign(StepId, StepId),
    /// A BND fact on a rounded value containing no representable number.
    Unrepresentable(StepId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Goal `goal` holds by step `step`.
    Proved {
        goal: usize,
        step: StepId,
    },
    Absurd(Absurd),
    Unproved,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub steps: Vec<Step>,
    pub verdict: Verdict,
    /// Budget ran out before the search space was exhausted.
    pub exhausted: bool,
    /// Final enclosure of each goal expression.
    pub best: Vec<Option<Interval>>,
}

impl Outcome {
    pub fn proved(&self) -> bool {
        !matches!(self.verdict, Verdict::Unproved)
    }
}

/// Directed approximation relation.
#[derive(Clone, Debug, Default)]
pub struct Pairs {
    forward: HashMap<ExprId, Vec<ExprId>>,
    backward: HashMap<ExprId, Vec<ExprId>>,
}

impl Pairs {
    pub fn insert(&mut self, approx: ExprId, exact: ExprId) -> bool {
        if approx == exact {
            return false;
        }
        let f = self.forward.entry(approx).or_default();
        if f.contains(&exact) {
            return false;
        }
        f.push(exact);
        self.backward.entry(exact).or_default().push(approx);
        true
    }

    pub fn contains(&self, approx: ExprId, exact: ExprId) -> bool {
        self.forward.get(&approx).is_some_and(|v| v.contains(&exact))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ExprId, ExprId)> + '_ {
        self.forward.iter().flat_map(|(a, v)| v.iter().map(move |e| (*a, *e)))
    }
}

impl Approximations for Pairs {
    fn approximated(&self, e: ExprId) -> Vec<ExprId> {
        self.forward.get(&e).cloned().unwrap_or_default()
    }

    fn approximants(&self, e: ExprId) -> Vec<ExprId> {
        self.backward.get(&e).cloned().unwrap_or_default()
    }
}

/// Pairs implied by rounding nodes and under-specified operators; the exact
/// counterpart of each under-specified operator is interned on the way.
fn node_pairs(arena: &mut Arena, pairs: &mut Pairs) {
    let ids: Vec<ExprId> = arena.ids().collect();
    for id in ids {
        match arena.node(id).clone() {
            Node::Round(_, a) => {
                pairs.insert(id, a);
            }
            Node::Rel(op, a, b) => {
                let exact = arena.intern(rel_exact_node(op.kind, a, b));
                pairs.insert(id, exact);
            }
            _ => {}
        }
    }
}

/// `x - y` and `(x - y) / y` hypotheses make `x` an approximation of `y`.
fn hypothesis_pair(arena: &Arena, h: &Atom) -> Option<(ExprId, ExprId)> {
    if !matches!(h.kind, AtomKind::In(..)) {
        return None;
    }
    match arena.node(h.expr) {
        Node::Sub(x, y) => Some((*x, *y)),
        Node::Div(n, d) => match arena.node(*n) {
            Node::Sub(x, y) if y == d => Some((*x, *y)),
            _ => None,
        },
        _ => None,
    }
}

/// Approximation pairs found without user hints, for every sequent of the
/// script. Used to flag redundant `~` hints.
pub fn automatic_pairs(script: &Script) -> HashSet<(ExprId, ExprId)> {
    let mut arena = script.arena.clone();
    let mut pairs = Pairs::default();
    node_pairs(&mut arena, &mut pairs);
    if let Ok(seqs) = decompose(&script.prop) {
        for s in &seqs {
            for h in &s.hyps {
                if let Some((x, y)) = hypothesis_pair(&arena, h) {
                    pairs.insert(x, y);
                }
            }
        }
    }
    pairs.iter().collect()
}

#[derive(Clone, Debug, Default)]
struct Facts {
    bnd: Option<(Interval, StepId)>,
    abs: Option<(Interval, StepId)>,
    fix: Option<(i64, StepId)>,
    flt: Option<(u32, StepId)>,
}

#[derive(Clone, Debug)]
enum SchemeKind {
    Named(&'static str),
    Rewrite {
        rule: &'static str,
        bindings: Bindings,
        rhs: ExprId,
        guards: Vec<(GuardKind, ExprId)>,
    },
    User {
        hint: usize,
        rhs: ExprId,
    },
    Refine(usize),
}

#[derive(Clone, Debug)]
struct Scheme {
    kind: SchemeKind,
    target: ExprId,
}

enum Eval {
    Fact(Pred, Vec<StepId>),
    Absurd(Absurd),
}

/// Theorems attempted on every node, whatever its shape.
const GENERIC: [&str; 7] = [
    "abs_of_bnd",
    "bnd_of_abs",
    "bnd_abs_refine",
    "fix_of_flt",
    "flt_of_fix",
    "fix_of_point",
    "flt_of_point",
];

pub struct Prover<'a> {
    arena: &'a mut Arena,
    hints: &'a [Hint],
    hyps: Vec<Atom>,
    goals: Vec<Atom>,
    cfg: Config,
    pairs: Pairs,
    facts: Vec<Facts>,
    steps: Vec<Step>,
    schemes: Vec<Scheme>,
    watchers: HashMap<ExprId, Vec<usize>>,
    expanded: HashSet<ExprId>,
    by_depth: Vec<Vec<ExprId>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    applications: usize,
    absurd: Option<Absurd>,
    exhausted: bool,
}

impl<'a> Prover<'a> {
    pub fn new(arena: &'a mut Arena, hints: &'a [Hint], hyps: Vec<Atom>, goals: Vec<Atom>, cfg: Config) -> Self {
        let mut pairs = Pairs::default();
        node_pairs(arena, &mut pairs);
        for h in &hyps {
            if let Some((x, y)) = hypothesis_pair(arena, h) {
                pairs.insert(x, y);
            }
        }
        for hint in hints {
            if let HintKind::Approx { approx, exact } = hint.kind {
                pairs.insert(approx, exact);
            }
        }
        Prover {
            arena,
            hints,
            hyps,
            goals,
            cfg,
            pairs,
            facts: Vec::new(),
            steps: Vec::new(),
            schemes: Vec::new(),
            watchers: HashMap::new(),
            expanded: HashSet::new(),
            by_depth: vec![Vec::new()],
            queue: VecDeque::new(),
            queued: Vec::new(),
            applications: 0,
            absurd: None,
            exhausted: false,
        }
    }

    pub fn pairs(&self) -> &Pairs {
        &self.pairs
    }

    /// Runs the search and reports the first goal proved, trying goals in
    /// order after each rewrite level.
    pub fn run(mut self) -> Outcome {
        self.seed();
        let roots: Vec<ExprId> = self.goals.iter().chain(self.hyps.iter()).map(|a| a.expr).collect();
        for r in roots {
            self.expand(r, 0);
        }
        let mut verdict = Verdict::Unproved;
        for level in 0..=self.cfg.max_depth {
            if level > 0 {
                if self.arena.len() >= self.cfg.max_nodes {
                    self.exhausted = true;
                    break;
                }
                let nodes = std::mem::take(&mut self.by_depth[level - 1]);
                for &e in &nodes {
                    self.rewrite(e, level);
                }
                self.by_depth[level - 1] = nodes;
            }
            self.propagate();
            if let Some(a) = &self.absurd {
                verdict = Verdict::Absurd(a.clone());
                break;
            }
            if let Some((goal, step)) = self.check_goals(false) {
                verdict = Verdict::Proved { goal, step };
                break;
            }
            if self.exhausted || self.by_depth.get(level).is_none_or(|v| v.is_empty()) {
                break;
            }
        }
        // unspecified ranges are answered once the search is over, so that
        // the answer is as tight as the search allows
        if verdict == Verdict::Unproved {
            if let Some((goal, step)) = self.check_goals(true) {
                verdict = Verdict::Proved { goal, step };
            }
        }
        let best = self
            .goals
            .iter()
            .map(|g| self.bnd(g.expr).map(|(i, _)| i.clone()))
            .collect();
        Outcome {
            steps: self.steps,
            verdict,
            exhausted: self.exhausted,
            best,
        }
    }

    /// First goal that holds, trying disjuncts left to right; queries are
    /// only considered when `queries` is set.
    fn check_goals(&self, queries: bool) -> Option<(usize, StepId)> {
        let mut step = None;
        let k = select_disjunct(&self.goals, |g| {
            if g.is_query() && !queries {
                return false;
            }
            match self.bnd(g.expr) {
                Some((i, s)) if goal_holds(&g.kind, i) => {
                    step = Some(s);
                    true
                }
                _ => false,
            }
        })?;
        Some((k, step?))
    }

    fn seed(&mut self) {
        let hyps = self.hyps.clone();
        for (k, h) in hyps.iter().enumerate() {
            match &h.kind {
                AtomKind::In(lo, hi) => {
                    let i = Interval::outward(lo, hi, self.cfg.precision);
                    self.offer(h.expr, Pred::Bnd(i), Theorem::Hyp(k), vec![]);
                }
                AtomKind::Le(_) | AtomKind::Ge(_) => {
                    self.add_scheme(SchemeKind::Refine(k), h.expr, &[h.expr]);
                }
                AtomKind::Query => {}
            }
        }
    }

    fn facts(&self, e: ExprId) -> Option<&Facts> {
        self.facts.get(e.index())
    }

    fn bnd(&self, e: ExprId) -> Option<(&Interval, StepId)> {
        self.facts(e)?.bnd.as_ref().map(|(i, s)| (i, *s))
    }

    fn abs(&self, e: ExprId) -> Option<(&Interval, StepId)> {
        self.facts(e)?.abs.as_ref().map(|(i, s)| (i, *s))
    }

    fn fix(&self, e: ExprId) -> Option<(i64, StepId)> {
        self.facts(e)?.fix
    }

    fn flt(&self, e: ExprId) -> Option<(u32, StepId)> {
        self.facts(e)?.flt
    }

    fn add_scheme(&mut self, kind: SchemeKind, target: ExprId, watch: &[ExprId]) {
        let idx = self.schemes.len();
        self.schemes.push(Scheme { kind, target });
        let mut seen = Vec::new();
        for &w in watch {
            if !seen.contains(&w) {
                seen.push(w);
                self.watchers.entry(w).or_default().push(idx);
            }
        }
        self.queued.push(true);
        self.queue.push_back(idx);
    }

    fn named(&mut self, name: &'static str, target: ExprId, watch: &[ExprId]) {
        self.add_scheme(SchemeKind::Named(name), target, watch);
    }

    /// Registers the theorems about `e` and its subterms.
    fn expand(&mut self, e: ExprId, depth: usize) {
        if !self.expanded.insert(e) {
            return;
        }
        if self.by_depth.len() <= depth {
            self.by_depth.resize(depth + 1, Vec::new());
        }
        self.by_depth[depth].push(e);
        let node = self.arena.node(e).clone();
        for c in node.children() {
            self.expand(c, depth);
        }
        for name in GENERIC {
            self.named(name, e, &[e]);
        }
        match node {
            Node::Const(_) => self.named("constant", e, &[]),
            Node::Var(_) => {}
            Node::Neg(a) => {
                self.named("neg", e, &[a]);
                self.named("abs_neg", e, &[a]);
            }
            Node::Abs(a) => {
                self.named("abs", e, &[a]);
                self.named("bnd_absval", e, &[a]);
                self.named("abs_of_absval", a, &[e]);
            }
            Node::Sqrt(a) => {
                self.named("sqrt", e, &[a]);
            }
            Node::Add(a, b) => {
                self.named("add", e, &[a, b]);
                self.named("abs_add", e, &[a, b]);
                self.named("fix_add", e, &[a, b]);
                if let Node::Add(x, y) = *self.arena.node(a) {
                    if *self.arena.node(b) == Node::Mul(x, y) {
                        self.named("rel_compose", e, &[x, y]);
                    }
                }
            }
            Node::Sub(a, b) => {
                if a == b {
                    self.named("sub_self", e, &[]);
                }
                self.named("sub", e, &[a, b]);
                self.named("abs_sub", e, &[a, b]);
                self.named("fix_sub", e, &[a, b]);
                match *self.arena.node(a) {
                    Node::Round(_, x) if x == b => {
                        self.named("err_0", e, &[]);
                        self.named("err_1", e, &[b]);
                        self.named("err_2", e, &[a]);
                        self.named("err_3", e, &[b]);
                        self.named("err_4", e, &[a]);
                        self.named("exact_rnd", e, &[b]);
                    }
                    Node::Rel(op, x, y) if self.arena.lookup(&rel_exact_node(op.kind, x, y)) == Some(b) => {
                        self.named("relop_abs", e, &[b]);
                    }
                    _ => {}
                }
            }
            Node::Mul(a, b) => {
                if a == b {
                    self.named("square", e, &[a]);
                }
                self.named("mul", e, &[a, b]);
                self.named("abs_mul", e, &[a, b]);
                self.named("fix_mul", e, &[a, b]);
                self.named("flt_mul", e, &[a, b]);
            }
            Node::Div(a, b) => {
                if a == b {
                    self.named("div_self", e, &[a]);
                }
                self.named("div", e, &[a, b]);
                self.named("abs_div", e, &[a, b]);
                if let Node::Sub(r, x) = *self.arena.node(a) {
                    if x == b {
                        match *self.arena.node(r) {
                            Node::Round(..) => {
                                self.named("err_5", e, &[x]);
                                self.named("err_6", e, &[r]);
                                self.named("err_7", e, &[x]);
                                self.named("err_8", e, &[r]);
                            }
                            Node::Rel(op, p, q) if self.arena.lookup(&rel_exact_node(op.kind, p, q)) == Some(x) => {
                                self.named("relop_rel", e, &[x]);
                            }
                            _ => {}
                        }
                    }
                }
            }
            Node::Fma(a, b, c) => self.named("fma", e, &[a, b, c]),
            Node::Round(f, a) => {
                self.named("rnd", e, &[a]);
                self.named("rnd_clip", e, &[e]);
                self.named("fix_rnd", e, &[]);
                if matches!(f.kind, FormatKind::Float { .. }) {
                    self.named("flt_rnd", e, &[]);
                }
            }
            Node::Rel(op, a, b) => {
                let x = self.arena.intern(rel_exact_node(op.kind, a, b));
                self.expand(x, depth);
                self.named("relop_val", e, &[x]);
            }
        }
        for (k, hint) in self.hints.iter().enumerate() {
            if let HintKind::Rewrite { lhs, rhs } = hint.kind {
                if lhs == e {
                    self.expand(rhs, depth);
                    self.add_scheme(SchemeKind::User { hint: k, rhs }, e, &[rhs]);
                }
            }
        }
    }

    /// Applies the built-in rules at `e`; results live one level deeper.
    fn rewrite(&mut self, e: ExprId, level: usize) {
        if self.arena.len() >= self.cfg.max_nodes {
            self.exhausted = true;
            return;
        }
        for rule in rules() {
            let instances = apply_rule(self.arena, rule, e, &self.pairs);
            for inst in instances {
                let mut watch = vec![inst.rhs];
                self.expand(inst.rhs, level);
                for &(_, g) in &inst.guards {
                    self.expand(g, level);
                    watch.push(g);
                }
                self.add_scheme(
                    SchemeKind::Rewrite {
                        rule: inst.rule,
                        bindings: inst.bindings,
                        rhs: inst.rhs,
                        guards: inst.guards,
                    },
                    e,
                    &watch,
                );
            }
        }
    }

    fn propagate(&mut self) {
        let mut rounds = 0;
        while !self.queue.is_empty() && self.absurd.is_none() {
            rounds += 1;
            if rounds > self.cfg.max_iterations {
                self.exhausted = true;
                return;
            }
            let batch: Vec<usize> = self.queue.drain(..).collect();
            for &s in &batch {
                self.queued[s] = false;
            }
            for s in batch {
                self.applications += 1;
                if self.applications > self.cfg.max_applications {
                    self.exhausted = true;
                    self.queue.clear();
                    return;
                }
                let scheme = self.schemes[s].clone();
                match self.evaluate(&scheme) {
                    None => {}
                    Some(Eval::Absurd(a)) => {
                        self.absurd = Some(a);
                        return;
                    }
                    Some(Eval::Fact(pred, operands)) => {
                        let theorem = match &scheme.kind {
                            SchemeKind::Named(n) => Theorem::Named(n),
                            SchemeKind::Rewrite { rule, bindings, .. } => Theorem::Rewrite(rule, *bindings),
                            SchemeKind::User { hint, .. } => Theorem::User(*hint),
                            SchemeKind::Refine(k) => Theorem::Refine(*k),
                        };
                        self.offer(scheme.target, pred, theorem, operands);
                        if self.absurd.is_some() {
                            return;
                        }
                    }
                }
            }
        }
    }

    fn push_step(&mut self, subject: ExprId, pred: Pred, theorem: Theorem, operands: Vec<StepId>) -> StepId {
        self.steps.push(Step {
            theorem,
            subject,
            pred,
            operands,
        });
        self.steps.len() - 1
    }

    /// Records a derived fact if it improves what is known about `e`.
    fn offer(&mut self, e: ExprId, pred: Pred, theorem: Theorem, operands: Vec<StepId>) {
        if self.facts.len() <= e.index() {
            self.facts.resize(self.arena.len().max(e.index() + 1), Facts::default());
        }
        let changed = match pred {
            Pred::Bnd(i) => {
                let old = self.facts[e.index()].bnd.clone();
                let new = self.merge(e, old, i, true, theorem, operands);
                new.map(|n| self.facts[e.index()].bnd = Some(n)).is_some()
            }
            Pred::Abs(i) => {
                let old = self.facts[e.index()].abs.clone();
                let new = self.merge(e, old, i, false, theorem, operands);
                new.map(|n| self.facts[e.index()].abs = Some(n)).is_some()
            }
            Pred::Fix(v) => {
                if self.facts[e.index()].fix.is_some_and(|(o, _)| o >= v) {
                    false
                } else {
                    let s = self.push_step(e, Pred::Fix(v), theorem, operands);
                    self.facts[e.index()].fix = Some((v, s));
                    true
                }
            }
            Pred::Flt(v) => {
                if self.facts[e.index()].flt.is_some_and(|(o, _)| o <= v) {
                    false
                } else {
                    let s = self.push_step(e, Pred::Flt(v), theorem, operands);
                    self.facts[e.index()].flt = Some((v, s));
                    true
                }
            }
        };
        if changed {
            if let Some(ws) = self.watchers.get(&e) {
                for &w in ws {
                    if !self.queued[w] {
                        self.queued[w] = true;
                        self.queue.push_back(w);
                    }
                }
            }
        }
    }

    /// New stored interval, if `i` improves on `old`.
    fn merge(
        &mut self,
        e: ExprId,
        old: Option<(Interval, StepId)>,
        i: Interval,
        bnd: bool,
        theorem: Theorem,
        operands: Vec<StepId>,
    ) -> Option<(Interval, StepId)> {
        let i = if matches!(theorem, Theorem::Hyp(_)) {
            i
        } else {
            i.round_outward(self.cfg.precision)
        };
        let wrap = |i: Interval| if bnd { Pred::Bnd(i) } else { Pred::Abs(i) };
        let Some((o, os)) = old else {
            let s = self.push_step(e, wrap(i.clone()), theorem, operands);
            return Some((i, s));
        };
        if o.is_subset(&i) {
            return None;
        }
        let s = self.push_step(e, wrap(i.clone()), theorem, operands);
        if i.is_subset(&o) {
            return Some((i, s));
        }
        match o.intersect(&i) {
            None => {
                self.absurd = Some(Absurd::Disjoint(os, s));
                None
            }
            Some(k) => {
                let t = self.push_step(e, wrap(k.clone()), Theorem::Intersect, vec![os, s]);
                Some((k, t))
            }
        }
    }

    fn guard(&self, kind: GuardKind, g: ExprId) -> Option<StepId> {
        if let Some((i, s)) = self.bnd(g) {
            let ok = match kind {
                GuardKind::NonZero => !i.contains_zero(),
                GuardKind::NonNeg => i.is_nonneg(),
                GuardKind::Positive => i.is_positive(),
            };
            if ok {
                return Some(s);
            }
        }
        if kind == GuardKind::NonZero {
            if let Some((i, s)) = self.abs(g) {
                if i.lo().is_positive() {
                    return Some(s);
                }
            }
        }
        None
    }

    fn evaluate(&self, scheme: &Scheme) -> Option<Eval> {
        let e = scheme.target;
        let prec = self.cfg.precision;
        let fact = |p: Pred, ops: Vec<StepId>| Some(Eval::Fact(p, ops));
        match &scheme.kind {
            SchemeKind::Rewrite { rhs, guards, .. } => {
                let (i, s) = self.bnd(*rhs)?;
                let mut ops = vec![s];
                for &(k, g) in guards {
                    ops.push(self.guard(k, g)?);
                }
                fact(Pred::Bnd(i.clone()), ops)
            }
            SchemeKind::User { rhs, .. } => {
                let (i, s) = self.bnd(*rhs)?;
                fact(Pred::Bnd(i.clone()), vec![s])
            }
            SchemeKind::Refine(k) => {
                let (i, s) = self.bnd(e)?;
                let (lo, hi) = match &self.hyps[*k].kind {
                    AtomKind::Le(c) => (i.lo().clone(), i.hi().clone().min(bound_dyadic(c, true, prec))),
                    AtomKind::Ge(c) => (i.lo().clone().max(bound_dyadic(c, false, prec)), i.hi().clone()),
                    _ => return None,
                };
                match Interval::try_new(lo, hi) {
                    None => Some(Eval::Absurd(Absurd::Refine(s, *k))),
                    Some(j) if j != *i => fact(Pred::Bnd(j), vec![s]),
                    Some(_) => None,
                }
            }
            SchemeKind::Named(name) => self.named_theorem(name, e),
        }
    }

    fn named_theorem(&self, name: &str, e: ExprId) -> Option<Eval> {
        let prec = self.cfg.precision;
        let node = self.arena.node(e).clone();
        let fact = |p: Pred, ops: Vec<StepId>| Some(Eval::Fact(p, ops));
        let bnd = |x: ExprId| self.bnd(x).map(|(i, s)| (i.clone(), s));
        let abs = |x: ExprId| self.abs(x).map(|(i, s)| (i.clone(), s));
        let kids = node.children();
        let a = kids.first().copied();
        let b = kids.get(1).copied();
        match name {
            "abs_of_bnd" => {
                let (j, s) = bnd(e)?;
                fact(Pred::Abs(j.abs()), vec![s])
            }
            "bnd_of_abs" => {
                let (j, s) = abs(e)?;
                fact(Pred::Bnd(Interval::new(-j.hi(), j.hi().clone())), vec![s])
            }
            "bnd_abs_refine" => {
                let (j, s) = bnd(e)?;
                let (k, t) = abs(e)?;
                let pos = j.intersect(&k);
                let neg = j.intersect(&k.neg());
                let r = match (pos, neg) {
                    (None, None) => return Some(Eval::Absurd(Absurd::AbsSign(s, t))),
                    (Some(p), None) => p,
                    (None, Some(n)) => n,
                    (Some(p), Some(n)) => p.hull(&n),
                };
                if r == j {
                    return None;
                }
                fact(Pred::Bnd(r), vec![s, t])
            }
            "fix_of_flt" => {
                let (p, s) = self.flt(e)?;
                let (k, t) = abs(e)?;
                let l = k.lo().floor_log2()?;
                fact(Pred::Fix(l + 1 - p as i64), vec![s, t])
            }
            "flt_of_fix" => {
                let (q, s) = self.fix(e)?;
                let (k, t) = abs(e)?;
                let p = match k.hi().floor_log2() {
                    Some(l) => (l + 1 - q).max(1),
                    None => 1,
                };
                fact(Pred::Flt(u32::try_from(p).ok()?), vec![s, t])
            }
            "fix_of_point" => {
                let (j, s) = bnd(e)?;
                if !j.is_point() || j.lo().is_zero() {
                    return None;
                }
                fact(Pred::Fix(j.lo().exponent()), vec![s])
            }
            "flt_of_point" => {
                let (j, s) = bnd(e)?;
                if !j.is_point() {
                    return None;
                }
                let bits = j.lo().mantissa_bits().max(1);
                fact(Pred::Flt(u32::try_from(bits).ok()?), vec![s])
            }
            "constant" => {
                let Node::Const(c) = &node else { return None };
                fact(Pred::Bnd(Interval::outward(c, c, prec)), vec![])
            }
            "neg" => {
                let (j, s) = bnd(a?)?;
                fact(Pred::Bnd(j.neg()), vec![s])
            }
            "abs_neg" => {
                let (j, s) = abs(a?)?;
                fact(Pred::Abs(j), vec![s])
            }
            "abs" => {
                let (j, s) = abs(a?)?;
                fact(Pred::Bnd(j), vec![s])
            }
            "bnd_absval" => {
                let (j, s) = bnd(a?)?;
                fact(Pred::Bnd(j.abs()), vec![s])
            }
            "abs_of_absval" => {
                // target is the argument; its absolute value is the watched node
                let v = self.arena.lookup(&Node::Abs(e))?;
                let (j, s) = bnd(v)?;
                let lo = j.lo().clone().max(Dyadic::zero());
                fact(Pred::Abs(Interval::try_new(lo, j.hi().clone())?), vec![s])
            }
            "sqrt" => {
                let (j, s) = bnd(a?)?;
                if j.lo().is_negative() {
                    return None;
                }
                fact(Pred::Bnd(j.sqrt(prec).ok()?), vec![s])
            }
            "add" | "sub" | "mul" => {
                let (j, s) = bnd(a?)?;
                let (k, t) = bnd(b?)?;
                let r = match name {
                    "add" => j.add(&k),
                    "sub" => j.sub(&k),
                    _ => j.mul(&k),
                };
                fact(Pred::Bnd(r), vec![s, t])
            }
            "div" => {
                let (j, s) = bnd(a?)?;
                let (k, t) = bnd(b?)?;
                fact(Pred::Bnd(j.div(&k, prec).ok()?), vec![s, t])
            }
            "fma" => {
                let (j, s) = bnd(a?)?;
                let (k, t) = bnd(b?)?;
                let (l, u) = bnd(kids[2])?;
                fact(Pred::Bnd(j.mul(&k).add(&l)), vec![s, t, u])
            }
            "abs_add" | "abs_sub" => {
                let (j, s) = abs(a?)?;
                let (k, t) = abs(b?)?;
                let zero = Dyadic::zero();
                let lo = zero.max(j.lo() - k.hi()).max(k.lo() - j.hi());
                fact(Pred::Abs(Interval::new(lo, j.hi() + k.hi())), vec![s, t])
            }
            "abs_mul" => {
                let (j, s) = abs(a?)?;
                let (k, t) = abs(b?)?;
                fact(Pred::Abs(j.mul(&k)), vec![s, t])
            }
            "abs_div" => {
                let (j, s) = abs(a?)?;
                let (k, t) = abs(b?)?;
                if !k.lo().is_positive() {
                    return None;
                }
                fact(Pred::Abs(j.div(&k, prec).ok()?), vec![s, t])
            }
            "fix_add" | "fix_sub" => {
                let (f, s) = self.fix(a?)?;
                let (g, t) = self.fix(b?)?;
                fact(Pred::Fix(f.min(g)), vec![s, t])
            }
            "fix_mul" => {
                let (f, s) = self.fix(a?)?;
                let (g, t) = self.fix(b?)?;
                fact(Pred::Fix(f + g), vec![s, t])
            }
            "flt_mul" => {
                let (p, s) = self.flt(a?)?;
                let (q, t) = self.flt(b?)?;
                fact(Pred::Flt(p + q), vec![s, t])
            }
            "sub_self" => fact(Pred::Bnd(Interval::point(Dyadic::zero())), vec![]),
            "square" => {
                let (j, s) = bnd(a?)?;
                let m = j.abs();
                fact(Pred::Bnd(m.mul(&m)), vec![s])
            }
            "div_self" => {
                let s = self.guard(GuardKind::NonZero, a?)?;
                fact(Pred::Bnd(Interval::point(Dyadic::one())), vec![s])
            }
            "rel_compose" => {
                let Node::Add(l, _) = node else { return None };
                let Node::Add(x, y) = *self.arena.node(l) else {
                    return None;
                };
                let (j, s) = bnd(x)?;
                let (k, t) = bnd(y)?;
                fact(Pred::Bnd(j.rel_compose(&k).ok()?), vec![s, t])
            }
            "err_0" | "err_1" | "err_2" | "err_3" | "err_4" => {
                let (r, x) = (a?, b?);
                let Node::Round(f, _) = *self.arena.node(r) else {
                    return None;
                };
                let (info_node, on) = match name {
                    "err_0" => (None, ErrorOn::Argument),
                    "err_1" | "err_3" => (Some(x), ErrorOn::Argument),
                    _ => (Some(r), ErrorOn::Result),
                };
                let use_abs = matches!(name, "err_3" | "err_4");
                let (iv, ops) = match info_node {
                    None => (None, vec![]),
                    Some(n) => {
                        let (i, s) = if use_abs { abs(n)? } else { bnd(n)? };
                        (Some(i), vec![s])
                    }
                };
                let info = match (&iv, use_abs) {
                    (None, _) => ErrorInfo::None,
                    (Some(i), false) => ErrorInfo::Bnd(i),
                    (Some(i), true) => ErrorInfo::Abs(i),
                };
                fact(Pred::Bnd(f.abs_error_enclosure(info, on)?), ops)
            }
            "err_5" | "err_6" | "err_7" | "err_8" => {
                let Node::Sub(r, x) = *self.arena.node(a?) else {
                    return None;
                };
                let Node::Round(f, _) = *self.arena.node(r) else {
                    return None;
                };
                let (n, on) = match name {
                    "err_5" | "err_7" => (x, ErrorOn::Argument),
                    _ => (r, ErrorOn::Result),
                };
                let (i, s) = if matches!(name, "err_7" | "err_8") {
                    abs(n)?
                } else {
                    bnd(n)?
                };
                let info = if matches!(name, "err_7" | "err_8") {
                    ErrorInfo::Abs(&i)
                } else {
                    ErrorInfo::Bnd(&i)
                };
                fact(Pred::Bnd(f.rel_error_enclosure(info, on)?), vec![s])
            }
            "exact_rnd" => {
                let (r, x) = (a?, b?);
                let Node::Round(f, _) = *self.arena.node(r) else {
                    return None;
                };
                let (q, s) = self.fix(x)?;
                if q < f.min_exponent() {
                    return None;
                }
                let mut ops = vec![s];
                if let Some(p) = f.precision() {
                    let (m, t) = self.flt(x)?;
                    if m > p {
                        return None;
                    }
                    ops.push(t);
                }
                fact(Pred::Bnd(Interval::point(Dyadic::zero())), ops)
            }
            "rnd" => {
                let Node::Round(f, x) = node else { return None };
                let (j, s) = bnd(x)?;
                fact(Pred::Bnd(f.round_interval(&j)), vec![s])
            }
            "rnd_clip" => {
                let Node::Round(f, _) = node else { return None };
                let (j, s) = bnd(e)?;
                match f.representable_clip(&j) {
                    None => Some(Eval::Absurd(Absurd::Unrepresentable(s))),
                    Some(k) if k != j => fact(Pred::Bnd(k), vec![s]),
                    Some(_) => None,
                }
            }
            "fix_rnd" => {
                let Node::Round(f, _) = node else { return None };
                fact(Pred::Fix(f.min_exponent()), vec![])
            }
            "flt_rnd" => {
                let Node::Round(f, _) = node else { return None };
                fact(Pred::Flt(f.precision()?), vec![])
            }
            "relop_val" | "relop_abs" | "relop_rel" => {
                let (v, x) = match name {
                    "relop_val" => (e, None),
                    "relop_abs" => (a?, Some(b?)),
                    _ => {
                        let Node::Sub(v, x) = *self.arena.node(a?) else {
                            return None;
                        };
                        (v, Some(x))
                    }
                };
                let Node::Rel(op, p, q) = *self.arena.node(v) else {
                    return None;
                };
                let exact = x.or_else(|| self.arena.lookup(&rel_exact_node(op.kind, p, q)))?;
                let (j, s) = bnd(exact)?;
                if !op.applies_to(&j) {
                    return None;
                }
                let eps = op.error_bound();
                let r = match name {
                    "relop_val" => j.mul(&Interval::point(Dyadic::one()).add(&eps)),
                    "relop_abs" => j.mul(&eps),
                    _ => {
                        if j.contains_zero() {
                            return None;
                        }
                        eps
                    }
                };
                fact(Pred::Bnd(r), vec![s])
            }
            _ => None,
        }
    }
}

/// Whether an enclosure satisfies a goal atom.
pub fn goal_holds(kind: &AtomKind, i: &Interval) -> bool {
    match kind {
        AtomKind::In(lo, hi) => i.lo().cmp_rational(lo).is_ge() && i.hi().cmp_rational(hi).is_le(),
        AtomKind::Le(c) => i.hi().cmp_rational(c).is_le(),
        AtomKind::Ge(c) => i.lo().cmp_rational(c).is_ge(),
        AtomKind::Query => true,
    }
}

/// `c` rounded to `precision` bits in the direction that keeps `x <= c`
/// (`upper`) or `x >= c` true.
fn bound_dyadic(c: &ExactRational, upper: bool, precision: u32) -> Dyadic {
    let dir = if upper { Direction::Up } else { Direction::Down };
    Dyadic::from_rational(c, dir, precision)
}

/// Proves one sequent with the script's hints.
pub fn prove_sequent(arena: &mut Arena, hints: &[Hint], hyps: Vec<Atom>, goals: Vec<Atom>, cfg: &Config) -> Outcome {
    Prover::new(arena, hints, hyps, goals, cfg.clone()).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{parse_number, parse_rational};
    use crate::logic::Sequent;
    use crate::parser::parse;

    fn run(src: &str) -> (Script, Vec<Sequent>, Vec<Outcome>) {
        let mut s = parse(src).unwrap();
        let seqs = decompose(&s.prop).unwrap();
        let hints = s.hints.clone();
        let outs = seqs
            .iter()
            .map(|q| {
                prove_sequent(
                    &mut s.arena,
                    &hints,
                    q.hyps.clone(),
                    q.goals.clone(),
                    &Config::default(),
                )
            })
            .collect();
        (s, seqs, outs)
    }

    fn iv(lo: &str, hi: &str) -> Interval {
        Interval::new(
            Dyadic::from_rational_exact(&parse_rational(lo).unwrap()).unwrap(),
            Dyadic::from_rational_exact(&parse_rational(hi).unwrap()).unwrap(),
        )
    }

    fn bnd_of(steps: &[Step], s: StepId) -> Interval {
        match &steps[s].pred {
            Pred::Bnd(i) => i.clone(),
            p => panic!("{p:?}"),
        }
    }

    #[test]
    fn sum_of_ranges() {
        let (_, _, outs) = run("{ x in [1,2] /\\ y in [3,4] -> x + y in ? }");
        assert_eq!(outs[0].best[0], Some(iv("4", "6")));
    }

    #[test]
    fn first_section_example() {
        let (s, seqs, outs) =
            run("{ x - 2 in [-2,0] /\\ (x + 1 in [0,2] -> y in [3,4]) -> not x <= 1 \\/ x + y in ? }");
        let mut hull: Option<Interval> = None;
        for (q, o) in seqs.iter().zip(&outs) {
            let Verdict::Proved { goal, step } = o.verdict else {
                panic!("{:?}", o.verdict)
            };
            if q.goals[goal].is_query() {
                let i = bnd_of(&o.steps, step);
                hull = Some(match hull {
                    None => i,
                    Some(h) => h.hull(&i),
                });
            }
            assert_eq!(
                s.arena.display(q.goals[goal].expr),
                if q.goals.len() == 2 { "x + 1" } else { "x + y" }
            );
        }
        assert_eq!(hull, Some(iv("3", "5")));
    }

    #[test]
    fn self_difference() {
        let (_, _, outs) = run("{ x in [1,2] -> x - x in [0,0] }");
        assert!(matches!(outs[0].verdict, Verdict::Proved { .. }));
    }

    #[test]
    fn floor_error_composition() {
        let (_, _, outs) =
            run("@floor = fixed<0,dn>; { x - y in [-0.1,0.1] /\\ y in [-100,100] -> floor(x) - y in ? }");
        let i = outs[0].best[0].clone().unwrap();
        // outward enclosure of [-1.1, 0.1]
        assert!(i.lo().cmp_rational(&-q("1.1")).is_le());
        assert!(i.hi().cmp_rational(&q("0.1")).is_ge());
        let eps = Dyadic::pow2(-100);
        assert!((&Dyadic::from_rational(&-q("1.1"), Direction::Down, 128) - i.lo()) < eps);
        assert!((i.hi() - &Dyadic::from_rational(&q("0.1"), Direction::Down, 128)) < eps);
    }

    fn q(s: &str) -> ExactRational {
        parse_number(s).unwrap()
    }

    #[test]
    fn exact_rounding_from_representability() {
        let (s, seqs, outs) =
            run("@rnd = float<ieee_32,ne>; { a in [1,100] -> rnd(a * 8388676b-24) - a * 8388676b-24 in ? }");
        // a is not known to be an integer, so no exactness here
        assert!(outs[0].best[0].as_ref().is_some_and(|i| !i.is_point()));
        let _ = (s, seqs);
        let (_, _, outs) = run(
            "@rnd = float<ieee_32,ne>; @i = int<ne>; x = i(xx); { xx in [1,3] -> rnd(x * 8388676b-24) - x * 8388676b-24 in [0,0] }",
        );
        assert!(
            matches!(outs[0].verdict, Verdict::Proved { .. }),
            "{:?}",
            outs[0].verdict
        );
    }

    #[test]
    fn constant_representability() {
        let mut s = parse("{ 8388676b-24 in ? }").unwrap();
        let seqs = decompose(&s.prop).unwrap();
        let o = prove_sequent(
            &mut s.arena,
            &[],
            seqs[0].hyps.clone(),
            seqs[0].goals.clone(),
            &Config::default(),
        );
        let fix = o.steps.iter().find_map(|st| match st.pred {
            Pred::Fix(e) => Some(e),
            _ => None,
        });
        let flt = o.steps.iter().find_map(|st| match st.pred {
            Pred::Flt(p) => Some(p),
            _ => None,
        });
        // 8388676 = 4 * 2097169 with 2097169 odd and below 2^22
        assert_eq!(fix, Some(-22));
        assert_eq!(flt, Some(22));
        assert!(fix.unwrap() >= -24 && flt.unwrap() <= 23);
    }

    #[test]
    fn absolute_value_of_sum() {
        let (_, _, outs) = run("{ |a| in [1,2] /\\ |b| in [1,2] -> |a + b| in ? }");
        assert_eq!(outs[0].best[0], Some(iv("0", "4")));
    }

    #[test]
    fn contradiction_proves_everything() {
        let (_, _, outs) = run("{ x in [0,1] /\\ x in [2,3] -> y in [0,0] }");
        assert!(matches!(outs[0].verdict, Verdict::Absurd(Absurd::Disjoint(..))));
        let (_, _, outs) = run("{ x in [0,1] /\\ x >= 2 -> y in [0,0] }");
        assert!(matches!(outs[0].verdict, Verdict::Absurd(Absurd::Refine(..))));
    }

    #[test]
    fn one_sided_hypothesis_refines() {
        let (_, _, outs) = run("{ x in [0,10] /\\ x <= 3 -> x in [0,3] }");
        assert!(matches!(outs[0].verdict, Verdict::Proved { .. }));
        let (_, _, outs) = run("{ x <= 3 -> x in [0,3] }");
        assert!(!outs[0].proved());
    }

    #[test]
    fn automatic_pairs_cover_roundings_and_hypotheses() {
        let s = parse("@rnd = float<ieee_32,ne>; { x - y in [-1,1] /\\ z in [0,1] -> rnd(z) in ? }").unwrap();
        let pairs = automatic_pairs(&s);
        let x = s.arena.lookup(&Node::Var("x".into())).unwrap();
        let y = s.arena.lookup(&Node::Var("y".into())).unwrap();
        let z = s.arena.lookup(&Node::Var("z".into())).unwrap();
        assert!(pairs.contains(&(x, y)));
        assert!(pairs
            .iter()
            .any(|&(a, b)| b == z && matches!(s.arena.node(a), Node::Round(..))));
        assert_eq!(pairs.len(), 2);
    }
}
