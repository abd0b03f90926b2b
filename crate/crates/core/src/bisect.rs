//! Sub-pavings driven by `$` hints.
//!
//! A tile is the sequent with the range of every split variable narrowed.
//! Each tile is proved on its own; the sequent holds when every leaf of the
//! paving is proved. Hints run in order, each one refining only the leaves
//! the previous ones left unproved.

use num_traits::{One, Signed, Zero};

use crate::dyadic::{floor_log2_rational, Dyadic, ExactRational};
use crate::engine::{prove_sequent, Config, Outcome, Verdict};
use crate::expr::{Arena, ExprId};
use crate::logic::Sequent;
use crate::parser::{Atom, AtomKind, BisectAxis, BisectMode, Hint, HintKind};

#[derive(Clone, Debug)]
pub struct BisectConfig {
    /// Maximum number of halvings of one tile by dichotomy.
    pub max_depth: u32,
}

impl Default for BisectConfig {
    fn default() -> Self {
        BisectConfig { max_depth: 32 }
    }
}

/// Binary cover of the hypothesis box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Paving {
    /// Index into `SequentProof::tiles`.
    Leaf(usize),
    Split {
        axis: ExprId,
        at: Dyadic,
        below: Box<Paving>,
        above: Box<Paving>,
    },
}

impl Paving {
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<usize>) {
        match self {
            Paving::Leaf(i) => out.push(*i),
            Paving::Split { below, above, .. } => {
                below.collect(out);
                above.collect(out);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Tile {
    pub hyps: Vec<Atom>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug)]
pub struct SequentProof {
    pub paving: Paving,
    /// Only the tiles reachable from `paving` matter; refined tiles stay
    /// in the list so indices remain stable.
    pub tiles: Vec<Tile>,
    pub warnings: Vec<String>,
    /// Smallest tile left unproved, as `(axis, lo, hi)` ranges.
    pub failing: Option<Vec<(ExprId, ExactRational, ExactRational)>>,
}

impl SequentProof {
    pub fn proved(&self) -> bool {
        self.paving.leaves().iter().all(|&i| self.tiles[i].outcome.proved())
    }

    /// Hull of the per-tile enclosures of goal `g`, when every tile has one.
    pub fn answer(&self, g: usize) -> Option<crate::interval::Interval> {
        let mut acc: Option<crate::interval::Interval> = None;
        for i in self.paving.leaves() {
            let b = self.tiles[i].outcome.best[g].clone()?;
            acc = Some(match acc {
                None => b,
                Some(a) => a.hull(&b),
            });
        }
        acc
    }
}

struct Ctx<'a> {
    arena: &'a mut Arena,
    hints: &'a [Hint],
    goals: Vec<Atom>,
    cfg: &'a Config,
    tiles: Vec<Tile>,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn prove(&mut self, hyps: Vec<Atom>) -> usize {
        let outcome = prove_sequent(self.arena, self.hints, hyps.clone(), self.goals.clone(), self.cfg);
        self.tiles.push(Tile { hyps, outcome });
        self.tiles.len() - 1
    }
}

/// Proves `seq`, bisecting as directed by the `$` hints that concern it.
pub fn prove_with_hints(
    arena: &mut Arena,
    hints: &[Hint],
    seq: &Sequent,
    cfg: &Config,
    bcfg: &BisectConfig,
) -> SequentProof {
    let mut ctx = Ctx {
        arena,
        hints,
        goals: seq.goals.clone(),
        cfg,
        tiles: Vec::new(),
        warnings: Vec::new(),
    };
    let root = ctx.prove(seq.hyps.clone());
    let mut paving = Paving::Leaf(root);
    let mut failing = None;
    for hint in hints {
        let HintKind::Bisect { targets, axes } = &hint.kind else {
            continue;
        };
        if !targets.is_empty() && !seq.goals.iter().any(|g| targets.contains(&g.expr)) {
            continue;
        }
        let usable: Vec<&BisectAxis> = axes
            .iter()
            .filter(|a| {
                let ok = range_of(&seq.hyps, a.expr).is_some();
                if !ok {
                    let name = ctx.arena.display(a.expr);
                    ctx.warnings.push(format!(
                        "line {}: `{name}` has no enclosing hypothesis and cannot be split",
                        hint.line
                    ));
                }
                ok
            })
            .collect();
        if usable.is_empty() {
            continue;
        }
        paving = refine(&mut ctx, paving, &usable, targets, &mut failing, bcfg);
    }
    SequentProof {
        paving,
        tiles: ctx.tiles,
        warnings: ctx.warnings,
        failing,
    }
}

fn range_of(hyps: &[Atom], x: ExprId) -> Option<(ExactRational, ExactRational)> {
    hyps.iter().find_map(|h| match &h.kind {
        AtomKind::In(lo, hi) if h.expr == x => Some((lo.clone(), hi.clone())),
        _ => None,
    })
}

fn with_range(hyps: &[Atom], x: ExprId, lo: &ExactRational, hi: &ExactRational) -> Vec<Atom> {
    hyps.iter()
        .map(|h| match h.kind {
            AtomKind::In(..) if h.expr == x => Atom {
                expr: x,
                kind: AtomKind::In(lo.clone(), hi.clone()),
            },
            _ => h.clone(),
        })
        .collect()
}

fn tile_ok(ctx: &Ctx, i: usize, targets: &[ExprId]) -> bool {
    match ctx.tiles[i].outcome.verdict {
        Verdict::Proved { goal, .. } => targets.is_empty() || targets.contains(&ctx.goals[goal].expr),
        Verdict::Absurd(_) => true,
        Verdict::Unproved => false,
    }
}

/// Replaces every unproved leaf by a sub-paving built from `axes`.
fn refine(
    ctx: &mut Ctx,
    p: Paving,
    axes: &[&BisectAxis],
    targets: &[ExprId],
    failing: &mut Option<Vec<(ExprId, ExactRational, ExactRational)>>,
    bcfg: &BisectConfig,
) -> Paving {
    match p {
        Paving::Split { axis, at, below, above } => Paving::Split {
            axis,
            at,
            below: Box::new(refine(ctx, *below, axes, targets, failing, bcfg)),
            above: Box::new(refine(ctx, *above, axes, targets, failing, bcfg)),
        },
        Paving::Leaf(i) if ctx.tiles[i].outcome.proved() => Paving::Leaf(i),
        Paving::Leaf(i) => {
            let hyps = ctx.tiles[i].hyps.clone();
            let fixed: Vec<&BisectAxis> = axes
                .iter()
                .copied()
                .filter(|a| !matches!(a.mode, BisectMode::Dichotomy))
                .collect();
            let dich: Vec<ExprId> = axes
                .iter()
                .filter(|a| matches!(a.mode, BisectMode::Dichotomy))
                .map(|a| a.expr)
                .collect();
            if fixed.is_empty() {
                return dichotomy(ctx, i, &dich, targets, failing, bcfg, 0);
            }
            product(ctx, &hyps, &fixed, &dich, targets, failing, bcfg)
        }
    }
}

/// Cartesian product of the fixed splits, then dichotomy on each cell.
fn product(
    ctx: &mut Ctx,
    hyps: &[Atom],
    fixed: &[&BisectAxis],
    dich: &[ExprId],
    targets: &[ExprId],
    failing: &mut Option<Vec<(ExprId, ExactRational, ExactRational)>>,
    bcfg: &BisectConfig,
) -> Paving {
    let Some((first, rest)) = fixed.split_first() else {
        let i = ctx.prove(hyps.to_vec());
        if dich.is_empty() || tile_ok(ctx, i, targets) {
            return Paving::Leaf(i);
        }
        return dichotomy(ctx, i, dich, targets, failing, bcfg, 0);
    };
    let (lo, hi) = range_of(hyps, first.expr).expect("axis range checked");
    let cuts = match &first.mode {
        BisectMode::Even(n) => even_cuts(&lo, &hi, *n),
        BisectMode::Points(pts) => {
            let (cuts, dropped) = point_cuts(&lo, &hi, pts);
            for d in dropped {
                ctx.warnings.push(format!(
                    "split point {} lies outside the range of `{}` and is ignored",
                    crate::dyadic::rational_to_string(&d),
                    ctx.arena.display(first.expr)
                ));
            }
            cuts
        }
        BisectMode::Dichotomy => unreachable!(),
    };
    split_chain(
        ctx, hyps, first.expr, &lo, &hi, &cuts, rest, dich, targets, failing, bcfg,
    )
}

#[allow(clippy::too_many_arguments)]
fn split_chain(
    ctx: &mut Ctx,
    hyps: &[Atom],
    axis: ExprId,
    lo: &ExactRational,
    hi: &ExactRational,
    cuts: &[Dyadic],
    rest: &[&BisectAxis],
    dich: &[ExprId],
    targets: &[ExprId],
    failing: &mut Option<Vec<(ExprId, ExactRational, ExactRational)>>,
    bcfg: &BisectConfig,
) -> Paving {
    let Some((c, more)) = cuts.split_first() else {
        let h = with_range(hyps, axis, lo, hi);
        return product(ctx, &h, rest, dich, targets, failing, bcfg);
    };
    let cq = c.to_rational();
    let below = with_range(hyps, axis, lo, &cq);
    let below = product(ctx, &below, rest, dich, targets, failing, bcfg);
    let above = split_chain(ctx, hyps, axis, &cq, hi, more, rest, dich, targets, failing, bcfg);
    Paving::Split {
        axis,
        at: c.clone(),
        below: Box::new(below),
        above: Box::new(above),
    }
}

fn dichotomy(
    ctx: &mut Ctx,
    tile: usize,
    axes: &[ExprId],
    targets: &[ExprId],
    failing: &mut Option<Vec<(ExprId, ExactRational, ExactRational)>>,
    bcfg: &BisectConfig,
    depth: u32,
) -> Paving {
    let hyps = ctx.tiles[tile].hyps.clone();
    let widest = axes
        .iter()
        .filter_map(|&a| range_of(&hyps, a).map(|(l, h)| (a, l, h)))
        .filter(|(_, l, h)| l < h)
        .fold(
            None,
            |best: Option<(ExprId, ExactRational, ExactRational)>, c| match best {
                Some(b) if &b.2 - &b.1 >= &c.2 - &c.1 => Some(b),
                _ => Some(c),
            },
        );
    let Some((axis, lo, hi)) = widest.filter(|_| depth < bcfg.max_depth) else {
        let bx: Vec<_> = axes
            .iter()
            .filter_map(|&a| range_of(&hyps, a).map(|(l, h)| (a, l, h)))
            .collect();
        let width = |b: &Vec<(ExprId, ExactRational, ExactRational)>| {
            b.iter()
                .map(|(_, l, h)| h - l)
                .max()
                .unwrap_or_else(ExactRational::zero)
        };
        if failing.as_ref().is_none_or(|f| width(&bx) < width(f)) {
            *failing = Some(bx);
        }
        return Paving::Leaf(tile);
    };
    let at = split_point(&lo, &hi);
    let mid = at.to_rational();
    let mut half = |ctx: &mut Ctx, l: &ExactRational, h: &ExactRational| {
        let i = ctx.prove(with_range(&hyps, axis, l, h));
        if tile_ok(ctx, i, targets) {
            Paving::Leaf(i)
        } else {
            dichotomy(ctx, i, axes, targets, failing, bcfg, depth + 1)
        }
    };
    let below = half(ctx, &lo, &mid);
    let above = half(ctx, &mid, &hi);
    Paving::Split {
        axis,
        at,
        below: Box::new(below),
        above: Box::new(above),
    }
}

/// The dyadic with the fewest significant bits in `[a, b]`, closest to
/// `target` among those. Requires `a <= b`.
pub fn simplest_dyadic(a: &ExactRational, b: &ExactRational, target: &ExactRational) -> Dyadic {
    assert!(a <= b);
    if !a.is_positive() && !b.is_negative() {
        return Dyadic::zero();
    }
    let m = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    let mut k = floor_log2_rational(&m).expect("nonzero") + 1;
    loop {
        let step = pow2(k);
        let first = (a / &step).ceil();
        if &(&first * &step) <= b {
            let mut best = &first * &step;
            let mut n = first + ExactRational::one();
            while &(&n * &step) <= b {
                let c = &n * &step;
                if (&c - target).abs() < (&best - target).abs() {
                    best = c;
                }
                n += ExactRational::one();
            }
            return Dyadic::from_rational_exact(&best).expect("multiple of a power of two");
        }
        k -= 1;
    }
}

fn pow2(k: i64) -> ExactRational {
    let two = ExactRational::from_integer(2.into());
    if k >= 0 {
        num_traits::pow(two, k as usize)
    } else {
        ExactRational::one() / num_traits::pow(two, (-k) as usize)
    }
}

/// Split point for dichotomy: the simplest dyadic in the middle half.
pub fn split_point(lo: &ExactRational, hi: &ExactRational) -> Dyadic {
    let quarter = (hi - lo) / ExactRational::from_integer(4.into());
    let mid = (lo + hi) / ExactRational::from_integer(2.into());
    simplest_dyadic(&(lo + &quarter), &(hi - &quarter), &mid)
}

/// `n - 1` interior cut points, each the simplest dyadic within a quarter
/// step of the ideal equal-width cut.
pub fn even_cuts(lo: &ExactRational, hi: &ExactRational, n: u32) -> Vec<Dyadic> {
    let n = ExactRational::from_integer(n.into());
    let step = (hi - lo) / &n;
    let slack = &step / ExactRational::from_integer(4.into());
    let mut out = Vec::new();
    let mut k = ExactRational::one();
    while k < n {
        let ideal = lo + &step * &k;
        out.push(simplest_dyadic(&(&ideal - &slack), &(&ideal + &slack), &ideal));
        k += ExactRational::one();
    }
    out
}

/// Sorted distinct cut points strictly inside `(lo, hi)`, plus the points
/// that had to be dropped. Non-dyadic points move to the simplest dyadic
/// within a millionth of the range.
pub fn point_cuts(lo: &ExactRational, hi: &ExactRational, pts: &[ExactRational]) -> (Vec<Dyadic>, Vec<ExactRational>) {
    let slack = (hi - lo) / ExactRational::from_integer(1_000_000.into());
    let mut cuts = Vec::new();
    let mut dropped = Vec::new();
    for p in pts {
        if p <= lo || p >= hi {
            dropped.push(p.clone());
            continue;
        }
        let d = match Dyadic::from_rational_exact(p) {
            Some(d) => d,
            None => {
                let a = (p - &slack).max(lo.clone());
                let b = (p + &slack).min(hi.clone());
                simplest_dyadic(&a, &b, p)
            }
        };
        if d.cmp_rational(lo).is_gt() && d.cmp_rational(hi).is_lt() {
            cuts.push(d);
        }
    }
    cuts.sort();
    cuts.dedup();
    (cuts, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::parse_number;
    use crate::logic::decompose;
    use crate::parser::parse;
    use proptest::prelude::*;

    fn q(s: &str) -> ExactRational {
        parse_number(s).unwrap()
    }

    fn leaves_ranges(p: &SequentProof, x: ExprId) -> Vec<(ExactRational, ExactRational)> {
        p.paving
            .leaves()
            .iter()
            .map(|&i| range_of(&p.tiles[i].hyps, x).unwrap())
            .collect()
    }

    const SCRIPT: &str = "@rnd = float< ieee_32, ne >;
x = rnd(x_);
y = x - 1;
z = x * (rnd(y) - y);
{ x in [0,3] -> |z| <= 1b-26 }
";

    fn run(src: &str) -> (SequentProof, ExprId) {
        let mut s = parse(src).unwrap();
        let seqs = decompose(&s.prop).unwrap();
        let hints = s.hints.clone();
        let p = prove_with_hints(
            &mut s.arena,
            &hints,
            &seqs[0],
            &Config::default(),
            &BisectConfig::default(),
        );
        let x = seqs[0].hyps[0].expr;
        (p, x)
    }

    #[test]
    fn dichotomy_proves_bound() {
        let (p, x) = run(&format!("{SCRIPT}|z| $ x;"));
        assert!(p.proved());
        let r = leaves_ranges(&p, x);
        assert_eq!(
            r,
            vec![
                (q("0"), q("0.5")),
                (q("0.5"), q("1")),
                (q("1"), q("2")),
                (q("2"), q("3"))
            ]
        );
    }

    #[test]
    fn no_hint_no_proof() {
        let (p, _) = run(SCRIPT);
        assert!(!p.proved());
    }

    #[test]
    fn user_points() {
        let (p, x) = run(&format!("{SCRIPT}$ x in (0.5,2);"));
        let r = leaves_ranges(&p, x);
        assert_eq!(r, vec![(q("0"), q("0.5")), (q("0.5"), q("2")), (q("2"), q("3"))]);
    }

    #[test]
    fn out_of_range_points_warn() {
        let (p, x) = run(&format!("{SCRIPT}$ x in (-1,1,7);"));
        assert_eq!(leaves_ranges(&p, x), vec![(q("0"), q("1")), (q("1"), q("3"))]);
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn even_split_default() {
        let (p, x) = run(&format!("{SCRIPT}$ x;"));
        let r = leaves_ranges(&p, x);
        assert_eq!(r.len(), 4);
        assert_eq!(r[0].0, q("0"));
        assert_eq!(r[3].1, q("3"));
    }

    #[test]
    fn failing_tile_reported() {
        let mut s = parse("{ x in [0,1] -> x * x - x in [0,0] } x * x - x $ x;").unwrap();
        let seqs = decompose(&s.prop).unwrap();
        let hints = s.hints.clone();
        let p = prove_with_hints(
            &mut s.arena,
            &hints,
            &seqs[0],
            &Config::default(),
            &BisectConfig { max_depth: 3 },
        );
        assert!(!p.proved());
        let f = p.failing.unwrap();
        assert_eq!(&f[0].2 - &f[0].1, q("0.125"));
    }

    #[test]
    fn split_point_examples() {
        assert_eq!(split_point(&q("0"), &q("3")), Dyadic::from_int(2));
        assert_eq!(split_point(&q("0"), &q("1")).to_rational(), q("0.5"));
        assert_eq!(split_point(&q("-1"), &q("3")), Dyadic::zero());
    }

    proptest! {
        #[test]
        fn even_cuts_cover(lo in -1000i64..1000, w in 1i64..1000, den in 1i64..64, n in 1u32..12) {
            let lo = ExactRational::new(lo.into(), den.into());
            let hi = &lo + ExactRational::new(w.into(), den.into());
            let cuts = even_cuts(&lo, &hi, n);
            prop_assert_eq!(cuts.len() as u32, n - 1);
            let mut prev = lo.clone();
            for c in &cuts {
                let c = c.to_rational();
                prop_assert!(c > prev);
                prev = c;
            }
            prop_assert!(prev < hi);
        }

        #[test]
        fn simplest_is_inside(a in -10_000i64..10_000, w in 1i64..10_000, den in 1i64..1000) {
            let lo = ExactRational::new(a.into(), den.into());
            let hi = &lo + ExactRational::new(w.into(), den.into());
            let d = simplest_dyadic(&lo, &hi, &lo).to_rational();
            prop_assert!(lo <= d && d <= hi);
        }
    }
}
