//! Command-line driver: parse, lint, decompose, prove, certify and report.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::bisect::{prove_with_hints, BisectConfig, SequentProof};
use crate::certificate::{self, Certificate, ProvedSequent};
use crate::dyadic::{dyadic_to_short_decimal, Direction, DEFAULT_PRECISION};
use crate::engine::{Config, Verdict};
use crate::expr::ExprId;
use crate::interval::Interval;
use crate::logic::{decompose, Sequent};
use crate::parser::{lint, parse, AtomKind, Script};

/// Significant decimal digits shown before a rendering is marked approximate.
const DECIMAL_DIGITS: usize = 17;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub precision: u32,
    /// Scheme evaluations allowed per proof attempt.
    pub budget: usize,
    /// Dichotomy depth of bisection hints.
    pub depth: u32,
    pub cert: Option<PathBuf>,
    pub quiet: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: DEFAULT_PRECISION,
            budget: Config::default().max_applications,
            depth: BisectConfig::default().max_depth,
            cert: None,
            quiet: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Logic(String),
    #[error("goal `{0}` has no representable subset: its interval becomes empty once endpoints are made dyadic")]
    EmptyGoal(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Everything produced by proving one script.
pub struct Run {
    pub report: String,
    pub warnings: Vec<String>,
    pub proved: bool,
    /// Widened certificate, when every sequent is proved.
    pub certificate: Option<Certificate>,
    /// Hull of the answers of each `?` goal, keyed by expression.
    pub answers: Vec<(ExprId, String, Interval)>,
}

impl Run {
    pub fn exit_code(&self) -> i32 {
        if self.proved {
            0
        } else {
            1
        }
    }
}

fn engine_config(cfg: &RunConfig) -> Result<(Config, BisectConfig), InputError> {
    if cfg.precision < 2 {
        return Err(InputError::Config("precision must be at least 2".into()));
    }
    if cfg.budget < 1 {
        return Err(InputError::Config("budget must be at least 1".into()));
    }
    let ecfg = Config {
        precision: cfg.precision,
        max_applications: cfg.budget,
        ..Config::default()
    };
    Ok((ecfg, BisectConfig { max_depth: cfg.depth }))
}

/// Renders `[lo, hi]` in decimal, outward when inexact.
pub fn decimal_interval(i: &Interval) -> String {
    format!(
        "[{}, {}]",
        dyadic_to_short_decimal(i.lo(), Direction::Down, DECIMAL_DIGITS),
        dyadic_to_short_decimal(i.hi(), Direction::Up, DECIMAL_DIGITS)
    )
}

pub fn dyadic_interval(i: &Interval) -> String {
    format!("[{}, {}]", i.lo(), i.hi())
}

fn check_goal_ranges(script: &Script, seqs: &[Sequent], precision: u32) -> Result<(), InputError> {
    for s in seqs {
        for g in &s.goals {
            if let AtomKind::In(lo, hi) = &g.kind {
                if Interval::inward(lo, hi, precision).is_none() {
                    return Err(InputError::EmptyGoal(g.display(&script.arena)));
                }
            }
        }
    }
    Ok(())
}

/// Proves every sequent of `source`.
pub fn prove_source(source: &str, cfg: &RunConfig) -> Result<Run, InputError> {
    let (ecfg, bcfg) = engine_config(cfg)?;
    let mut script = parse(source).map_err(|e| InputError::Parse(e.to_string()))?;
    let mut warnings: Vec<String> = lint(&script).iter().map(|w| w.to_string()).collect();
    let seqs = decompose(&script.prop).map_err(|e| InputError::Logic(e.to_string()))?;
    check_goal_ranges(&script, &seqs, cfg.precision)?;
    let hints = script.hints.clone();
    let proofs: Vec<SequentProof> = seqs
        .iter()
        .map(|s| prove_with_hints(&mut script.arena, &hints, s, &ecfg, &bcfg))
        .collect();
    let arena = &script.arena;

    let mut report = String::new();
    let mut answers: Vec<(ExprId, String, Interval)> = Vec::new();
    for (k, (seq, proof)) in seqs.iter().zip(&proofs).enumerate() {
        for w in &proof.warnings {
            let w = format!("warning: {w}");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        let leaves = proof.paving.leaves();
        let status = if proof.proved() { "proved" } else { "NOT PROVED" };
        let _ = writeln!(report, "sequent {}: {status}", k + 1);
        let _ = writeln!(report, "  {}", seq.display(arena));
        if leaves.len() > 1 {
            let _ = writeln!(report, "  tiles: {}", leaves.len());
        }
        let absurd = leaves
            .iter()
            .filter(|&&i| matches!(proof.tiles[i].outcome.verdict, Verdict::Absurd(_)))
            .count();
        if absurd > 0 {
            let _ = writeln!(report, "  contradictory hypotheses on {absurd} tile(s)");
        }
        for (g, goal) in seq.goals.iter().enumerate() {
            let mut hull: Option<Interval> = None;
            let mut hits = 0;
            for &i in &leaves {
                let o = &proof.tiles[i].outcome;
                if let Verdict::Proved { goal: h, step } = o.verdict {
                    if h == g {
                        hits += 1;
                        let e = o.steps[step].pred.interval().expect("enclosure").clone();
                        hull = Some(hull.map_or(e.clone(), |x| x.hull(&e)));
                    }
                }
            }
            let verdict = if hits == leaves.len() {
                "proved".to_string()
            } else if hits > 0 {
                format!("proved on {hits} of {} tiles", leaves.len())
            } else {
                "not proved".to_string()
            };
            let _ = writeln!(report, "  goal {}: {verdict}", goal.display(arena));
            if goal.is_query() {
                if let Some(h) = hull.filter(|_| proof.proved()) {
                    let name = arena.display(goal.expr);
                    match answers.iter_mut().find(|a| a.0 == goal.expr) {
                        Some(a) => a.2 = a.2.hull(&h),
                        None => answers.push((goal.expr, name, h)),
                    }
                }
            }
        }
        if !proof.proved() {
            if let Some(f) = &proof.failing {
                let parts: Vec<String> = f
                    .iter()
                    .map(|(e, lo, hi)| {
                        format!(
                            "{} in [{}, {}]",
                            arena.display(*e),
                            crate::parser::rational_literal(lo),
                            crate::parser::rational_literal(hi)
                        )
                    })
                    .collect();
                let _ = writeln!(report, "  smallest failing tile: {}", parts.join(", "));
            }
            // best enclosures found, as a hint of what is provable
            if let Some(&i) = leaves.first() {
                let o = &proof.tiles[i].outcome;
                for (goal, best) in seq.goals.iter().zip(&o.best) {
                    if let Some(b) = best {
                        let _ = writeln!(
                            report,
                            "  best enclosure: {} in {}",
                            arena.display(goal.expr),
                            decimal_interval(b)
                        );
                    }
                }
            }
        }
    }
    if !answers.is_empty() {
        let _ = writeln!(report, "results:");
        for (_, name, i) in &answers {
            let _ = writeln!(report, "  {name} in {}", decimal_interval(i));
            let _ = writeln!(report, "    dyadic {}", dyadic_interval(i));
        }
    }
    let proved = proofs.iter().all(|p| p.proved());
    let certificate = proved.then(|| {
        let ps: Vec<ProvedSequent> = seqs
            .iter()
            .zip(&proofs)
            .map(|(sequent, proof)| ProvedSequent { sequent, proof })
            .collect();
        certificate::widen(&certificate::emit(source, arena, &hints, &ps, cfg.precision))
    });
    Ok(Run {
        report,
        warnings,
        proved,
        certificate,
        answers,
    })
}

/// Output of a subcommand: what goes to stdout and stderr, and the exit status.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn prove_file(path: &std::path::Path, cfg: &RunConfig) -> Output {
    let mut out = Output::default();
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            out.stderr = format!("error: {}: {e}\n", path.display());
            out.code = 2;
            return out;
        }
    };
    let run = match prove_source(&source, cfg) {
        Ok(r) => r,
        Err(e) => {
            out.stderr = format!("error: {}: {e}\n", path.display());
            out.code = 2;
            return out;
        }
    };
    for w in &run.warnings {
        let _ = writeln!(out.stderr, "{w}");
    }
    if cfg.quiet {
        for (_, name, i) in &run.answers {
            let _ = writeln!(out.stdout, "{name} in {}", decimal_interval(i));
        }
    } else {
        out.stdout.push_str(&run.report);
    }
    out.code = run.exit_code();
    if let (Some(p), Some(c)) = (&cfg.cert, &run.certificate) {
        if let Err(e) = std::fs::write(p, c.to_text()) {
            let _ = writeln!(out.stderr, "error: {}: {e}", p.display());
            out.code = 2;
        } else if !cfg.quiet {
            let _ = writeln!(out.stdout, "certificate written to {}", p.display());
        }
    } else if cfg.cert.is_some() {
        let _ = writeln!(out.stderr, "no certificate written: some goal is not proved");
    }
    out
}

pub fn check_file(path: &std::path::Path) -> Output {
    let mut out = Output::default();
    let text = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            out.stderr = format!("error: {}: {e}\n", path.display());
            out.code = 2;
            return out;
        }
    };
    match Certificate::parse(&text).and_then(|c| certificate::check(&c)) {
        Ok(r) => {
            out.stdout = format!("{r}\n");
            out.code = 0;
        }
        Err(e) => {
            out.stderr = format!("invalid certificate: {e}\n");
            out.code = e.exit_code();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIRST: &str = "{ x - 2 in [-2,0] /\\ (x + 1 in [0,2] -> y in [3,4])
  -> not x <= 1 \\/ x + y in ? }";

    #[test]
    fn first_example_answers_three_five() {
        let r = prove_source(FIRST, &RunConfig::default()).unwrap();
        assert!(r.proved);
        assert_eq!(r.answers.len(), 1);
        assert_eq!(
            format!("{} in {}", r.answers[0].1, decimal_interval(&r.answers[0].2)),
            "x + y in [3, 5]"
        );
        assert!(r.report.contains("x + y in [3, 5]"));
        assert!(r.report.contains("dyadic [3b0, 5b0]"));
        certificate::check(r.certificate.as_ref().unwrap()).unwrap();
    }

    #[test]
    fn empty_goal_is_an_input_error() {
        let e = prove_source("{ 13/10 in [1.3,1.3] }", &RunConfig::default())
            .err()
            .unwrap();
        assert!(matches!(e, InputError::EmptyGoal(_)));
        assert!(e.to_string().contains("no representable subset"));
    }

    #[test]
    fn parse_errors_are_input_errors() {
        let e = prove_source("{ x in [1, }", &RunConfig::default()).err().unwrap();
        assert!(matches!(e, InputError::Parse(_)));
    }

    #[test]
    fn unproved_goal_exits_one() {
        let r = prove_source("{ x in [0,1] -> x * x in [0, 1b-2] }", &RunConfig::default()).unwrap();
        assert!(!r.proved);
        assert_eq!(r.exit_code(), 1);
        assert!(r.certificate.is_none());
        assert!(r.report.contains("NOT PROVED"));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = prove_source(FIRST, &RunConfig::default()).unwrap();
        let b = prove_source(FIRST, &RunConfig::default()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.certificate.unwrap().to_text(), b.certificate.unwrap().to_text());
    }

    #[test]
    fn bad_configuration_is_rejected() {
        let cfg = RunConfig {
            precision: 1,
            ..RunConfig::default()
        };
        assert!(matches!(prove_source(FIRST, &cfg), Err(InputError::Config(_))));
    }

    #[test]
    fn inexact_decimals_are_marked() {
        let i = Interval::new(
            crate::dyadic::parse_dyadic("1b-100").unwrap(),
            crate::dyadic::parse_dyadic("3b-1").unwrap(),
        );
        let s = decimal_interval(&i);
        assert!(s.starts_with("[~"), "{s}");
        assert!(s.ends_with(", 1.5]"), "{s}");
    }
}
