//! Decomposition of a proposition into sequents.
//!
//! Each sequent has a conjunction of atoms on the left and a disjunction of
//! atoms on the right. Conjunctions on the right and disjunctions on the
//! left fork the derivation, so the returned list is read as a conjunction.

use thiserror::Error;

use crate::expr::{Arena, ExprId};
use crate::parser::{Atom, AtomKind, Prop};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("an unspecified range would become a hypothesis")]
    QueryHypothesis(ExprId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequent {
    pub hyps: Vec<Atom>,
    /// Disjunction; empty means the sequent holds only if the hypotheses
    /// are contradictory.
    pub goals: Vec<Atom>,
}

impl Sequent {
    pub fn display(&self, arena: &Arena) -> String {
        let h: Vec<String> = self.hyps.iter().map(|a| a.display(arena)).collect();
        let g: Vec<String> = self.goals.iter().map(|a| a.display(arena)).collect();
        let g = if g.is_empty() {
            "false".to_string()
        } else {
            g.join(" \\/ ")
        };
        format!("{} |- {}", h.join(" /\\ "), g)
    }

    /// The sequent as a proposition: `hyps -> goals`.
    pub fn to_prop(&self) -> Option<Prop> {
        let goal = self
            .goals
            .iter()
            .cloned()
            .map(Prop::Atom)
            .reduce(|a, b| Prop::Or(Box::new(a), Box::new(b)))?;
        Some(
            match self
                .hyps
                .iter()
                .cloned()
                .map(Prop::Atom)
                .reduce(|a, b| Prop::And(Box::new(a), Box::new(b)))
            {
                Some(h) => Prop::Impl(Box::new(h), Box::new(goal)),
                None => goal,
            },
        )
    }
}

struct Pending {
    hyps: Vec<Prop>,
    goals: Vec<Prop>,
    atom_hyps: Vec<Atom>,
    atom_goals: Vec<Atom>,
}

pub fn decompose(p: &Prop) -> Result<Vec<Sequent>, LogicError> {
    let mut out = Vec::new();
    let mut stack = vec![Pending {
        hyps: Vec::new(),
        goals: vec![p.clone()],
        atom_hyps: Vec::new(),
        atom_goals: Vec::new(),
    }];
    while let Some(mut s) = stack.pop() {
        if let Some(g) = s.goals.pop() {
            match g {
                Prop::Atom(a) => push_unique(&mut s.atom_goals, a),
                Prop::Or(a, b) => {
                    s.goals.push(*b);
                    s.goals.push(*a);
                }
                Prop::Impl(a, b) => {
                    s.hyps.push(*a);
                    s.goals.push(*b);
                }
                Prop::Not(a) => s.hyps.push(*a),
                Prop::And(a, b) => {
                    let mut right = Pending {
                        hyps: s.hyps.clone(),
                        goals: s.goals.clone(),
                        atom_hyps: s.atom_hyps.clone(),
                        atom_goals: s.atom_goals.clone(),
                    };
                    right.goals.push(*b);
                    s.goals.push(*a);
                    stack.push(right);
                }
            }
            stack.push(s);
            continue;
        }
        if let Some(h) = s.hyps.pop() {
            match h {
                Prop::Atom(a) => {
                    if a.is_query() {
                        return Err(LogicError::QueryHypothesis(a.expr));
                    }
                    push_unique(&mut s.atom_hyps, a);
                }
                Prop::And(a, b) => {
                    s.hyps.push(*b);
                    s.hyps.push(*a);
                }
                Prop::Not(a) => s.goals.push(*a),
                Prop::Or(a, b) => {
                    let mut right = Pending {
                        hyps: s.hyps.clone(),
                        goals: s.goals.clone(),
                        atom_hyps: s.atom_hyps.clone(),
                        atom_goals: s.atom_goals.clone(),
                    };
                    right.hyps.push(*b);
                    s.hyps.push(*a);
                    stack.push(right);
                }
                Prop::Impl(a, b) => {
                    let mut right = Pending {
                        hyps: s.hyps.clone(),
                        goals: s.goals.clone(),
                        atom_hyps: s.atom_hyps.clone(),
                        atom_goals: s.atom_goals.clone(),
                    };
                    right.hyps.push(*b);
                    s.goals.push(*a);
                    stack.push(right);
                }
            }
            stack.push(s);
            continue;
        }
        out.push(finish(s));
    }
    Ok(out)
}

fn push_unique(v: &mut Vec<Atom>, a: Atom) {
    if !v.contains(&a) {
        v.push(a);
    }
}

/// Copies every inequality goal, reversed, to the hypotheses.
fn finish(s: Pending) -> Sequent {
    let mut hyps = s.atom_hyps;
    for g in &s.atom_goals {
        let rev = match &g.kind {
            AtomKind::Le(c) => AtomKind::Ge(c.clone()),
            AtomKind::Ge(c) => AtomKind::Le(c.clone()),
            _ => continue,
        };
        push_unique(
            &mut hyps,
            Atom {
                expr: g.expr,
                kind: rev,
            },
        );
    }
    Sequent {
        hyps,
        goals: s.atom_goals,
    }
}

/// Index of the first disjunct accepted by `prove`, trying left to right.
pub fn select_disjunct(goals: &[Atom], prove: impl FnMut(&Atom) -> bool) -> Option<usize> {
    goals.iter().position(prove)
}
