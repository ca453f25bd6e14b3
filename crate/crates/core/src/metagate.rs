//! Reflective action gate: reified goal names, `solve` / `solve_not`
//! meta-rules, and the acceptable-set check over their outcomes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::kb::{fmt_conj, Binding, FactBase, KbError, Literal, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetaError {
    #[error("cannot name non-ground term {0}")]
    NonGroundReify(Term),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// The name `↑t` of a ground term: every constant and functor is tagged.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Name {
    Const(Term),
    Compound(String, Vec<Name>),
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Const(t) => write!(f, "{t}'"),
            Name::Compound(g, args) => {
                write!(f, "{g}'(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

pub fn reify(t: &Term) -> Result<Name, MetaError> {
    if !t.is_ground() {
        return Err(MetaError::NonGroundReify(t.clone()));
    }
    Ok(name_of(t))
}

fn name_of(t: &Term) -> Name {
    match t {
        Term::Compound(f, args) => Name::Compound(f.clone(), args.iter().map(name_of).collect()),
        other => Name::Const(other.clone()),
    }
}

pub fn unreify(n: &Name) -> Term {
    match n {
        Name::Const(t) => t.clone(),
        Name::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(unreify).collect()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Solve,
    SolveNot,
}

impl Polarity {
    pub fn keyword(self) -> &'static str {
        match self {
            Polarity::Solve => "solve",
            Polarity::SolveNot => "solve_not",
        }
    }
}

/// `solve(head) :- body.` The head is written at object level; its
/// variables are meta-variables and only ever stand for named constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaRule {
    pub polarity: Polarity,
    pub head: Term,
    pub body: Vec<Literal>,
}

impl MetaRule {
    pub fn new(polarity: Polarity, head: Term, body: Vec<Literal>) -> Self {
        MetaRule { polarity, head, body }
    }

    /// Binding of the head's meta-variables against a goal name.
    pub fn head_match(&self, name: &Name) -> Option<Binding> {
        let mut b = Binding::new();
        match_name(&self.head, name, &mut b).then_some(b)
    }
}

impl fmt::Display for MetaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.polarity.keyword(), self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- {}", fmt_conj(&self.body))?;
        }
        Ok(())
    }
}

fn match_name(pat: &Term, name: &Name, b: &mut Binding) -> bool {
    match (pat, name) {
        (Term::Wild(_), _) => true,
        (Term::Var(v), Name::Const(c)) => match b.get(v) {
            Some(bound) => bound == c,
            None => {
                b.bind(v.clone(), c.clone());
                true
            }
        },
        (Term::Var(_), Name::Compound(..)) => false,
        (Term::Int(_) | Term::Sym(_), Name::Const(c)) => pat == c,
        (Term::Compound(f, args), Name::Compound(g, nargs)) => {
            f == g
                && args.len() == nargs.len()
                && args.iter().zip(nargs).all(|(p, n)| match_name(p, n, b))
        }
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateDecision {
    Confirmed,
    BlockedBySolveFail,
    BlockedBySolveNot,
    NoRulesApply,
}

impl GateDecision {
    pub fn allows(self) -> bool {
        matches!(self, GateDecision::Confirmed | GateDecision::NoRulesApply)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateDecision::Confirmed => "confirmed",
            GateDecision::BlockedBySolveFail => "blocked-solve-fail",
            GateDecision::BlockedBySolveNot => "blocked-solve-not",
            GateDecision::NoRulesApply => "no-rules",
        }
    }
}

impl fmt::Display for GateDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateOutcome {
    pub decision: GateDecision,
    pub name: Name,
    pub solve_matched: bool,
    pub solve_succeeded: bool,
    pub solve_not_succeeded: bool,
}

impl GateOutcome {
    /// Both a failed `solve` and a succeeding `solve_not` blocked the goal.
    pub fn doubly_blocked(&self) -> bool {
        self.decision == GateDecision::BlockedBySolveFail && self.solve_not_succeeded
    }

    /// Meta atoms this attempt derives. A `solve` overridden by `solve_not`
    /// is not counted.
    pub fn meta_atoms(&self) -> Vec<Atom> {
        if self.solve_not_succeeded {
            vec![Atom::SolveNot(self.name.clone())]
        } else if self.solve_succeeded {
            vec![Atom::Solve(self.name.clone())]
        } else {
            Vec::new()
        }
    }
}

/// Decides whether `goal` may proceed.
pub fn gate(goal: &Term, rules: &[MetaRule], kb: &FactBase) -> Result<GateOutcome, MetaError> {
    let name = reify(goal)?;
    let mut solve_matched = false;
    let mut solve_succeeded = false;
    let mut solve_not_matched = false;
    let mut solve_not_succeeded = false;
    for rule in rules {
        let Some(b) = rule.head_match(&name) else {
            continue;
        };
        let (matched, succeeded) = match rule.polarity {
            Polarity::Solve => (&mut solve_matched, &mut solve_succeeded),
            Polarity::SolveNot => (&mut solve_not_matched, &mut solve_not_succeeded),
        };
        *matched = true;
        if !*succeeded && kb.query(&rule.body, b).next().transpose()?.is_some() {
            *succeeded = true;
        }
    }
    let decision = if solve_matched && !solve_succeeded {
        GateDecision::BlockedBySolveFail
    } else if solve_not_succeeded {
        GateDecision::BlockedBySolveNot
    } else if solve_matched || solve_not_matched {
        GateDecision::Confirmed
    } else {
        GateDecision::NoRulesApply
    };
    Ok(GateOutcome { decision, name, solve_matched, solve_succeeded, solve_not_succeeded })
}

/// An element of an interpretation: an object-level atom or a meta atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Object(Term),
    Solve(Name),
    SolveNot(Name),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Object(t) => write!(f, "{t}"),
            Atom::Solve(n) => write!(f, "solve({n})"),
            Atom::SolveNot(n) => write!(f, "solve_not({n})"),
        }
    }
}

/// Whether `set` satisfies `A <- solve(↑A)` and `¬A <- solve_not(↑A)`.
pub fn acceptable(set: &BTreeSet<Atom>) -> bool {
    set.iter().all(|a| match a {
        Atom::Object(_) => true,
        Atom::Solve(n) => set.contains(&Atom::Object(unreify(n))),
        Atom::SolveNot(n) => !set.contains(&Atom::Object(unreify(n))),
    })
}

/// `set` without its meta atoms.
pub fn base_version(set: &BTreeSet<Atom>) -> BTreeSet<Atom> {
    set.iter().filter(|a| matches!(a, Atom::Object(_))).cloned().collect()
}
