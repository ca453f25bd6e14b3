//! Interval operators (EVENTUALLY / ALWAYS / NEVER), contextual formulas and
//! reactions.
//!
//! Intervals are inclusive and anchored to absolute engine time. A formula is
//! only checked at due ticks, `(now - anchor) % k == 0`.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::events::{split_kind_suffix, EventKind, History, KindFilter, Tick};
use crate::kb::{fmt_conj, Binding, Extension, FactBase, Goal, KbError, Literal, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemporalError {
    #[error("no cost available for preference `{0}`")]
    UnresolvedPreference(String),
    #[error("formula not ground after context: {0}")]
    NonGroundAfterContext(String),
    #[error("reaction action not ground: {0}")]
    NonGroundAction(String),
    #[error("time variable {0} is unbound")]
    UnboundTimeVar(String),
    #[error("time value {0} is not a non-negative integer")]
    BadTime(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Eventually,
    Always,
    Never,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Eventually, OpKind::Always, OpKind::Never];

    pub fn keyword(self) -> &'static str {
        match self {
            OpKind::Eventually => "EVENTUALLY",
            OpKind::Always => "ALWAYS",
            OpKind::Never => "NEVER",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TickUnit {
    Second,
    #[default]
    Minute,
    Hour,
}

impl TickUnit {
    pub fn name(self) -> &'static str {
        match self {
            TickUnit::Second => "second",
            TickUnit::Minute => "minute",
            TickUnit::Hour => "hour",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "second" => Some(TickUnit::Second),
            "minute" => Some(TickUnit::Minute),
            "hour" => Some(TickUnit::Hour),
            _ => None,
        }
    }

    /// Ticks for an `H:MM` clock reading. Hour ticks drop the minutes.
    pub fn clock(self, hours: u64, minutes: u64) -> u64 {
        match self {
            TickUnit::Second => (hours * 60 + minutes) * 60,
            TickUnit::Minute => hours * 60 + minutes,
            TickUnit::Hour => hours,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeConst {
    Ticks(u64),
    /// `H:MM`, kept symbolic until the tick unit is known.
    Clock(u64, u64),
}

impl TimeConst {
    pub fn ticks(self, unit: TickUnit) -> u64 {
        match self {
            TimeConst::Ticks(t) => t,
            TimeConst::Clock(h, m) => unit.clock(h, m),
        }
    }
}

impl fmt::Display for TimeConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeConst::Ticks(t) => write!(f, "{t}"),
            TimeConst::Clock(h, m) => write!(f, "{h}:{m:02}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TimeExpr {
    Const(TimeConst),
    /// `T` or `T + offset`, with `T` bound by the precondition pattern.
    Var(String, Option<TimeConst>),
}

impl TimeExpr {
    pub fn ticks(t: u64) -> Self {
        TimeExpr::Const(TimeConst::Ticks(t))
    }

    pub fn as_const(&self) -> Option<TimeConst> {
        match self {
            TimeExpr::Const(c) => Some(*c),
            TimeExpr::Var(..) => None,
        }
    }

    pub fn resolve(&self, unit: TickUnit, b: &Binding) -> Result<u64, TemporalError> {
        match self {
            TimeExpr::Const(c) => Ok(c.ticks(unit)),
            TimeExpr::Var(v, off) => {
                let val = b.get(v).ok_or_else(|| TemporalError::UnboundTimeVar(v.clone()))?;
                let base = val
                    .as_int()
                    .and_then(|i| u64::try_from(i).ok())
                    .ok_or_else(|| TemporalError::BadTime(val.to_string()))?;
                Ok(base + off.map_or(0, |o| o.ticks(unit)))
            }
        }
    }
}

impl fmt::Display for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeExpr::Const(c) => write!(f, "{c}"),
            TimeExpr::Var(v, None) => f.write_str(v),
            TimeExpr::Var(v, Some(o)) => write!(f, "{v} + {o}"),
        }
    }
}

/// `OP(m,n;k)` as written. Everything is optional, but `hi` needs `lo`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntervalOp {
    pub op: OpKind,
    pub lo: Option<TimeExpr>,
    pub hi: Option<TimeExpr>,
    pub k: Option<TimeExpr>,
}

impl IntervalOp {
    pub fn new(op: OpKind) -> Self {
        IntervalOp { op, lo: None, hi: None, k: None }
    }

    pub fn bounded(op: OpKind, lo: u64, hi: u64) -> Self {
        IntervalOp { op, lo: Some(TimeExpr::ticks(lo)), hi: Some(TimeExpr::ticks(hi)), k: None }
    }

    pub fn every(mut self, k: u64) -> Self {
        self.k = Some(TimeExpr::ticks(k));
        self
    }

    pub fn resolve(
        &self,
        unit: TickUnit,
        default_k: u64,
        b: &Binding,
    ) -> Result<ResolvedInterval, TemporalError> {
        let lo = self.lo.as_ref().map(|t| t.resolve(unit, b)).transpose()?;
        let hi = self.hi.as_ref().map(|t| t.resolve(unit, b)).transpose()?;
        let k = match &self.k {
            Some(t) => t.resolve(unit, b)?,
            None => default_k,
        };
        Ok(ResolvedInterval { lo, hi, k: k.max(1) })
    }

    pub fn vars(&self) -> BTreeSet<String> {
        [&self.lo, &self.hi, &self.k]
            .into_iter()
            .flatten()
            .filter_map(|t| match t {
                TimeExpr::Var(v, _) => Some(v.clone()),
                TimeExpr::Const(_) => None,
            })
            .collect()
    }
}

impl fmt::Display for IntervalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.keyword())?;
        let Some(lo) = &self.lo else {
            if let Some(k) = &self.k {
                write!(f, "(;{k})")?;
            }
            return Ok(());
        };
        write!(f, "({lo}")?;
        if let Some(hi) = &self.hi {
            write!(f, ",{hi}")?;
        }
        if let Some(k) = &self.k {
            write!(f, ";{k}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResolvedInterval {
    pub lo: Option<Tick>,
    pub hi: Option<Tick>,
    pub k: Tick,
}

/// True when a check anchored at `enabled_at` falls due at `now`.
pub fn due(k: Tick, enabled_at: Tick, now: Tick) -> bool {
    now >= enabled_at && (now - enabled_at) % k.max(1) == 0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoreVerdict {
    HoldsSoFar,
    HoldsFinal,
    ViolatedNow,
    /// Outside the interval.
    Vacuous,
}

/// One due check of an operator whose upper bound is `hi`.
pub fn step_core(op: OpKind, hi: Option<Tick>, holds_now: bool, now: Tick) -> CoreVerdict {
    let at_end = hi.is_some_and(|h| now >= h);
    match op {
        OpKind::Always if !holds_now => CoreVerdict::ViolatedNow,
        OpKind::Never if holds_now => CoreVerdict::ViolatedNow,
        OpKind::Eventually if holds_now => CoreVerdict::HoldsFinal,
        OpKind::Eventually if at_end => CoreVerdict::ViolatedNow,
        _ if at_end => CoreVerdict::HoldsFinal,
        _ => CoreVerdict::HoldsSoFar,
    }
}

/// Per-instance scheduling of one operator.
///
/// EVENTUALLY stops at its first witness. ALWAYS and NEVER keep going after a
/// violation; callers decide whether that ends anything.
#[derive(Clone, Debug)]
pub struct CoreTracker {
    op: OpKind,
    hi: Option<Tick>,
    k: Tick,
    anchor: Tick,
    start: Tick,
    done: bool,
    evaluated: Vec<Tick>,
}

impl CoreTracker {
    pub fn new(op: OpKind, iv: ResolvedInterval, armed_at: Tick) -> Self {
        let anchor = iv.lo.unwrap_or(armed_at);
        CoreTracker {
            op,
            hi: iv.hi,
            k: iv.k,
            anchor,
            start: anchor.max(armed_at),
            done: false,
            evaluated: Vec::new(),
        }
    }

    pub fn anchor(&self) -> Tick {
        self.anchor
    }

    pub fn hi(&self) -> Option<Tick> {
        self.hi
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Ticks at which the formula was actually evaluated.
    pub fn evaluated(&self) -> &[Tick] {
        &self.evaluated
    }

    /// The interval closed before this tracker could ever check it.
    pub fn expired(&self) -> bool {
        self.hi.is_some_and(|h| h < self.start)
    }

    pub fn is_due(&self, now: Tick) -> bool {
        !self.done
            && now >= self.start
            && self.hi.is_none_or(|h| now <= h)
            && due(self.k, self.anchor, now)
    }

    fn close_without_check(&mut self) -> CoreVerdict {
        self.done = true;
        match self.op {
            OpKind::Eventually => CoreVerdict::ViolatedNow,
            _ => CoreVerdict::HoldsFinal,
        }
    }

    /// Advances to `now`. `holds` runs only at due ticks and may return
    /// `None` to skip the check (no context available). Returns `None` when
    /// nothing was decided at this tick.
    pub fn tick<E>(
        &mut self,
        now: Tick,
        holds: impl FnOnce() -> Result<Option<bool>, E>,
    ) -> Result<Option<CoreVerdict>, E> {
        if self.done || now < self.start {
            return Ok(None);
        }
        if self.hi.is_some_and(|h| now > h) {
            return Ok(Some(self.close_without_check()));
        }
        let at_end = self.hi == Some(now);
        if self.is_due(now) {
            if let Some(h) = holds()? {
                self.evaluated.push(now);
                let v = step_core(self.op, self.hi, h, now);
                if at_end || v == CoreVerdict::HoldsFinal {
                    self.done = true;
                }
                return Ok(Some(v));
            }
        }
        Ok(at_end.then(|| self.close_without_check()))
    }
}

/// `OP(m,n;k) φ :: χ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ContextualFormula {
    pub op: IntervalOp,
    pub phi: Vec<Literal>,
    pub chi: Vec<Literal>,
}

impl ContextualFormula {
    pub fn new(op: IntervalOp, phi: Vec<Literal>) -> Self {
        ContextualFormula { op, phi, chi: Vec::new() }
    }

    pub fn with_context(mut self, chi: Vec<Literal>) -> Self {
        self.chi = chi;
        self
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut v = crate::kb::conj_vars(&self.phi);
        v.extend(crate::kb::conj_vars(&self.chi));
        v.extend(self.op.vars());
        v
    }
}

impl fmt::Display for ContextualFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, fmt_conj(&self.phi))?;
        if !self.chi.is_empty() {
            write!(f, " :: {}", fmt_conj(&self.chi))?;
        }
        Ok(())
    }
}

/// Outcome of one evaluation of a contextual formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    /// Truth of the operator's target: "φ has a satisfying instance".
    pub holds: bool,
    /// Binding from χ.
    pub context: Binding,
    /// Context binding extended by the first solution of φ, if any.
    pub binding: Binding,
}

fn phi_error(e: KbError) -> TemporalError {
    match e {
        KbError::UnboundBuiltinArg(s) | KbError::UnboundNegation(s) => {
            TemporalError::NonGroundAfterContext(s)
        }
        other => TemporalError::Kb(other),
    }
}

/// Evaluates χ (first solution wins) and then φ under its binding.
/// `Ok(None)` means χ had no solution, so there is nothing to check.
pub fn eval_once(
    f: &ContextualFormula,
    kb: &FactBase,
    ext: Option<&dyn Extension>,
    seed: &Binding,
) -> Result<Option<Evaluation>, TemporalError> {
    let context = match first_solution(kb, ext, &f.chi, seed.clone())? {
        Some(b) => b,
        None => return Ok(None),
    };
    let sol = first_solution(kb, ext, &f.phi, context.clone()).map_err(phi_error)?;
    Ok(Some(Evaluation {
        holds: sol.is_some(),
        binding: sol.unwrap_or_else(|| context.clone()),
        context,
    }))
}

fn first_solution(
    kb: &FactBase,
    ext: Option<&dyn Extension>,
    conj: &[Literal],
    seed: Binding,
) -> Result<Option<Binding>, KbError> {
    let mut it = match ext {
        Some(e) => kb.query_with(e, conj, seed),
        None => kb.query(conj, seed),
    };
    it.next().transpose()
}

/// Identifiers for the situations a violation is about, used to tell a
/// fresh violation from one already reported.
///
/// For NEVER each satisfying instance of φ yields the set of its ground
/// positive atoms, so symmetric solutions collapse. Otherwise the key is the
/// unsatisfied formula under its context. Keys come in solution order, each
/// with the first binding that produced it.
pub fn witness_keys(
    f: &ContextualFormula,
    kb: &FactBase,
    ext: Option<&dyn Extension>,
    eval: &Evaluation,
) -> Result<IndexMap<String, Binding>, TemporalError> {
    let mut keys = IndexMap::new();
    if f.op.op != OpKind::Never {
        let inst: Vec<Literal> = f.phi.iter().map(|l| apply_literal(l, &eval.context)).collect();
        keys.insert(format!("unsatisfied({})", fmt_conj(&inst)), eval.binding.clone());
        return Ok(keys);
    }
    let sols = match ext {
        Some(e) => kb.query_with(e, &f.phi, eval.context.clone()),
        None => kb.query(&f.phi, eval.context.clone()),
    };
    for sol in sols {
        let b = sol.map_err(phi_error)?;
        let atoms: BTreeSet<String> = f
            .phi
            .iter()
            .filter(|l| !l.negated)
            .filter_map(|l| match &l.goal {
                Goal::Atom(t) => Some(t.apply(&b).to_string()),
                Goal::Compare(..) => None,
            })
            .collect();
        keys.entry(atoms.into_iter().collect::<Vec<_>>().join(";")).or_insert(b);
    }
    Ok(keys)
}

pub fn apply_literal(l: &Literal, b: &Binding) -> Literal {
    let goal = match &l.goal {
        Goal::Atom(t) => Goal::Atom(t.apply(b)),
        Goal::Compare(x, op, y) => Goal::Compare(x.apply(b), *op, y.apply(b)),
    };
    Literal { negated: l.negated, goal }
}

/// Read-only view of history at one tick, consulted by queries for
/// kind-suffixed relations such as `temperature_N(T)` and for `now/1`.
pub struct EventView<'a> {
    pub history: &'a History,
    pub now: Tick,
}

impl Extension for EventView<'_> {
    fn candidates(&self, functor: &str, arity: usize) -> Option<Vec<Term>> {
        if functor == "now" && arity == 1 {
            return Some(vec![Term::compound("now", vec![Term::int(self.now as i64)])]);
        }
        let (base, filter) = split_kind_suffix(functor)?;
        let hit = self.history.latest_matching(filter, base, arity);
        Some(hit.map(|e| e.event.payload.with_functor(functor)).into_iter().collect())
    }
}

/// Named cost tables for `X IN {...: pref}` choices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostTables {
    tables: IndexMap<String, IndexMap<Term, i64>>,
}

impl CostTables {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pref: impl Into<String>, option: Term, cost: i64) {
        self.tables.entry(pref.into()).or_default().insert(option, cost);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &IndexMap<Term, i64>)> {
        self.tables.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Cost from the table, falling back to a stored fact `pref(option, Cost)`.
    pub fn cost(&self, pref: &str, option: &Term, kb: &FactBase) -> Option<i64> {
        if let Some(c) = self.tables.get(pref).and_then(|t| t.get(option)) {
            return Some(*c);
        }
        let probe = [Literal::atom(Term::compound(pref, vec![option.clone(), Term::var("Cost")]))];
        let found = kb
            .query(&probe, Binding::new())
            .filter_map(Result::ok)
            .find_map(|b| b.get("Cost").and_then(Term::as_int));
        found
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ReactionElem {
    /// `atom [:< conj]`.
    Action { atom: Term, pre: Vec<Literal> },
    /// `X IN {a, b : pref}`.
    Choice { var: String, options: Vec<Term>, pref: String },
}

impl fmt::Display for ReactionElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionElem::Action { atom, pre } if pre.is_empty() => write!(f, "{atom}"),
            ReactionElem::Action { atom, pre } => write!(f, "{atom} :< {}", fmt_conj(pre)),
            ReactionElem::Choice { var, options, pref } => {
                let opts: Vec<String> = options.iter().map(ToString::to_string).collect();
                write!(f, "{var} IN {{{} : {pref}}}", opts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Reaction {
    pub elems: Vec<ReactionElem>,
}

impl Reaction {
    pub fn new(elems: Vec<ReactionElem>) -> Self {
        Reaction { elems }
    }

    pub fn action(atom: Term) -> Self {
        Reaction { elems: vec![ReactionElem::Action { atom, pre: Vec::new() }] }
    }
}

impl fmt::Display for Reaction {
    // A precondition runs to the end of the reaction unless parenthesised.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.elems.len().saturating_sub(1);
        for (i, el) in self.elems.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match el {
                ReactionElem::Action { atom, pre } if !pre.is_empty() && i < last => {
                    write!(f, "{atom} :< ({})", fmt_conj(pre))?
                }
                other => write!(f, "{other}")?,
            }
        }
        Ok(())
    }
}

/// `OP(m,n;k) φ :: χ DIV ρ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReactiveRule {
    pub monitor: ContextualFormula,
    pub reaction: Reaction,
}

impl fmt::Display for ReactiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} DIV {}", self.monitor, self.reaction)
    }
}

/// An event a reaction asks the engine to produce.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Emission {
    pub kind: EventKind,
    pub payload: Term,
}

impl Emission {
    /// `foo_G(x)` becomes a goal `foo(x)`; unsuffixed atoms are actions.
    pub fn from_atom(atom: Term) -> Self {
        let split = atom.functor().and_then(|(f, _)| split_kind_suffix(f));
        match split {
            Some((base, filter)) => {
                let kind = match filter {
                    KindFilter::Exact(k) => k,
                    KindFilter::Past => EventKind::Past,
                    KindFilter::Any => EventKind::Action,
                };
                Emission { kind, payload: atom.with_functor(base) }
            }
            None => Emission { kind: EventKind::Action, payload: atom },
        }
    }
}

impl fmt::Display for Emission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.letter(), self.payload)
    }
}

/// Runs a reaction under `binding`.
///
/// Choices are resolved first, so an action may mention a variable chosen
/// later in the list. Each action with a failing `:<` precondition is
/// skipped; a succeeding one extends the binding with its first solution.
pub fn fire_reaction(
    reaction: &Reaction,
    kb: &FactBase,
    ext: Option<&dyn Extension>,
    costs: &CostTables,
    binding: &Binding,
) -> Result<Vec<Emission>, TemporalError> {
    let mut b = binding.clone();
    for el in &reaction.elems {
        if let ReactionElem::Choice { var, options, pref } = el {
            let mut best: Option<(i64, &Term)> = None;
            for opt in options {
                let opt_g = opt.apply(&b);
                let c = costs
                    .cost(pref, &opt_g, kb)
                    .ok_or_else(|| TemporalError::UnresolvedPreference(pref.clone()))?;
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, opt));
                }
            }
            if let Some((_, chosen)) = best {
                b.bind(var.clone(), chosen.apply(&b));
            }
        }
    }
    let mut out = Vec::new();
    for el in &reaction.elems {
        let ReactionElem::Action { atom, pre } = el else {
            continue;
        };
        let local = if pre.is_empty() {
            Some(b.clone())
        } else {
            first_solution(kb, ext, pre, b.clone())?
        };
        let Some(local) = local else {
            continue;
        };
        let inst = atom.apply(&local);
        if !inst.is_ground() {
            return Err(TemporalError::NonGroundAction(inst.to_string()));
        }
        out.push(Emission::from_atom(inst));
    }
    Ok(out)
}
