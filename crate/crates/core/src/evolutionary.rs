//! Evolutionary expressions `S^Evp : τ ::: S^F :::: S^J` with their repair
//! and countermeasures, and the per-instance status machine that runs them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use crate::events::{History, Tick};
use crate::kb::{Binding, FactBase, Term};
use crate::patterns::{MatchResult, PatternSeq};
use crate::temporal::{
    eval_once, fire_reaction, witness_keys, ContextualFormula, CoreTracker, CoreVerdict,
    CostTables, Emission, EventView, OpKind, Reaction, TemporalError, TickUnit,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EvolutionaryExpr {
    pub pre: PatternSeq,
    pub tau: ContextualFormula,
    pub future: PatternSeq,
    pub breaking: PatternSeq,
    pub repair: Option<Reaction>,
    pub eta1: Option<Term>,
    pub eta2: Option<Term>,
    pub eta3: Option<Reaction>,
}

impl EvolutionaryExpr {
    pub fn new(tau: ContextualFormula) -> Self {
        EvolutionaryExpr {
            pre: PatternSeq::default(),
            tau,
            future: PatternSeq::default(),
            breaking: PatternSeq::default(),
            repair: None,
            eta1: None,
            eta2: None,
            eta3: None,
        }
    }

    /// Variables the precondition shares with the rest of the expression.
    fn shared_with_pre(&self) -> BTreeSet<String> {
        let mut v = self.tau.vars();
        v.extend(self.future.vars());
        v.extend(self.breaking.vars());
        for r in self.repair.iter().chain(&self.eta3) {
            for el in &r.elems {
                if let crate::temporal::ReactionElem::Action { atom, .. } = el {
                    v.extend(atom.vars());
                }
            }
        }
        for t in self.eta1.iter().chain(&self.eta2) {
            v.extend(t.vars());
        }
        v
    }
}

impl fmt::Display for EvolutionaryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.pre.is_empty() {
            write!(f, "{} : ", self.pre)?;
        }
        write!(f, "{}", self.tau)?;
        if !self.future.is_empty() {
            write!(f, " ::: {}", self.future)?;
        }
        if !self.breaking.is_empty() {
            write!(f, " :::: {}", self.breaking)?;
        }
        if let Some(r) = &self.repair {
            write!(f, " DIV {r}")?;
        }
        if let Some(t) = &self.eta1 {
            write!(f, " | {t}")?;
        }
        if let Some(t) = &self.eta2 {
            write!(f, " || {t}")?;
        }
        if let Some(r) = &self.eta3 {
            write!(f, " ||| {r}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExprStatus {
    Dormant,
    Armed,
    Holding,
    Fulfilled,
    Violated,
    Broken,
    Disabled,
}

impl ExprStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            ExprStatus::Fulfilled | ExprStatus::Violated | ExprStatus::Broken | ExprStatus::Disabled
        )
    }

    pub fn can_become(self, to: ExprStatus) -> bool {
        use ExprStatus::*;
        matches!(
            (self, to),
            (Dormant, Armed | Disabled)
                | (Armed, Holding | Violated | Broken | Disabled | Fulfilled)
                | (Holding, Violated | Broken | Fulfilled)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ExprStatus::Dormant => "dormant",
            ExprStatus::Armed => "armed",
            ExprStatus::Holding => "holding",
            ExprStatus::Fulfilled => "fulfilled",
            ExprStatus::Violated => "violated",
            ExprStatus::Broken => "broken",
            ExprStatus::Disabled => "disabled",
        }
    }
}

impl fmt::Display for ExprStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Status of an instance once the run is over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FinalStatus {
    Dormant,
    Disabled,
    Fulfilled,
    /// Never violated, but the interval had not closed.
    FulfilledSoFar,
    /// EVENTUALLY still waiting for its witness.
    Pending,
    Violated,
    Broken,
}

impl FinalStatus {
    pub fn name(self) -> &'static str {
        match self {
            FinalStatus::Dormant => "dormant",
            FinalStatus::Disabled => "disabled",
            FinalStatus::Fulfilled => "fulfilled",
            FinalStatus::FulfilledSoFar => "fulfilled-so-far",
            FinalStatus::Pending => "pending",
            FinalStatus::Violated => "violated",
            FinalStatus::Broken => "broken",
        }
    }
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Trace,
    Reactive,
    Repair,
    Eta1,
    Eta2,
    Eta3,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Trace => "trace",
            Provenance::Reactive => "reactive",
            Provenance::Repair => "repair",
            Provenance::Eta1 => "eta1",
            Provenance::Eta2 => "eta2",
            Provenance::Eta3 => "eta3",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Transition { instance: usize, from: ExprStatus, to: ExprStatus, cause: String },
    Violation { instance: usize, binding: Binding },
    Emit { instance: usize, provenance: Provenance, emission: Emission },
    Warning { instance: usize, message: String },
}

/// Wall time spent per cost phase, accumulated across calls.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub if_eval: Duration,
    pub max_eval: Duration,
    pub if_viol_or_broken: Duration,
}

fn timed<T>(slot: Option<&mut Duration>, f: impl FnOnce() -> T) -> T {
    match slot {
        Some(d) => {
            let t0 = Instant::now();
            let out = f();
            *d += t0.elapsed();
            out
        }
        None => f(),
    }
}

/// Everything a step may read.
#[derive(Clone, Copy)]
pub struct StepCtx<'a> {
    pub kb: &'a FactBase,
    pub history: &'a History,
    pub costs: &'a CostTables,
    pub now: Tick,
    pub unit: TickUnit,
    pub default_k: Tick,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub status: ExprStatus,
    pub since: Tick,
    pub armed_at: Option<Tick>,
    pub terminal_at: Option<Tick>,
    pub binding: Binding,
    tracker: Option<CoreTracker>,
    future_warned: bool,
    last_break_seq: Option<u64>,
    eta3_sent: HashSet<Emission>,
}

impl Instance {
    fn new(since: Tick) -> Self {
        Instance {
            status: ExprStatus::Dormant,
            since,
            armed_at: None,
            terminal_at: None,
            binding: Binding::new(),
            tracker: None,
            future_warned: false,
            last_break_seq: None,
            eta3_sent: HashSet::new(),
        }
    }

    /// Ticks at which τ was evaluated.
    pub fn evaluated(&self) -> &[Tick] {
        self.tracker.as_ref().map_or(&[], |t| t.evaluated())
    }

    pub fn final_status(&self, op: OpKind) -> FinalStatus {
        match self.status {
            ExprStatus::Dormant => FinalStatus::Dormant,
            ExprStatus::Disabled => FinalStatus::Disabled,
            ExprStatus::Fulfilled => FinalStatus::Fulfilled,
            ExprStatus::Violated => FinalStatus::Violated,
            ExprStatus::Broken => FinalStatus::Broken,
            ExprStatus::Armed | ExprStatus::Holding => match op {
                OpKind::Eventually => FinalStatus::Pending,
                _ => FinalStatus::FulfilledSoFar,
            },
        }
    }
}

/// Live state of one expression: its instances and the violations still open.
#[derive(Clone, Debug)]
pub struct ExprRuntime {
    pub expr: EvolutionaryExpr,
    instances: Vec<Instance>,
    open_witnesses: BTreeSet<String>,
    shared_pre: BTreeSet<String>,
    shared_future: BTreeSet<String>,
}

impl ExprRuntime {
    pub fn new(expr: EvolutionaryExpr) -> Self {
        let shared_pre = expr.shared_with_pre();
        let mut shared_future = expr.tau.vars();
        shared_future.extend(expr.pre.vars());
        shared_future.extend(expr.breaking.vars());
        ExprRuntime {
            expr,
            instances: Vec::new(),
            open_witnesses: BTreeSet::new(),
            shared_pre,
            shared_future,
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    fn active(&self) -> Option<usize> {
        let last = self.instances.len().checked_sub(1)?;
        (!self.instances[last].status.is_terminal()).then_some(last)
    }

    /// Starts a fresh instance when the previous one has ended and may re-arm.
    fn ensure_instance(&mut self, now: Tick) -> Option<usize> {
        if let Some(i) = self.active() {
            return Some(i);
        }
        let since = match self.instances.last() {
            None => 0,
            Some(prev) => {
                let end = prev.terminal_at.unwrap_or(0);
                let rearm = !self.expr.pre.is_empty()
                    || matches!(prev.status, ExprStatus::Violated | ExprStatus::Broken);
                if !rearm || now <= end {
                    return None;
                }
                end + 1
            }
        };
        self.instances.push(Instance::new(since));
        Some(self.instances.len() - 1)
    }

    fn transition(
        &mut self,
        idx: usize,
        to: ExprStatus,
        now: Tick,
        cause: String,
        out: &mut Vec<Effect>,
    ) {
        let inst = &mut self.instances[idx];
        let from = inst.status;
        debug_assert!(from.can_become(to), "illegal transition {from} -> {to}");
        inst.status = to;
        if to.is_terminal() {
            inst.terminal_at = Some(now);
        }
        out.push(Effect::Transition { instance: idx, from, to, cause });
    }

    /// Advances the expression to `ctx.now`.
    pub fn step(
        &mut self,
        ctx: &StepCtx<'_>,
        mut times: Option<&mut PhaseTimes>,
    ) -> Result<Vec<Effect>, TemporalError> {
        let mut out = Vec::new();
        let Some(idx) = self.ensure_instance(ctx.now) else {
            return Ok(out);
        };
        if self.instances[idx].status == ExprStatus::Dormant {
            let armed = timed(times.as_deref_mut().map(|t| &mut t.if_eval), || {
                self.try_arm(idx, ctx, &mut out)
            })?;
            if !armed {
                return Ok(out);
            }
        }
        let broke = timed(times.as_deref_mut().map(|t| &mut t.if_viol_or_broken), || {
            self.check_breaking_and_future(idx, ctx, &mut out)
        })?;
        if broke {
            return Ok(out);
        }
        self.check_tau(idx, ctx, times, &mut out)?;
        Ok(out)
    }

    fn try_arm(
        &mut self,
        idx: usize,
        ctx: &StepCtx<'_>,
        out: &mut Vec<Effect>,
    ) -> Result<bool, TemporalError> {
        let since = self.instances[idx].since;
        let binding = if self.expr.pre.is_empty() {
            Binding::new()
        } else {
            let m = self.expr.pre.match_events(
                ctx.history.since(since),
                ctx.kb,
                &Binding::new(),
                &self.shared_pre,
            );
            match m.result {
                MatchResult::NoEvents => return Ok(false),
                MatchResult::Mismatch { at } => {
                    let cause = format!("precondition order broken at relevant event {at}");
                    self.transition(idx, ExprStatus::Disabled, ctx.now, cause, out);
                    return Ok(false);
                }
                MatchResult::Prefix { binding, .. } | MatchResult::Complete { binding } => binding,
            }
        };
        let iv = self.expr.tau.op.resolve(ctx.unit, ctx.default_k, &binding)?;
        let tracker = CoreTracker::new(self.expr.tau.op.op, iv, ctx.now);
        if tracker.expired() {
            return Ok(false);
        }
        let inst = &mut self.instances[idx];
        inst.tracker = Some(tracker);
        inst.armed_at = Some(ctx.now);
        let cause = if binding.is_empty() {
            "enabled".to_string()
        } else {
            format!("precondition {binding}")
        };
        inst.binding = binding;
        self.transition(idx, ExprStatus::Armed, ctx.now, cause, out);
        Ok(true)
    }

    /// Breaking events first, then the expected-future order. Returns true
    /// when the instance broke.
    fn check_breaking_and_future(
        &mut self,
        idx: usize,
        ctx: &StepCtx<'_>,
        out: &mut Vec<Effect>,
    ) -> Result<bool, TemporalError> {
        let armed_at = self.instances[idx].armed_at.unwrap_or(0);
        let window = ctx.history.since(armed_at);
        if !self.expr.breaking.is_empty() {
            let inst = &self.instances[idx];
            let last = inst.last_break_seq;
            let hits: Vec<_> = self
                .expr
                .breaking
                .occurrences(window, ctx.kb, &inst.binding)
                .filter(|(e, _)| last.is_none_or(|l| e.seq > l))
                .map(|(e, b)| (e.clone(), b))
                .collect();
            if let Some(eta3) = &self.expr.eta3 {
                let view = EventView { history: ctx.history, now: ctx.now };
                for (hit, b) in hits {
                    let emitted = fire_reaction(eta3, ctx.kb, Some(&view), ctx.costs, &b)?;
                    let inst = &mut self.instances[idx];
                    inst.last_break_seq = Some(hit.seq);
                    for e in emitted {
                        if inst.eta3_sent.insert(e.clone()) {
                            out.push(Effect::Emit {
                                instance: idx,
                                provenance: Provenance::Eta3,
                                emission: e,
                            });
                        }
                    }
                }
            } else if let Some((hit, b)) = hits.into_iter().next() {
                let cause = format!("breaking event {}", hit.event);
                self.transition(idx, ExprStatus::Broken, ctx.now, cause, out);
                if let Some(eta2) = &self.expr.eta2 {
                    out.push(Effect::Emit {
                        instance: idx,
                        provenance: Provenance::Eta2,
                        emission: ground_emission(eta2, &b)?,
                    });
                }
                return Ok(true);
            }
        }
        if !self.expr.future.is_empty() && !self.instances[idx].future_warned {
            let m = self.expr.future.match_events(
                window,
                ctx.kb,
                &self.instances[idx].binding,
                &self.shared_future,
            );
            if let MatchResult::Mismatch { at } = m.result {
                self.instances[idx].future_warned = true;
                out.push(Effect::Warning {
                    instance: idx,
                    message: format!("expected future events out of order at relevant event {at}"),
                });
            }
        }
        Ok(false)
    }

    fn future_binding(&self, idx: usize, ctx: &StepCtx<'_>) -> Binding {
        let inst = &self.instances[idx];
        let window = ctx.history.since(inst.armed_at.unwrap_or(0));
        let m = self.expr.future.match_events(window, ctx.kb, &inst.binding, &self.shared_future);
        m.result.binding().cloned().unwrap_or_default()
    }

    fn check_tau(
        &mut self,
        idx: usize,
        ctx: &StepCtx<'_>,
        mut times: Option<&mut PhaseTimes>,
        out: &mut Vec<Effect>,
    ) -> Result<(), TemporalError> {
        let view = EventView { history: ctx.history, now: ctx.now };
        let seed = self.instances[idx].binding.clone();
        let tau = &self.expr.tau;
        let mut last_eval = None;
        let mut tracker = self.instances[idx].tracker.take().expect("armed instance has a tracker");
        let verdict = timed(times.as_deref_mut().map(|t| &mut t.max_eval), || {
            tracker.tick(ctx.now, || {
                let e = eval_once(tau, ctx.kb, Some(&view), &seed)?;
                let holds = e.as_ref().map(|e| e.holds);
                last_eval = e;
                Ok::<_, TemporalError>(holds)
            })
        });
        let done = tracker.is_done();
        self.instances[idx].tracker = Some(tracker);
        let Some(verdict) = verdict? else {
            return Ok(());
        };
        let status = self.instances[idx].status;
        match verdict {
            CoreVerdict::Vacuous => {}
            CoreVerdict::HoldsSoFar => {
                self.open_witnesses.clear();
                if status == ExprStatus::Armed {
                    let cause = format!("check passed at {}", ctx.now);
                    self.transition(idx, ExprStatus::Holding, ctx.now, cause, out);
                }
            }
            CoreVerdict::HoldsFinal => {
                if tau.op.op != OpKind::Eventually {
                    self.open_witnesses.clear();
                }
                let cause = format!("interval closed at {}", ctx.now);
                self.transition(idx, ExprStatus::Fulfilled, ctx.now, cause, out);
            }
            CoreVerdict::ViolatedNow => {
                // The binding reported is that of the first witness not already open.
                let fresh = match &last_eval {
                    Some(e) if tau.op.op != OpKind::Eventually => {
                        let keys = timed(times.as_deref_mut().map(|t| &mut t.max_eval), || {
                            witness_keys(tau, ctx.kb, Some(&view), e)
                        })?;
                        let fresh = keys
                            .iter()
                            .find(|(k, _)| !self.open_witnesses.contains(*k))
                            .map(|(_, b)| b.clone());
                        self.open_witnesses = keys.into_keys().collect();
                        fresh
                    }
                    _ => Some(last_eval.map(|e| e.binding).unwrap_or_default()),
                };
                if let Some(mut b) = fresh {
                    b.merge_missing(&self.instances[idx].binding);
                    if !self.expr.future.is_empty() {
                        b.merge_missing(&self.future_binding(idx, ctx));
                    }
                    self.violate(idx, ctx, b, out)?;
                } else if done {
                    let cause = "repeat of an open violation".to_string();
                    self.transition(idx, ExprStatus::Violated, ctx.now, cause, out);
                }
            }
        }
        Ok(())
    }

    fn violate(
        &mut self,
        idx: usize,
        ctx: &StepCtx<'_>,
        b: Binding,
        out: &mut Vec<Effect>,
    ) -> Result<(), TemporalError> {
        self.transition(idx, ExprStatus::Violated, ctx.now, format!("violation {b}"), out);
        out.push(Effect::Violation { instance: idx, binding: b.clone() });
        if let Some(r) = &self.expr.repair {
            let view = EventView { history: ctx.history, now: ctx.now };
            for e in fire_reaction(r, ctx.kb, Some(&view), ctx.costs, &b)? {
                out.push(Effect::Emit { instance: idx, provenance: Provenance::Repair, emission: e });
            }
        }
        if let Some(eta1) = &self.expr.eta1 {
            out.push(Effect::Emit {
                instance: idx,
                provenance: Provenance::Eta1,
                emission: ground_emission(eta1, &b)?,
            });
        }
        Ok(())
    }

    /// Final status of every instance that ever left its starting point,
    /// plus the last one.
    pub fn final_report(&self) -> Vec<(usize, FinalStatus)> {
        let op = self.expr.tau.op.op;
        let n = self.instances.len();
        self.instances
            .iter()
            .enumerate()
            .filter(|(i, inst)| inst.status != ExprStatus::Dormant || *i + 1 == n)
            .map(|(i, inst)| (i, inst.final_status(op)))
            .collect()
    }
}

fn ground_emission(atom: &Term, b: &Binding) -> Result<Emission, TemporalError> {
    let inst = atom.apply(b);
    if !inst.is_ground() {
        return Err(TemporalError::NonGroundAction(inst.to_string()));
    }
    Ok(Emission::from_atom(inst))
}
