//! The monitor loop. Each tick ingests that tick's events, runs the reactive
//! rules and the expressions, then feeds what they emitted back through the
//! action gate. Emissions are recorded after the checks, so nothing reacts
//! to its own output within one cycle.

mod metrics;
mod report;

pub use metrics::{CycleMetrics, CSV_HEADER};
pub use report::{Record, Report, REPORT_HEADER};

use std::time::Instant;

use thiserror::Error;

use crate::dsl::Program;
use crate::events::{Event, EventKind, EventsError, History, SnapshotStamp, StateSeq, Tick};
use crate::evolutionary::{Effect, ExprRuntime, PhaseTimes, Provenance, StepCtx};
use crate::kb::{Binding, FactBase, KbError, Term};
use crate::metagate::{gate, MetaError, MetaRule};
use crate::temporal::{
    eval_once, fire_reaction, CoreTracker, CoreVerdict, CostTables, Emission, EventView,
    ReactiveRule, TemporalError, TickUnit,
};

pub const DEFAULT_EMISSION_CAP: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("fact {fact}: {source}")]
    Fact { fact: Term, source: KbError },
    #[error("tick {tick}: {source}")]
    Kb { tick: Tick, source: KbError },
    #[error("tick {tick}: {source}")]
    Temporal { tick: Tick, source: TemporalError },
    #[error("tick {tick}: {source}")]
    Gate { tick: Tick, source: MetaError },
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error("tick {tick}: more than {cap} emissions in one cycle")]
    CapExceeded { tick: Tick, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Check frequency for operators written without `;k`.
    pub default_frequency: Tick,
    pub unit: TickUnit,
    pub horizon: Option<Tick>,
    pub retention: Vec<(String, usize)>,
    pub metrics: bool,
    pub emission_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            default_frequency: 1,
            unit: TickUnit::default(),
            horizon: None,
            retention: Vec::new(),
            metrics: false,
            emission_cap: DEFAULT_EMISSION_CAP,
        }
    }
}

impl EngineConfig {
    pub fn from_program(p: &Program) -> Self {
        let c = &p.config;
        EngineConfig {
            default_frequency: c.default_frequency.unwrap_or(1).max(1),
            unit: c.tick_unit(),
            horizon: c.horizon,
            retention: c.retention.clone(),
            ..Default::default()
        }
    }
}

struct RuleRuntime {
    rule: ReactiveRule,
    tracker: CoreTracker,
}

pub struct Engine {
    kb: FactBase,
    metarules: Vec<MetaRule>,
    rules: Vec<RuleRuntime>,
    exprs: Vec<ExprRuntime>,
    costs: CostTables,
    history: History,
    states: StateSeq,
    cfg: EngineConfig,
    report: Report,
    next_tick: Tick,
}

impl Engine {
    pub fn new(p: &Program, cfg: EngineConfig) -> Result<Self, EngineError> {
        let mut kb = FactBase::new();
        for f in &p.facts {
            kb.assert_fact(f.clone())
                .map_err(|source| EngineError::Fact { fact: f.clone(), source })?;
        }
        let mut rules = Vec::new();
        for r in &p.reactive {
            let iv = r
                .monitor
                .op
                .resolve(cfg.unit, cfg.default_frequency, &Binding::new())
                .map_err(|source| EngineError::Temporal { tick: 0, source })?;
            rules.push(RuleRuntime {
                rule: r.clone(),
                tracker: CoreTracker::new(r.monitor.op.op, iv, 0),
            });
        }
        let mut history = History::new();
        for (functor, n) in &cfg.retention {
            history = history.with_retention(functor.clone(), *n);
        }
        let states = StateSeq::new(SnapshotStamp { history_len: 0, kb_version: kb.version() });
        Ok(Engine {
            kb,
            metarules: p.metarules.clone(),
            rules,
            exprs: p.evolutionary.iter().cloned().map(ExprRuntime::new).collect(),
            costs: p.costs.clone(),
            history,
            states,
            cfg,
            report: Report::default(),
            next_tick: 0,
        })
    }

    pub fn kb(&self) -> &FactBase {
        &self.kb
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn states(&self) -> &StateSeq {
        &self.states
    }

    pub fn expressions(&self) -> &[ExprRuntime] {
        &self.exprs
    }

    pub fn report(&self) -> &Report {
        &self.report
    }

    /// Processes tick `now` with the events stamped at it. Ticks must be
    /// fed in increasing order; skipped ticks are not checked.
    pub fn tick(&mut self, now: Tick, events: &[Event]) -> Result<(), EngineError> {
        let t0 = self.cfg.metrics.then(Instant::now);
        for e in events {
            self.ingest(now, e.clone(), Provenance::Trace, None)?;
        }
        let stamp =
            SnapshotStamp { history_len: self.history.len(), kb_version: self.kb.version() };
        self.states.advance(now, stamp)?;
        let m = t0.map(|t| t.elapsed()).unwrap_or_default();

        let mut emitted: Vec<(Provenance, String, Emission)> = Vec::new();
        self.check_rules(now, &mut emitted)?;
        let mut phases = PhaseTimes::default();
        self.check_exprs(now, &mut phases, &mut emitted)?;
        if emitted.len() > self.cfg.emission_cap {
            return Err(EngineError::CapExceeded { tick: now, cap: self.cfg.emission_cap });
        }
        for (prov, source, em) in emitted {
            self.ingest(now, Event::new(now, em.kind, em.payload), prov, Some(source))?;
        }
        if let Some(t0) = t0 {
            self.report.metrics.push(CycleMetrics {
                f: self.exprs.len() + self.rules.len(),
                m,
                if_eval: phases.if_eval,
                max_eval: phases.max_eval,
                if_viol_or_broken: phases.if_viol_or_broken,
                total: t0.elapsed(),
            });
        }
        self.report.end = now;
        self.next_tick = now + 1;
        Ok(())
    }

    fn check_rules(
        &mut self,
        now: Tick,
        emitted: &mut Vec<(Provenance, String, Emission)>,
    ) -> Result<(), EngineError> {
        let view = EventView { history: &self.history, now };
        let err = |source| EngineError::Temporal { tick: now, source };
        for (i, r) in self.rules.iter_mut().enumerate() {
            let mut last = None;
            let (kb, monitor) = (&self.kb, &r.rule.monitor);
            let verdict = r
                .tracker
                .tick(now, || {
                    let e = eval_once(monitor, kb, Some(&view), &Binding::new())?;
                    let holds = e.as_ref().map(|e| e.holds);
                    last = e;
                    Ok(holds)
                })
                .map_err(err)?;
            if verdict != Some(CoreVerdict::ViolatedNow) {
                continue;
            }
            let id = format!("rule{i}");
            let b = last.map(|e| e.binding).unwrap_or_default();
            self.report.records.push(Record::RuleViolation {
                tick: now,
                id: id.clone(),
                binding: b.clone(),
            });
            let out = fire_reaction(&r.rule.reaction, kb, Some(&view), &self.costs, &b)
                .map_err(err)?;
            emitted.extend(out.into_iter().map(|e| (Provenance::Reactive, id.clone(), e)));
        }
        Ok(())
    }

    fn check_exprs(
        &mut self,
        now: Tick,
        phases: &mut PhaseTimes,
        emitted: &mut Vec<(Provenance, String, Emission)>,
    ) -> Result<(), EngineError> {
        let ctx = StepCtx {
            kb: &self.kb,
            history: &self.history,
            costs: &self.costs,
            now,
            unit: self.cfg.unit,
            default_k: self.cfg.default_frequency,
        };
        let records = &mut self.report.records;
        for (i, x) in self.exprs.iter_mut().enumerate() {
            let times = self.cfg.metrics.then_some(&mut *phases);
            let effects = x
                .step(&ctx, times)
                .map_err(|source| EngineError::Temporal { tick: now, source })?;
            let id = |inst: usize| format!("expr{i}#{inst}");
            for fx in effects {
                match fx {
                    Effect::Transition { instance, from, to, cause } => {
                        records.push(Record::Transition { tick: now, id: id(instance), from, to, cause })
                    }
                    Effect::Violation { instance, binding } => {
                        records.push(Record::Violation { tick: now, id: id(instance), binding })
                    }
                    Effect::Emit { instance, provenance, emission } => {
                        emitted.push((provenance, id(instance), emission))
                    }
                    Effect::Warning { instance, message } => {
                        records.push(Record::Warning { tick: now, id: id(instance), message })
                    }
                }
            }
        }
        Ok(())
    }

    /// Gates actions, applies `assert`/`retract` payloads and records the
    /// event. Blocked actions are reported but never recorded.
    fn ingest(
        &mut self,
        now: Tick,
        event: Event,
        provenance: Provenance,
        source: Option<String>,
    ) -> Result<(), EngineError> {
        let mut decision = None;
        if event.kind == EventKind::Action {
            let out = gate(&event.payload, &self.metarules, &self.kb)
                .map_err(|source| EngineError::Gate { tick: now, source })?;
            if out.doubly_blocked() {
                self.report.records.push(Record::Warning {
                    tick: now,
                    id: "gate".into(),
                    message: format!("{} refused by both solve and solve_not", event.payload),
                });
            }
            decision = Some(out.decision);
        }
        if decision.is_some() || provenance != Provenance::Trace {
            self.report.records.push(Record::Event {
                tick: now,
                kind: event.kind,
                payload: event.payload.clone(),
                provenance,
                source,
                gate: decision,
            });
        }
        if decision.is_some_and(|d| !d.allows()) {
            return Ok(());
        }
        if event.kind == EventKind::Action {
            self.apply_update(now, &event.payload)?;
        }
        self.history.record(event)?;
        Ok(())
    }

    fn apply_update(&mut self, now: Tick, payload: &Term) -> Result<(), EngineError> {
        match payload.functor() {
            Some(("assert", 1)) => {
                self.kb
                    .assert_fact(payload.args()[0].clone())
                    .map_err(|source| EngineError::Kb { tick: now, source })?;
            }
            Some(("retract", 1)) => {
                self.kb.retract_fact(&payload.args()[0]);
            }
            _ => {}
        }
        Ok(())
    }

    /// Closes the run and lists the final status of each instance.
    pub fn finish(mut self) -> Report {
        for (i, x) in self.exprs.iter().enumerate() {
            for (inst, status) in x.final_report() {
                self.report.finals.push((format!("expr{i}#{inst}"), status));
            }
        }
        self.report
    }

    pub fn next_tick(&self) -> Tick {
        self.next_tick
    }
}

/// Runs `events` (sorted by timestamp) through every tick from 0 to the
/// later of the last event and the configured horizon.
pub fn run(p: &Program, events: &[Event], cfg: EngineConfig) -> Result<Report, EngineError> {
    let end = events.last().map(|e| e.timestamp).max(cfg.horizon).unwrap_or(0);
    let mut engine = Engine::new(p, cfg)?;
    let mut rest = events;
    for now in 0..=end {
        let n = rest.iter().take_while(|e| e.timestamp <= now).count();
        let (batch, tail) = rest.split_at(n);
        if let Some(e) = batch.iter().find(|e| e.timestamp < now) {
            return Err(EventsError::TimestampRegression { last: now, got: e.timestamp }.into());
        }
        engine.tick(now, batch)?;
        rest = tail;
    }
    Ok(engine.finish())
}

/// Runs the program `repeat` times with metrics on and returns the mean
/// cycle of each run.
pub fn measure(
    p: &Program,
    events: &[Event],
    cfg: &EngineConfig,
    repeat: usize,
) -> Result<Vec<CycleMetrics>, EngineError> {
    let cfg = EngineConfig { metrics: true, ..cfg.clone() };
    let mut out = Vec::with_capacity(repeat);
    for _ in 0..repeat {
        let r = run(p, events, cfg.clone())?;
        out.extend(CycleMetrics::mean(&r.metrics));
    }
    Ok(out)
}
