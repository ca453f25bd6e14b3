use std::fmt;

use crate::events::{EventKind, Tick};
use crate::evolutionary::{ExprStatus, FinalStatus, Provenance};
use crate::kb::{Binding, Term};
use crate::metagate::GateDecision;

use super::CycleMetrics;

pub const REPORT_HEADER: &str = "ailtl-report 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Record {
    /// An action from the trace, or anything the engine emitted.
    Event {
        tick: Tick,
        kind: EventKind,
        payload: Term,
        provenance: Provenance,
        source: Option<String>,
        gate: Option<GateDecision>,
    },
    Transition { tick: Tick, id: String, from: ExprStatus, to: ExprStatus, cause: String },
    Violation { tick: Tick, id: String, binding: Binding },
    RuleViolation { tick: Tick, id: String, binding: Binding },
    Warning { tick: Tick, id: String, message: String },
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Record::Event { tick, kind, payload, provenance, source, gate } => write!(
                f,
                "event {tick} {} {payload} {} {} {}",
                kind.letter(),
                provenance.name(),
                source.as_deref().unwrap_or("-"),
                gate.map_or("-", |g| g.name())
            ),
            Record::Transition { tick, id, from, to, cause } => {
                write!(f, "transition {tick} {id} {from} -> {to} : {cause}")
            }
            Record::Violation { tick, id, binding } => write!(f, "violation {tick} {id} {binding}"),
            Record::RuleViolation { tick, id, binding } => {
                write!(f, "rule-violation {tick} {id} {binding}")
            }
            Record::Warning { tick, id, message } => write!(f, "warning {tick} {id} : {message}"),
        }
    }
}

/// Everything a run produced. Rendering is deterministic; metrics are kept
/// out of the text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Record>,
    /// `(instance id, status)` for every expression instance worth reporting.
    pub finals: Vec<(String, FinalStatus)>,
    pub metrics: Vec<CycleMetrics>,
    /// Last processed tick.
    pub end: Tick,
}

impl Report {
    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| matches!(r, Record::Violation { .. })).count()
    }

    pub fn rule_violations(&self) -> usize {
        self.records.iter().filter(|r| matches!(r, Record::RuleViolation { .. })).count()
    }

    pub fn has_violations(&self) -> bool {
        self.violations() + self.rule_violations() > 0
    }

    pub fn count_final(&self, status: FinalStatus) -> usize {
        self.finals.iter().filter(|(_, s)| *s == status).count()
    }

    pub fn final_of(&self, id: &str) -> Option<FinalStatus> {
        self.finals.iter().find(|(i, _)| i == id).map(|(_, s)| *s)
    }

    /// Actions the gate refused.
    pub fn blocked(&self) -> impl Iterator<Item = (&Term, GateDecision)> {
        self.records.iter().filter_map(|r| match r {
            Record::Event { payload, gate: Some(g), .. } if !g.allows() => Some((payload, *g)),
            _ => None,
        })
    }

    /// Events the engine produced itself, whether or not the gate let them through.
    pub fn emitted(&self) -> impl Iterator<Item = (Tick, Provenance, &Term)> {
        self.records.iter().filter_map(|r| match r {
            Record::Event { tick, payload, provenance, .. } if *provenance != Provenance::Trace => {
                Some((*tick, *provenance, payload))
            }
            _ => None,
        })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{REPORT_HEADER}")?;
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        for (id, s) in &self.finals {
            writeln!(f, "final {id} {s}")?;
        }
        writeln!(
            f,
            "summary end={} violations={} rule-violations={} broken={} blocked={} emitted={}",
            self.end,
            self.violations(),
            self.rule_violations(),
            self.count_final(FinalStatus::Broken),
            self.blocked().count(),
            self.emitted().count()
        )
    }
}
