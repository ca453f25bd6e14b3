//! Runtime monitoring of agent event histories against interval temporal
//! constraints, with repair reactions and a reflective action gate.
//!
//! Programs are written in a small rule language (see [`dsl`]) and run over
//! timestamped event traces by [`runtime::run`].

pub mod dsl;
pub mod events;
pub mod evolutionary;
pub mod kb;
pub mod metagate;
pub mod patterns;
pub mod runtime;
pub mod scenarios;
pub mod temporal;

pub use dsl::{parse_program, parse_term, parse_trace, ParseError, Program, TraceError};
pub use events::{Event, EventKind, History, Tick};
pub use evolutionary::{EvolutionaryExpr, ExprRuntime, ExprStatus, FinalStatus, Provenance};
pub use kb::{Binding, FactBase, Literal, Term};
pub use metagate::{gate, GateDecision, MetaRule};
pub use runtime::{measure, run, CycleMetrics, Engine, EngineConfig, EngineError, Record, Report};
pub use scenarios::{generate, Scenario, ScenarioKind, ScenarioSpec, Variant};
pub use temporal::{ContextualFormula, IntervalOp, OpKind, TickUnit};
