//! Program and trace file syntax.
//!
//! A program is a list of sections (`facts:`, `meta:`, `rules:`, `expr:`,
//! `costs:`, `config:`) in any order. Rendering is canonical, so
//! `parse_program(&p.to_string()) == Ok(p)` for any well-formed program.

mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::events::{Event, Tick};
use crate::evolutionary::EvolutionaryExpr;
use crate::kb::Term;
use crate::metagate::MetaRule;
use crate::temporal::{CostTables, ReactiveRule, TickUnit};

pub use parser::{parse_program, parse_term, parse_trace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("line {line}: timestamp {got} is earlier than {last}")]
    TimestampRegression { line: usize, last: Tick, got: Tick },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    pub default_frequency: Option<u64>,
    pub tick: Option<TickUnit>,
    /// Last tick to process even when the trace ends earlier.
    pub horizon: Option<Tick>,
    /// Per-functor limit on archived versions.
    pub retention: Vec<(String, usize)>,
}

impl Config {
    pub fn is_empty(&self) -> bool {
        *self == Config::default()
    }

    pub fn tick_unit(&self) -> TickUnit {
        self.tick.unwrap_or_default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub facts: Vec<Term>,
    pub metarules: Vec<MetaRule>,
    pub reactive: Vec<ReactiveRule>,
    pub evolutionary: Vec<EvolutionaryExpr>,
    pub costs: CostTables,
    pub config: Config,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.config.is_empty() {
            writeln!(f, "config:")?;
            let c = &self.config;
            if let Some(k) = c.default_frequency {
                writeln!(f, "  default_frequency = {k}.")?;
            }
            if let Some(t) = c.tick {
                writeln!(f, "  tick = {}.", t.name())?;
            }
            if let Some(h) = c.horizon {
                writeln!(f, "  horizon = {h}.")?;
            }
            for (functor, n) in &c.retention {
                writeln!(f, "  retention({functor}) = {n}.")?;
            }
        }
        if !self.facts.is_empty() {
            writeln!(f, "facts:")?;
            for t in &self.facts {
                writeln!(f, "  {t}.")?;
            }
        }
        if !self.costs.is_empty() {
            writeln!(f, "costs:")?;
            for (pref, row) in self.costs.iter() {
                let cells: Vec<String> = row.iter().map(|(o, c)| format!("{o} = {c}")).collect();
                writeln!(f, "  {pref}: {}.", cells.join(", "))?;
            }
        }
        if !self.metarules.is_empty() {
            writeln!(f, "meta:")?;
            for r in &self.metarules {
                writeln!(f, "  {r}.")?;
            }
        }
        if !self.reactive.is_empty() {
            writeln!(f, "rules:")?;
            for r in &self.reactive {
                writeln!(f, "  {r}.")?;
            }
        }
        if !self.evolutionary.is_empty() {
            writeln!(f, "expr:")?;
            for x in &self.evolutionary {
                writeln!(f, "  {x}.")?;
            }
        }
        Ok(())
    }
}

/// One event per line, in the trace file format.
pub fn render_trace(events: &[Event]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}
