//! Parsed workloads for the criterion benches.

use ailtl_core::scenarios::scaling_workload;
use ailtl_core::{generate, parse_program, parse_trace, Event, Program, ScenarioSpec};

pub struct Workload {
    pub program: Program,
    pub events: Vec<Event>,
}

impl Workload {
    fn parse(program: &str, trace: &str) -> Self {
        Workload {
            program: parse_program(program).expect("workload program parses"),
            events: parse_trace(trace).expect("workload trace parses"),
        }
    }

    /// `f` identical expressions over `ticks` ticks.
    pub fn scaling(f: usize, ticks: u64) -> Self {
        let (p, t) = scaling_workload(f, ticks);
        Self::parse(&p, &t)
    }

    pub fn scenario(spec: &ScenarioSpec) -> Self {
        let s = generate(spec).expect("scenario generates");
        Self::parse(&s.program, &s.trace)
    }
}
