//! Straight-line expectations for the generated scenarios, computed from the
//! trace with plain collections instead of the monitoring engine.

use std::collections::{BTreeSet, HashMap, HashSet};

use ailtl_core::runtime::Record;
use ailtl_core::scenarios::{
    ScenarioKind, ScenarioSpec, Variant, AMBULANCE_MEANS, BATTERY_LOW, BATTERY_WINDOW,
    ETHICS_MATRIX, SUPPLY_THRESHOLD, TEMPERATURE_COSTS,
};
use ailtl_core::{parse_program, parse_trace, Binding, Event, GateDecision, Report, Term, Tick};

/// The parts of a report the oracles predict, one rendered line per item.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Outline {
    pub violations: Vec<String>,
    pub rule_violations: Vec<String>,
    pub emitted: Vec<String>,
    /// Gate decisions other than `no-rules`.
    pub gated: Vec<String>,
    pub warnings: Vec<String>,
    pub finals: Vec<String>,
}

pub fn outline(r: &Report) -> Outline {
    let mut o = Outline::default();
    for rec in &r.records {
        match rec {
            Record::Violation { tick, id, binding } => {
                o.violations.push(format!("{tick} {id} {binding}"))
            }
            Record::RuleViolation { tick, id, binding } => {
                o.rule_violations.push(format!("{tick} {id} {binding}"))
            }
            Record::Warning { tick, id, .. } => o.warnings.push(format!("{tick} {id}")),
            Record::Event { tick, payload, provenance, gate, .. } => {
                if provenance.name() != "trace" {
                    o.emitted.push(format!("{tick} {} {payload}", provenance.name()));
                }
                if let Some(g) = gate.filter(|g| *g != GateDecision::NoRulesApply) {
                    o.gated.push(format!("{tick} {payload} {}", g.name()));
                }
            }
            Record::Transition { .. } => {}
        }
    }
    o.finals = r.finals.iter().map(|(id, s)| format!("{id} {s}")).collect();
    o
}

fn binding(pairs: &[(&str, Term)]) -> Binding {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn call<'a>(e: &'a Event, name: &str) -> Option<&'a [Term]> {
    match e.payload.functor() {
        Some((f, _)) if f == name => Some(e.payload.args()),
        _ => None,
    }
}

/// `assert(inner)` or `retract(inner)` with the given inner functor.
fn update<'a>(e: &'a Event, op: &str, inner: &str) -> Option<&'a [Term]> {
    let arg = call(e, op)?.first()?;
    match arg.functor() {
        Some((f, _)) if f == inner => Some(arg.args()),
        _ => None,
    }
}

fn int(t: &Term) -> i64 {
    t.as_int().expect("integer argument")
}

pub fn expected(spec: &ScenarioSpec, program: &str, trace: &str) -> Outline {
    let events = parse_trace(trace).expect("generated trace parses");
    match spec.kind {
        ScenarioKind::Queue => queue(spec, &events),
        ScenarioKind::Supply => supply(spec, &events),
        ScenarioKind::Battery => battery(&events),
        ScenarioKind::Temperature => temperature(&events),
        ScenarioKind::Ethics => ethics(&events),
        ScenarioKind::Ambulance => ambulance(program, &events),
    }
}

fn queue(spec: &ScenarioSpec, events: &[Event]) -> Outline {
    let mut o = Outline::default();
    if spec.inject_duplicates == 0 {
        let mut queued = HashSet::new();
        for e in events {
            let item = if let Some(a) = call(e, "push") {
                a[0].clone()
            } else if let Some(a) = update(e, "assert", "in_queue") {
                a[1].clone()
            } else {
                if let Some(a) = update(e, "retract", "in_queue") {
                    queued.remove(&a[1]);
                }
                continue;
            };
            let decision = if queued.contains(&item) { "blocked-solve-not" } else { "confirmed" };
            o.gated.push(format!("{} {} {decision}", e.timestamp, e.payload));
            if decision == "confirmed" && call(e, "assert").is_some() {
                queued.insert(item);
            }
        }
        o.finals.push("expr0#0 fulfilled-so-far".into());
        return o;
    }

    // No gate: every duplicate push lands, and each one starts a new instance.
    let mut facts: Vec<(Term, Term)> = Vec::new();
    let mut open: BTreeSet<(Term, Term)> = BTreeSet::new();
    let (mut instance, mut since) = (0, 0);
    let ticks: BTreeSet<Tick> = events.iter().map(|e| e.timestamp).collect();
    for t in ticks {
        for e in events.iter().filter(|e| e.timestamp == t) {
            if let Some(a) = update(e, "assert", "in_queue") {
                facts.push((a[0].clone(), a[1].clone()));
            } else if let Some(a) = update(e, "retract", "in_queue") {
                facts.retain(|f| f.0 != a[0] || f.1 != a[1]);
            }
        }
        let first_push = events
            .iter()
            .filter(|e| e.timestamp >= since && e.timestamp <= t)
            .find_map(|e| call(e, "push"));
        let Some(push) = first_push else { continue };
        let mut pairs = Vec::new();
        for (e1, x1) in &facts {
            for (e2, x2) in &facts {
                if x1 == x2 && e1 != e2 {
                    pairs.push((e1.clone(), e2.clone(), x1.clone()));
                }
            }
        }
        let key = |p: &(Term, Term, Term)| {
            if p.0 <= p.1 { (p.0.clone(), p.1.clone()) } else { (p.1.clone(), p.0.clone()) }
        };
        let fresh = pairs.iter().find(|p| !open.contains(&key(p))).cloned();
        open = pairs.iter().map(key).collect();
        if let Some((e1, e2, rx)) = fresh {
            let b = binding(&[
                ("E1", e1),
                ("E2", e2),
                ("Q", push[1].clone()),
                ("RX", rx),
                ("Req", push[0].clone()),
            ]);
            o.violations.push(format!("{t} expr0#{instance} {b}"));
            o.finals.push(format!("expr0#{instance} violated"));
            instance += 1;
            since = t + 1;
        }
    }
    let pending = events.iter().any(|e| e.timestamp >= since && call(e, "push").is_some());
    let last = if pending { "fulfilled-so-far" } else { "dormant" };
    o.finals.push(format!("expr0#{instance} {last}"));
    o
}

fn supply(spec: &ScenarioSpec, events: &[Event]) -> Outline {
    let mut o = Outline::default();
    let hard = spec.variant != Variant::Soft;
    let stock0 = events.iter().find_map(|e| call(e, "supply")).expect("supply event")[1].clone();
    let mut stock: Option<i64> = None;
    let mut blocked = false;
    let mut violated = false;
    let mut last_q = None;
    let ticks: BTreeSet<Tick> = events.iter().map(|e| e.timestamp).collect();
    for t in ticks {
        for e in events.iter().filter(|e| e.timestamp == t) {
            let consume = call(e, "consume");
            let retract = update(e, "retract", "quantity");
            let assert = update(e, "assert", "quantity");
            if consume.is_none() && retract.is_none() && assert.is_none() {
                continue;
            }
            if hard {
                let d = if blocked { "blocked-solve-not" } else { "confirmed" };
                o.gated.push(format!("{t} {} {d}", e.payload));
                if blocked {
                    continue;
                }
            }
            if let Some(a) = consume {
                last_q = Some(a[1].clone());
            } else if retract.is_some() {
                stock = None;
            } else if let Some(a) = assert {
                stock = Some(int(&a[1]));
            }
        }
        match stock {
            Some(v) if !violated && v < SUPPLY_THRESHOLD => {
                violated = true;
                let q = last_q.clone().expect("a consumption precedes low stock");
                let b = binding(&[("Q", q.clone()), ("S", stock0.clone()), ("V", Term::int(v))]);
                o.violations.push(format!("{t} expr0#0 {b}"));
                if hard {
                    o.emitted.push(format!("{t} repair block(consume(r,{q}))"));
                    o.emitted.push(format!("{t} repair assert(blocked(r))"));
                    blocked = true;
                } else {
                    o.emitted.push(format!("{t} repair reorder(r,{stock0})"));
                    o.emitted.push(format!("{t} eta1 notify_low_stock(r,{v})"));
                }
            }
            _ => {}
        }
    }
    if violated {
        o.finals.push("expr0#0 violated".into());
        o.finals.push("expr0#1 dormant".into());
    } else {
        o.finals.push("expr0#0 fulfilled-so-far".into());
    }
    o
}

fn battery(events: &[Event]) -> Outline {
    let mut o = Outline::default();
    let low = events
        .iter()
        .filter(|e| e.timestamp <= BATTERY_WINDOW)
        .find(|e| call(e, "charge_level").is_some_and(|a| int(&a[0]) <= BATTERY_LOW))
        .map(|e| e.timestamp);
    let brk = events
        .iter()
        .filter(|e| e.timestamp <= BATTERY_WINDOW)
        .find(|e| call(e, "dry_water").is_some())
        .map(|e| e.timestamp);
    let status = match (brk, low) {
        (Some(b), l) if l.is_none_or(|l| b <= l) => {
            o.emitted.push(format!("{b} eta2 recharge_battery"));
            "broken"
        }
        (_, Some(l)) => {
            let usage = events
                .iter()
                .filter(|e| e.timestamp <= l)
                .filter(|e| matches!(e.payload.functor(), Some(("move" | "lift", 0))))
                .last()
                .expect("some usage before the battery runs low");
            let b = binding(&[("T", Term::int(0)), ("U", usage.payload.clone())]);
            o.violations.push(format!("{l} expr0#0 {b}"));
            o.emitted.push(format!("{l} repair stop_robot_operation"));
            o.emitted.push(format!("{l} eta1 alert_user_possible_fault"));
            "violated"
        }
        _ => "fulfilled",
    };
    o.finals.push(format!("expr0#0 {status}"));
    o.finals.push("expr0#1 dormant".into());
    o
}

fn temperature(events: &[Event]) -> Outline {
    let mut o = Outline::default();
    let cheapest = TEMPERATURE_COSTS.iter().min_by_key(|(_, c)| *c).expect("costs").0;
    for t in (8 * 60..=17 * 60).step_by(10) {
        let reading = events
            .iter()
            .filter(|e| e.timestamp <= t)
            .filter_map(|e| call(e, "temperature"))
            .last();
        let Some(r) = reading else { continue };
        let v = int(&r[0]);
        if !(19..=21).contains(&v) {
            o.rule_violations.push(format!("{t} rule0 {{T={v}}}"));
            o.emitted.push(format!("{t} reactive modify_temperature({cheapest})"));
        }
    }
    o
}

fn ethics(events: &[Event]) -> Outline {
    let mut o = Outline::default();
    let (mut context, mut role) = (None::<Term>, None::<Term>);
    let mut unsafe_ctx = HashSet::new();
    for e in events {
        let t = e.timestamp;
        if let Some(a) = update(e, "assert", "context") {
            context = Some(a[0].clone());
        } else if let Some(a) = update(e, "assert", "role") {
            role = Some(a[0].clone());
        } else if update(e, "retract", "context").is_some() {
            context = None;
        } else if update(e, "retract", "role").is_some() {
            role = None;
        } else if let Some(a) = update(e, "assert", "unsafe") {
            unsafe_ctx.insert(a[0].clone());
        } else if let Some(a) = call(e, "execute_action") {
            let act = a[0].to_string();
            let c = context.as_ref().map(ToString::to_string);
            let r = role.as_ref().map(ToString::to_string);
            let solve = ETHICS_MATRIX.iter().any(|(mc, mr, ma, ethical)| {
                *ethical && c.as_deref() == Some(*mc) && r.as_deref() == Some(*mr) && *ma == act
            });
            let solve_not = context.as_ref().is_some_and(|c| unsafe_ctx.contains(c));
            let d = if !solve {
                "blocked-solve-fail"
            } else if solve_not {
                "blocked-solve-not"
            } else {
                "confirmed"
            };
            if !solve && solve_not {
                o.warnings.push(format!("{t} gate"));
            }
            o.gated.push(format!("{t} {} {d}", e.payload));
        }
    }
    o
}

fn ambulance(program: &str, events: &[Event]) -> Outline {
    let mut o = Outline::default();
    let p = parse_program(program).expect("generated program parses");
    let costs: HashMap<String, i64> = p
        .costs
        .iter()
        .flat_map(|(_, row)| row.iter().map(|(t, c)| (t.to_string(), *c)))
        .collect();
    let mut best = AMBULANCE_MEANS[0];
    for m in AMBULANCE_MEANS {
        if costs[m] < costs[best] {
            best = m;
        }
    }
    let armed = events.iter().find(|e| call(e, "accident").is_some()).expect("accident").timestamp;
    let hit = events.iter().find(|e| {
        e.timestamp >= armed && matches!(e.payload.functor(), Some(("traffic" | "ambulance_blocked", 0)))
    });
    if let Some(h) = hit {
        o.emitted.push(format!("{} eta3 alternative_transportation({best})", h.timestamp));
    }
    o.finals.push("expr0#0 fulfilled-so-far".into());
    o
}
