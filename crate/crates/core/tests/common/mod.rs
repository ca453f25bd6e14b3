#![allow(dead_code)]

pub mod gen;
pub mod oracle;

use std::collections::HashMap;
use std::path::Path;

use ailtl_core::scenarios::{ScenarioKind, ScenarioSpec, Variant};
use ailtl_core::{generate, parse_program, parse_trace, run, EngineConfig, ExprStatus, Record, Report};

/// A broken variant of `text` and the position the error must point at, when
/// that position is known exactly.
pub struct Malformed {
    pub label: &'static str,
    pub text: String,
    pub at: Option<(usize, usize)>,
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.lines().count().max(1);
    let col = text.lines().last().map_or(0, |l| l.chars().count());
    (line, col + 1)
}

/// Corruptions of a valid program. `valid` must end with a newline.
pub fn malformed(g: &mut gen::Gen, valid: &str) -> Vec<Malformed> {
    let mut out = Vec::new();
    let (line, _) = end_position(valid);
    let next = if valid.is_empty() { 1 } else { line + 1 };

    let stray = format!("{valid}facts:\n  p(a) ? q.\n");
    out.push(Malformed { label: "stray character", text: stray, at: Some((next + 1, 8)) });

    let reversed = format!("{valid}rules:\n  ALWAYS(9,2) p DIV q.\n");
    out.push(Malformed { label: "reversed interval", text: reversed, at: Some((next + 1, 3)) });

    let open = format!("{valid}expr:\n  NEVER p DIV go, X IN {{a, b : cheap.\n");
    out.push(Malformed { label: "unclosed brace", text: open, at: Some((next + 1, 37)) });

    let nonground = format!("{valid}facts:\n  level(X).\n");
    out.push(Malformed { label: "variable in fact", text: nonground, at: Some((next + 1, 3)) });

    let no_dot = format!("{valid}facts:\n  p(a)\n");
    out.push(Malformed { label: "missing final dot", text: no_dot, at: None });

    // Cut inside the last statement, after its first token.
    let tail = format!("{valid}expr:\n  go_E@T : ALWAYS(T,T + 5) level(X), X > 3 DIV alarm.\n");
    let body_start = tail.len() - "go_E@T : ALWAYS(T,T + 5) level(X), X > 3 DIV alarm.\n".len();
    let cut = body_start + 2 + g.below(45) as usize;
    out.push(Malformed { label: "truncated", text: tail[..cut].to_string(), at: None });
    out
}

pub fn golden_specs() -> Vec<ScenarioSpec> {
    use ScenarioKind::*;
    vec![
        ScenarioSpec::new(Queue).seed(7),
        ScenarioSpec::new(Queue).seed(7).inject_duplicates(1),
        ScenarioSpec::new(Queue).seed(3).size(30).inject_duplicates(3),
        ScenarioSpec::new(Supply),
        ScenarioSpec::new(Supply).variant(Variant::Soft),
        ScenarioSpec::new(Battery),
        ScenarioSpec::new(Battery).variant(Variant::LowCharge),
        ScenarioSpec::new(Battery).variant(Variant::Extensive),
        ScenarioSpec::new(Temperature),
        ScenarioSpec::new(Ethics).size(30),
        ScenarioSpec::new(Ambulance),
    ]
}

/// Every transition is allowed and starts where the previous one for the
/// same instance ended.
pub fn check_transitions(r: &Report) -> Result<(), String> {
    let mut last: HashMap<&str, ExprStatus> = HashMap::new();
    for rec in &r.records {
        if let Record::Transition { tick, id, from, to, .. } = rec {
            let prev = last.get(id.as_str()).copied().unwrap_or(ExprStatus::Dormant);
            if prev != *from || !from.can_become(*to) {
                return Err(format!("{id} at {tick}: {prev} then {from} -> {to}"));
            }
            last.insert(id, *to);
        }
    }
    Ok(())
}

/// Runs one scenario and compares it with its oracle and its golden report.
pub fn check_scenario(spec: &ScenarioSpec) -> Result<(), String> {
    let s = generate(spec).map_err(|e| e.to_string())?;
    let p = parse_program(&s.program).map_err(|e| format!("program: {e}"))?;
    let events = parse_trace(&s.trace).map_err(|e| format!("trace: {e}"))?;
    let r = run(&p, &events, EngineConfig::from_program(&p)).map_err(|e| e.to_string())?;
    check_transitions(&r)?;
    let got = oracle::outline(&r);
    let want = oracle::expected(spec, &s.program, &s.trace);
    if got != want {
        return Err(format!("oracle mismatch\n  engine: {got:?}\n  oracle: {want:?}"));
    }
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{}.report", spec.file_stem()));
    let text = r.to_string();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let golden = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (set UPDATE_GOLDEN=1 to create)", path.display()))?;
    if golden != text {
        let line = golden.lines().zip(text.lines()).position(|(a, b)| a != b);
        return Err(format!("{} differs from golden at line {:?}", spec.file_stem(), line.map(|l| l + 1)));
    }
    Ok(())
}
