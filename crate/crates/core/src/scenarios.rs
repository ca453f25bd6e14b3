//! Deterministic program and trace generators for the example domains.
//!
//! Randomness comes from a fixed 64-bit LCG so that any implementation can
//! regenerate the same files: `state = state * 6364136223846793005 +
//! 1442695040888963407` (wrapping), output `state >> 33`.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Debug)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.state >> 33) as u32
    }

    pub fn below(&mut self, n: u32) -> u32 {
        self.next_u32() % n
    }

    /// Uniform in `[1, 300]`.
    pub fn item(&mut self) -> i64 {
        1 + i64::from(self.below(300))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Queue,
    Supply,
    Battery,
    Temperature,
    Ethics,
    Ambulance,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Queue,
        ScenarioKind::Supply,
        ScenarioKind::Battery,
        ScenarioKind::Temperature,
        ScenarioKind::Ethics,
        ScenarioKind::Ambulance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Queue => "queue",
            ScenarioKind::Supply => "supply",
            ScenarioKind::Battery => "battery",
            ScenarioKind::Temperature => "temperature",
            ScenarioKind::Ethics => "ethics",
            ScenarioKind::Ambulance => "ambulance",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn default_size(self) -> usize {
        match self {
            ScenarioKind::Queue => 100,
            ScenarioKind::Supply => 20,
            ScenarioKind::Battery => 360,
            ScenarioKind::Temperature => 41,
            ScenarioKind::Ethics => 20,
            ScenarioKind::Ambulance => 3,
        }
    }

    /// Variants other than `standard` that apply to this scenario.
    pub fn variants(self) -> &'static [Variant] {
        match self {
            ScenarioKind::Supply => &[Variant::Soft],
            ScenarioKind::Battery => &[Variant::LowCharge, Variant::Extensive],
            _ => &[],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    #[default]
    Standard,
    /// Supply: stock may run below the threshold; reorder instead of block.
    Soft,
    /// Battery: normal usage, but the charge drains below the limit.
    LowCharge,
    /// Battery: an extensive-usage action breaks the expression.
    Extensive,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Standard, Variant::Soft, Variant::LowCharge, Variant::Extensive];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Soft => "soft",
            Variant::LowCharge => "low-charge",
            Variant::Extensive => "extensive",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub size: usize,
    pub seed: u64,
    pub variant: Variant,
    /// Queue only: remove the gate and force this many duplicate pushes.
    pub inject_duplicates: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            size: kind.default_size(),
            seed: 1,
            variant: Variant::Standard,
            inject_duplicates: 0,
        }
    }

    pub fn size(mut self, n: usize) -> Self {
        self.size = n;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn variant(mut self, v: Variant) -> Self {
        self.variant = v;
        self
    }

    pub fn inject_duplicates(mut self, d: usize) -> Self {
        self.inject_duplicates = d;
        self
    }

    /// Base file name, e.g. `battery-extensive`.
    pub fn file_stem(&self) -> String {
        let mut s = self.kind.name().to_string();
        if self.variant != Variant::Standard {
            s = format!("{s}-{}", self.variant.name());
        }
        if self.inject_duplicates > 0 {
            s = format!("{s}-dup{}", self.inject_duplicates);
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("variant `{variant}` does not apply to scenario `{scenario}`")]
    BadVariant { scenario: &'static str, variant: &'static str },
    #[error("{0}")]
    BadParameter(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub program: String,
    pub trace: String,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let v = spec.variant;
    if v != Variant::Standard && !spec.kind.variants().contains(&v) {
        return Err(ScenarioError::BadVariant { scenario: spec.kind.name(), variant: v.name() });
    }
    if spec.inject_duplicates > 0 && spec.kind != ScenarioKind::Queue {
        return Err(ScenarioError::BadParameter(
            "duplicates can only be injected into the queue scenario".into(),
        ));
    }
    if spec.size == 0 {
        return Err(ScenarioError::BadParameter("size must be at least 1".into()));
    }
    let mut rng = Lcg::new(spec.seed);
    let mut trace = format!(
        "# {} size={} seed={} variant={}\n",
        spec.kind.name(),
        spec.size,
        spec.seed,
        v.name()
    );
    let program = match spec.kind {
        ScenarioKind::Queue => queue(spec, &mut rng, &mut trace)?,
        ScenarioKind::Supply => supply(spec, &mut rng, &mut trace),
        ScenarioKind::Battery => battery(spec, &mut rng, &mut trace),
        ScenarioKind::Temperature => temperature(spec, &mut rng, &mut trace),
        ScenarioKind::Ethics => ethics(spec, &mut rng, &mut trace),
        ScenarioKind::Ambulance => ambulance(spec, &mut rng, &mut trace),
    };
    Ok(Scenario { program, trace })
}

fn line(out: &mut String, t: u64, kind: char, payload: impl std::fmt::Display) {
    writeln!(out, "{t} {kind} {payload}").expect("writing to a String");
}

const QUEUE_EXPR: &str = "\
expr:
  push_P+(Req,Q) : NEVER in_queue(E1,RX), in_queue(E2,RX), E1 \\= E2 ::: pop_A+(E,Q).
";

const QUEUE_GATE: &str = "\
meta:
  solve_not(push(X,Q)) :- in_queue(_e,X).
  solve_not(assert(in_queue(E,X))) :- in_queue(_e,X).
";

/// Attempt `i` happens at tick `i`; pops follow in FIFO order, one per tick.
fn queue(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> Result<String, ScenarioError> {
    let n = spec.size;
    let d = spec.inject_duplicates;
    let items: Vec<i64> = if d == 0 {
        (0..n).map(|_| rng.item()).collect()
    } else {
        if d > n / 2 || n - d > 300 {
            return Err(ScenarioError::BadParameter(format!(
                "cannot inject {d} duplicates into {n} pushes"
            )));
        }
        // distinct draws, then the last d attempts repeat distinct earlier items
        let mut items: Vec<i64> = Vec::with_capacity(n);
        while items.len() < n - d {
            let x = rng.item();
            if !items.contains(&x) {
                items.push(x);
            }
        }
        let mut sources: Vec<usize> = Vec::new();
        while sources.len() < d {
            let s = rng.below((n - d) as u32) as usize;
            if !sources.contains(&s) {
                sources.push(s);
            }
        }
        let repeats: Vec<i64> = sources.iter().map(|s| items[*s]).collect();
        items.extend(repeats);
        items
    };
    let mut queued: Vec<(usize, i64)> = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let t = i as u64;
        line(trace, t, 'A', format!("push({item},q1)"));
        line(trace, t, 'A', format!("assert(in_queue({i},{item}))"));
        if d > 0 || !queued.iter().any(|(_, x)| x == item) {
            queued.push((i, *item));
        }
    }
    for (j, (i, item)) in queued.iter().enumerate() {
        let t = (n + j) as u64;
        line(trace, t, 'A', format!("pop({i},q1)"));
        line(trace, t, 'A', format!("retract(in_queue({i},{item}))"));
    }
    let mut p = String::from("# no value may sit in the queue twice\n");
    if d == 0 {
        p.push_str(QUEUE_GATE);
    }
    p.push_str(QUEUE_EXPR);
    Ok(p)
}

pub const SUPPLY_THRESHOLD: i64 = 5;

/// One supply at tick 0, then one consumption per tick until the stock
/// falls below the threshold, plus two more attempts after that.
fn supply(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> String {
    let th = SUPPLY_THRESHOLD;
    let mut stock = 15 + i64::from(rng.below(16));
    line(trace, 0, 'P', format!("supply(r,{stock})"));
    line(trace, 0, 'A', format!("assert(quantity(r,{stock}))"));
    let mut after = 0;
    for i in 1..=spec.size as u64 {
        let q = 1 + i64::from(rng.below(4));
        let next = stock - q;
        line(trace, i, 'A', format!("consume(r,{q})"));
        line(trace, i, 'A', format!("retract(quantity(r,{stock}))"));
        line(trace, i, 'A', format!("assert(quantity(r,{next}))"));
        if spec.variant == Variant::Soft || next >= th {
            stock = next;
        }
        if next < th || after > 0 {
            after += 1;
            if after == 3 {
                break;
            }
        }
    }
    match spec.variant {
        Variant::Soft => format!(
            "# soft limit: low stock is reported and reordered, consumption goes on\n\
             expr:\n  supply_P(r,S) : NEVER quantity(r,V), V < {th} ::: consume_A+(r,Q) \
             DIV reorder(r,S) | notify_low_stock(r,V).\n"
        ),
        _ => format!(
            "# hard limit: once stock is low, further consumption is refused\n\
             meta:\n  solve_not(consume(R,Q)) :- blocked(R).\n  \
             solve_not(retract(quantity(R,V))) :- blocked(R).\n  \
             solve_not(assert(quantity(R,V))) :- blocked(R).\n\
             expr:\n  supply_P(r,S) : NEVER quantity(r,V), V < {th} ::: consume_A+(r,Q) \
             DIV block(consume(r,Q)), assert(blocked(r)).\n"
        ),
    }
}

pub const BATTERY_LOW: i64 = 20;
pub const BATTERY_WINDOW: u64 = 360;

/// Recharge at tick 0, a charge reading every 10 ticks, a usage action
/// every 7.
fn battery(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> String {
    let drain = match spec.variant {
        Variant::LowCharge | Variant::Extensive => 4,
        _ => 6,
    };
    let end = spec.size as u64;
    let heavy_at =
        (spec.variant == Variant::Extensive).then(|| 7 * (15 + u64::from(rng.below(20))));
    line(trace, 0, 'A', "recharge_battery");
    for t in 0..=end {
        if t > 0 && t % 7 == 0 {
            if heavy_at == Some(t) {
                line(trace, t, 'A', "dry_water");
            } else {
                line(trace, t, 'A', ["move", "lift"][rng.below(2) as usize]);
            }
        }
        if t % 10 == 0 {
            line(trace, t, 'N', format!("charge_level({})", 100 - (t / drain) as i64));
        }
    }
    format!(
        "config:\n  horizon = {}.\n\
         facts:\n  normal_usage_action(move).\n  normal_usage_action(lift).\n  \
         extensive_usage_action(dry_water).\n\
         expr:\n  recharge_battery_P@T : ALWAYS(T,T + 6:00) charge_level_N(L), L > {BATTERY_LOW} \
         ::: normal_usage_action*(U) :::: extensive_usage_action*(X) \
         DIV stop_robot_operation | alert_user_possible_fault_A || recharge_battery_G.\n",
        end.max(BATTERY_WINDOW) + 10
    )
}

pub const TEMPERATURE_COSTS: [(&str, i64); 3] = [("ext", 3), ("gas", 2), ("solar", 1)];

/// Readings every 15 minutes from 7:00.
fn temperature(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> String {
    for i in 0..spec.size as u64 {
        let v = 17 + rng.below(7);
        line(trace, 420 + 15 * i, 'N', format!("temperature({v})"));
    }
    let costs: Vec<String> = TEMPERATURE_COSTS.iter().map(|(s, c)| format!("{s} = {c}")).collect();
    format!(
        "config:\n  tick = minute.\n  horizon = 1020.\n\
         costs:\n  less_expensive: {}.\n\
         rules:\n  ALWAYS(8:00,17:00;10) 19 <= T, T <= 21 :: temperature_N(T) \
         DIV modify_temperature(S), S IN {{ext,gas,solar : less_expensive}}.\n",
        costs.join(", ")
    )
}

pub const ETHICS_CONTEXTS: [&str; 3] = ["video_game", "role_game", "reality"];
pub const ETHICS_ROLES: [&str; 3] = ["player", "citizen", "police"];
pub const ETHICS_ACTS: [&str; 2] = ["shoot", "arrest"];

/// `(context, role, act, ethical)` for every allowed combination.
pub const ETHICS_MATRIX: [(&str, &str, &str, bool); 7] = [
    ("video_game", "player", "shoot", true),
    ("role_game", "player", "shoot", true),
    ("role_game", "police", "arrest", true),
    ("reality", "police", "arrest", true),
    ("reality", "police", "shoot", true),
    ("reality", "citizen", "shoot", false),
    ("reality", "citizen", "arrest", false),
];

/// One attempted action per tick under a drawn context and role. Halfway
/// through, reality becomes unsafe.
fn ethics(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> String {
    let mut current: Option<(&str, &str)> = None;
    for i in 0..spec.size as u64 {
        // half the attempts come from the permitted matrix, half are arbitrary
        let (c, r, act) = if rng.below(2) == 0 {
            let (c, r, a, _) = ETHICS_MATRIX[rng.below(ETHICS_MATRIX.len() as u32) as usize];
            (c, r, a)
        } else {
            (
                ETHICS_CONTEXTS[rng.below(3) as usize],
                ETHICS_ROLES[rng.below(3) as usize],
                ETHICS_ACTS[rng.below(2) as usize],
            )
        };
        if let Some((pc, pr)) = current {
            line(trace, i, 'A', format!("retract(context({pc}))"));
            line(trace, i, 'A', format!("retract(role({pr}))"));
        }
        line(trace, i, 'A', format!("assert(context({c}))"));
        line(trace, i, 'A', format!("assert(role({r}))"));
        if i == spec.size as u64 / 2 {
            line(trace, i, 'A', "assert(unsafe(reality))");
        }
        line(trace, i, 'A', format!("execute_action({act})"));
        current = Some((c, r));
    }
    let mut p = String::from("facts:\n");
    for (c, r, a, ethical) in ETHICS_MATRIX {
        writeln!(p, "  allowed({c},{r},{a}).").expect("writing to a String");
        if ethical {
            writeln!(p, "  ethical({c},{r},{a}).").expect("writing to a String");
        }
    }
    p.push_str(
        "meta:\n  \
         solve(execute_action(Act)) :- context(C), role(R), allowed(C,R,Act), ethical(C,R,Act).\n  \
         solve_not(execute_action(Act)) :- context(C), unsafe(C).\n",
    );
    p
}

pub const AMBULANCE_MEANS: [&str; 3] = ["elicopter", "boat", "drone"];

/// One accident, then traffic and a blocked ambulance, `size` times over.
/// Travel times are drawn per run.
fn ambulance(spec: &ScenarioSpec, rng: &mut Lcg, trace: &mut String) -> String {
    let costs: Vec<String> = AMBULANCE_MEANS
        .iter()
        .map(|m| format!("{m} = {}", 5 + rng.below(20)))
        .collect();
    let place = format!("d{}", 1 + rng.below(9));
    line(trace, 1, 'E', format!("accident({place})"));
    let mut t = 2;
    for _ in 0..spec.size {
        t += 1 + u64::from(rng.below(3));
        line(trace, t, 'E', "traffic");
        t += 1 + u64::from(rng.below(3));
        line(trace, t, 'E', "ambulance_blocked");
    }
    format!(
        "config:\n  horizon = {}.\n\
         costs:\n  faster_reach: {}.\n\
         expr:\n  accident_P(D) : NEVER late_rescue(D) :::: traffic_P, ambulance_blocked_P \
         ||| alternative_transportation(M), M IN {{{} : faster_reach}}.\n",
        t + 2,
        costs.join(", "),
        AMBULANCE_MEANS.join(",")
    )
}

/// `f` identical expressions over a trace with one reading per tick, so the
/// work per expression and cycle stays constant as `f` grows.
pub fn scaling_workload(f: usize, ticks: u64) -> (String, String) {
    let mut program = String::from("facts:\n  blocked(0).\nexpr:\n");
    for _ in 0..f {
        program.push_str("  ALWAYS level_N(L), L > 0, not blocked(L).\n");
    }
    let mut trace = String::new();
    for t in 0..ticks {
        line(&mut trace, t, 'N', format!("level({})", t + 1));
    }
    (program, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, parse_trace};

    #[test]
    fn lcg_reference_values() {
        let mut r = Lcg::new(0);
        let out: Vec<u32> = (0..4).map(|_| r.next_u32()).collect();
        assert_eq!(out, [167951807, 218396424, 1299921937, 861605236]);
        let mut r = Lcg::new(1);
        let items: Vec<i64> = (0..4).map(|_| r.item()).collect();
        assert_eq!(items, [75, 154, 97, 271]);
        let mut r = Lcg::new(3);
        assert!((0..1000).map(|_| r.item()).all(|x| (1..=300).contains(&x)));
    }

    #[test]
    fn every_scenario_parses() {
        for kind in ScenarioKind::ALL {
            let variants = std::iter::once(Variant::Standard).chain(kind.variants().iter().copied());
            for v in variants {
                let s = generate(&ScenarioSpec::new(kind).variant(v)).unwrap();
                parse_program(&s.program).unwrap_or_else(|e| panic!("{kind:?} {v:?}: {e}"));
                parse_trace(&s.trace).unwrap_or_else(|e| panic!("{kind:?} {v:?}: {e}"));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec::new(ScenarioKind::Queue).seed(7);
        assert_eq!(generate(&spec), generate(&spec));
        assert_ne!(generate(&spec), generate(&spec.clone().seed(8)));
    }

    #[test]
    fn queue_size_five_is_fifo() {
        let s = generate(&ScenarioSpec::new(ScenarioKind::Queue).size(5).seed(1)).unwrap();
        let evs = parse_trace(&s.trace).unwrap();
        let pushes: Vec<String> = evs
            .iter()
            .filter(|e| e.payload.functor() == Some(("push", 2)))
            .map(|e| e.payload.args()[0].to_string())
            .collect();
        let pops: Vec<i64> = evs
            .iter()
            .filter(|e| e.payload.functor() == Some(("pop", 2)))
            .map(|e| e.payload.args()[0].as_int().unwrap())
            .collect();
        assert_eq!(pushes.len(), 5);
        assert_eq!(pops, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_misplaced_options() {
        let bad = ScenarioSpec::new(ScenarioKind::Temperature).variant(Variant::Soft);
        assert!(matches!(generate(&bad), Err(ScenarioError::BadVariant { .. })));
        let bad = ScenarioSpec::new(ScenarioKind::Supply).inject_duplicates(1);
        assert!(generate(&bad).is_err());
        let bad = ScenarioSpec::new(ScenarioKind::Queue).size(4).inject_duplicates(3);
        assert!(generate(&bad).is_err());
    }
}
