//! Random well-formed programs built as syntax trees, so a round trip can be
//! checked against the tree itself rather than against the text.

use ailtl_core::kb::{CmpOp, Literal, Term};
use ailtl_core::metagate::{MetaRule, Polarity};
use ailtl_core::patterns::{PatternElem, PatternSeq, Quantifier};
use ailtl_core::scenarios::Lcg;
use ailtl_core::temporal::{
    ContextualFormula, IntervalOp, OpKind, Reaction, ReactionElem, ReactiveRule, TickUnit,
    TimeConst, TimeExpr,
};
use ailtl_core::{EvolutionaryExpr, Program};

const FUNCTORS: [&str; 8] = ["p", "q", "level", "item", "go", "alarm", "in_queue", "reading"];
const SYMS: [&str; 6] = ["a", "b", "q1", "r", "solar", "ext"];
const VARS: [&str; 5] = ["X", "Y", "Z", "Req", "Val"];
const SUFFIXES: [&str; 5] = ["_P", "_E", "_A", "_N", "_G"];
const PREFS: [&str; 3] = ["cheap", "fast", "less_expensive"];
const OPTIONS: [&str; 4] = ["boat", "drone", "gas", "heli"];
const CMPS: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];

pub struct Gen {
    rng: Lcg,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: Lcg::new(seed) }
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.below(n as u32) as u64
    }

    pub fn chance(&mut self, pct: u64) -> bool {
        self.below(100) < pct
    }

    pub fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.below(xs.len() as u64) as usize]
    }

    fn int(&mut self) -> Term {
        Term::int(self.below(101) as i64 - 50)
    }

    pub fn ground(&mut self, depth: u32) -> Term {
        match self.below(if depth == 0 { 2 } else { 3 }) {
            0 => self.int(),
            1 => Term::sym(self.pick(&SYMS)),
            _ => {
                let n = 1 + self.below(3);
                let args = (0..n).map(|_| self.ground(depth - 1)).collect();
                Term::compound(self.pick(&FUNCTORS), args)
            }
        }
    }

    fn arg(&mut self, ground: bool) -> Term {
        if ground {
            return self.ground(1);
        }
        match self.below(5) {
            0 | 1 => Term::var(self.pick(&VARS)),
            2 => Term::wild("_"),
            _ => self.ground(1),
        }
    }

    pub fn atom(&mut self, ground: bool) -> Term {
        let n = self.below(4);
        let args = (0..n).map(|_| self.arg(ground)).collect();
        Term::compound(self.pick(&FUNCTORS), args)
    }

    fn operand(&mut self) -> Term {
        if self.chance(50) {
            Term::var(self.pick(&VARS))
        } else {
            self.int()
        }
    }

    fn literal(&mut self) -> Literal {
        match self.below(10) {
            0..=5 => Literal::atom(self.atom(false)),
            6 | 7 => Literal::not(self.atom(false)),
            _ => {
                let op = self.pick(&CMPS);
                Literal::cmp(self.operand(), op, self.operand())
            }
        }
    }

    pub fn conj(&mut self, max: u64) -> Vec<Literal> {
        let n = 1 + self.below(max);
        (0..n).map(|_| self.literal()).collect()
    }

    fn time_pair(&mut self) -> (TimeConst, TimeConst) {
        if self.chance(50) {
            let a = self.below(500);
            (TimeConst::Ticks(a), TimeConst::Ticks(a + self.below(500)))
        } else {
            let (h, m) = (self.below(24), self.below(60));
            let h2 = h + self.below(24 - h);
            let m2 = if h2 == h { m + self.below(60 - m) } else { self.below(60) };
            (TimeConst::Clock(h, m), TimeConst::Clock(h2, m2))
        }
    }

    /// An operator whose bounds are ordered under every tick unit. `time_var`
    /// may appear in the bounds when given.
    pub fn interval(&mut self, time_var: Option<&str>) -> IntervalOp {
        let op = self.pick(&[OpKind::Eventually, OpKind::Always, OpKind::Never]);
        let mut iv = IntervalOp::new(op);
        match (self.below(4), time_var) {
            (0, _) => {}
            (1, _) => iv.lo = Some(TimeExpr::Const(self.time_pair().0)),
            (2, Some(v)) => {
                let a = self.below(100);
                let b = a + self.below(100);
                let lo_off = (a > 0).then_some(TimeConst::Ticks(a));
                iv.lo = Some(TimeExpr::Var(v.to_string(), lo_off));
                iv.hi = Some(TimeExpr::Var(v.to_string(), Some(TimeConst::Ticks(b))));
            }
            _ => {
                let (a, b) = self.time_pair();
                iv.lo = Some(TimeExpr::Const(a));
                iv.hi = Some(TimeExpr::Const(b));
            }
        }
        if self.chance(40) {
            iv.k = Some(TimeExpr::ticks(1 + self.below(30)));
        }
        iv
    }

    fn formula(&mut self, time_var: Option<&str>) -> ContextualFormula {
        let f = ContextualFormula::new(self.interval(time_var), self.conj(3));
        if self.chance(30) {
            f.with_context(self.conj(2))
        } else {
            f
        }
    }

    fn choice(&mut self, var: &str) -> ReactionElem {
        let mut opts = OPTIONS.to_vec();
        let n = 1 + self.below(opts.len() as u64) as usize;
        let mut options = Vec::new();
        for _ in 0..n {
            let i = self.below(opts.len() as u64) as usize;
            options.push(Term::sym(opts.remove(i)));
        }
        ReactionElem::Choice { var: var.to_string(), options, pref: self.pick(&PREFS).to_string() }
    }

    pub fn reaction(&mut self) -> Reaction {
        let n = 1 + self.below(3);
        let elems = (0..n)
            .map(|_| {
                if self.chance(20) {
                    let v = self.pick(&VARS);
                    self.choice(v)
                } else {
                    let pre = if self.chance(30) { self.conj(2) } else { Vec::new() };
                    ReactionElem::Action { atom: self.atom(false), pre }
                }
            })
            .collect();
        Reaction::new(elems)
    }

    fn pattern(&mut self, stamp: Option<&str>) -> PatternSeq {
        let n = 1 + self.below(3);
        let mut elems: Vec<PatternElem> = (0..n)
            .map(|_| {
                let mut t = self.atom(false);
                if self.chance(60) {
                    let (f, _) = t.functor().expect("atoms have functors");
                    let f = format!("{f}{}", self.pick(&SUFFIXES));
                    t = t.with_functor(&f);
                }
                let q = self.pick(&[Quantifier::One, Quantifier::Plus, Quantifier::Star]);
                PatternElem::new(t, q)
            })
            .collect();
        if let Some(v) = stamp {
            elems[0] = elems[0].clone().with_stamp(v);
        }
        PatternSeq { elems }
    }

    pub fn metarule(&mut self) -> MetaRule {
        let pol = self.pick(&[Polarity::Solve, Polarity::SolveNot]);
        let body = if self.chance(20) { Vec::new() } else { self.conj(3) };
        MetaRule::new(pol, self.atom(false), body)
    }

    pub fn evolutionary(&mut self) -> EvolutionaryExpr {
        let with_pre = self.chance(70);
        let stamp = (with_pre && self.chance(40)).then_some("T");
        let pre = if with_pre { self.pattern(stamp) } else { PatternSeq::default() };
        let mut x = EvolutionaryExpr::new(self.formula(stamp));
        x.pre = pre;
        if self.chance(40) {
            x.future = self.pattern(None);
        }
        if self.chance(30) {
            x.breaking = self.pattern(None);
        }
        if self.chance(50) {
            x.repair = Some(self.reaction());
        }
        if self.chance(30) {
            x.eta1 = Some(self.atom(false));
        }
        if self.chance(30) {
            x.eta2 = Some(self.atom(false));
        }
        if self.chance(20) {
            x.eta3 = Some(self.reaction());
        }
        x
    }

    pub fn program(&mut self) -> Program {
        let mut p = Program::default();
        for _ in 0..self.below(5) {
            p.facts.push(self.atom(true));
        }
        for _ in 0..self.below(4) {
            p.metarules.push(self.metarule());
        }
        for _ in 0..self.below(3) {
            let monitor = self.formula(None);
            p.reactive.push(ReactiveRule { monitor, reaction: self.reaction() });
        }
        for _ in 0..self.below(4) {
            p.evolutionary.push(self.evolutionary());
        }
        let rows = self.below(3) as usize;
        for pref in &PREFS[..rows] {
            for opt in &OPTIONS[..1 + self.below(4) as usize] {
                let cost = self.below(40) as i64 - 10;
                p.costs.insert(*pref, Term::sym(*opt), cost);
            }
        }
        if self.chance(50) {
            p.config.default_frequency = Some(1 + self.below(10));
        }
        if self.chance(40) {
            p.config.tick =
                Some(self.pick(&[TickUnit::Second, TickUnit::Minute, TickUnit::Hour]));
        }
        if self.chance(30) {
            p.config.horizon = Some(self.below(2000));
        }
        if self.chance(30) {
            p.config.retention.push(("level".into(), 1 + self.below(20) as usize));
        }
        p
    }
}
