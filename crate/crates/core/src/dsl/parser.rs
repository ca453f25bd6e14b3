use std::collections::BTreeSet;

use super::lexer::{lex, Tok, Token};
use super::{Config, ParseError, Program, TraceError};
use crate::events::{split_kind_suffix, Event, EventKind, Tick};
use crate::evolutionary::EvolutionaryExpr;
use crate::kb::{CmpOp, Literal, Term};
use crate::metagate::{MetaRule, Polarity};
use crate::patterns::{PatternElem, PatternSeq, Quantifier};
use crate::temporal::{
    ContextualFormula, IntervalOp, OpKind, Reaction, ReactionElem, ReactiveRule, TickUnit,
    TimeConst, TimeExpr,
};

const SECTIONS: [&str; 6] = ["facts", "meta", "rules", "expr", "costs", "config"];

type PResult<T> = Result<T, ParseError>;

/// An operator waiting for checks that need the whole program.
struct PendingOp {
    op: IntervalOp,
    line: usize,
    column: usize,
    /// Variables a time expression may mention.
    time_vars: BTreeSet<String>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    ops: Vec<PendingOp>,
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, ops: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError {
            line: t.line,
            column: t.column,
            expected: expected.into(),
            found: t.tok.describe(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.error(format!("`{p}`")))
        }
    }

    fn at_section_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if SECTIONS.contains(&s.as_str()))
            && matches!(self.peek_at(1), Tok::Punct(":"))
    }

    fn at_end_of_section(&self) -> bool {
        self.at_section_start() || *self.peek() == Tok::Eof
    }

    // ---- terms ----

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat("-");
        match self.peek() {
            Tok::Int(v) => {
                let v = *v;
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error("integer")),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                if self.is_punct("(") {
                    let args = self.args()?;
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Sym(name))
                }
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Wild(w) => {
                self.bump();
                Ok(Term::Wild(w))
            }
            Tok::Int(_) | Tok::Punct("-") => Ok(Term::Int(self.int()?)),
            _ => Err(self.error("term")),
        }
    }

    fn args(&mut self) -> PResult<Vec<Term>> {
        self.expect("(")?;
        let mut args = vec![self.term()?];
        while self.eat(",") {
            args.push(self.term()?);
        }
        self.expect(")")?;
        Ok(args)
    }

    /// A term headed by a functor or symbol.
    fn atom(&mut self) -> PResult<Term> {
        if !matches!(self.peek(), Tok::Ident(_)) {
            return Err(self.error("atom"));
        }
        self.term()
    }

    fn ground_term(&mut self, what: &str) -> PResult<Term> {
        let tok = self.here().clone();
        let t = self.term()?;
        if !t.is_ground() {
            return Err(ParseError {
                line: tok.line,
                column: tok.column,
                expected: what.to_string(),
                found: format!("`{t}`"),
            });
        }
        Ok(t)
    }

    // ---- literals ----

    fn cmp_op(&self) -> Option<CmpOp> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "<=" | "≤" => CmpOp::Le,
            ">=" | "≥" => CmpOp::Ge,
            "=" => CmpOp::Eq,
            "\\=" | "≠" => CmpOp::Ne,
            _ => return None,
        })
    }

    fn literal(&mut self) -> PResult<Literal> {
        let negated = matches!(self.peek(), Tok::Ident(s) if s == "not");
        if negated {
            self.bump();
            if self.eat("(") {
                let inner = self.literal()?;
                self.expect(")")?;
                return Ok(Literal { negated: true, goal: inner.goal });
            }
        }
        let start = self.here().clone();
        let lhs = self.term()?;
        let goal = match self.cmp_op() {
            Some(op) => {
                self.bump();
                let rhs = self.term()?;
                crate::kb::Goal::Compare(lhs, op, rhs)
            }
            None => {
                if lhs.functor().is_none() {
                    return Err(ParseError {
                        line: start.line,
                        column: start.column,
                        expected: "atom or comparison".into(),
                        found: start.tok.describe(),
                    });
                }
                crate::kb::Goal::Atom(lhs)
            }
        };
        Ok(Literal { negated, goal })
    }

    fn at_choice(&self) -> bool {
        matches!(self.peek(), Tok::Var(_)) && *self.peek_at(1) == Tok::Kw("IN")
    }

    /// `lit, lit, ...`. Stops before `, X IN` so a precondition does not
    /// swallow a following choice.
    fn conj(&mut self) -> PResult<Vec<Literal>> {
        let mut out = vec![self.literal()?];
        while self.is_punct(",") {
            if matches!(self.peek_at(1), Tok::Var(_)) && *self.peek_at(2) == Tok::Kw("IN") {
                break;
            }
            self.bump();
            out.push(self.literal()?);
        }
        Ok(out)
    }

    // ---- times and operators ----

    fn time_const(&mut self) -> PResult<TimeConst> {
        let tok = self.here().clone();
        let v = match self.peek() {
            Tok::Int(v) => *v as u64,
            _ => return Err(self.error("time (ticks or H:MM)")),
        };
        self.bump();
        if self.is_punct(":") && matches!(self.peek_at(1), Tok::Int(_)) {
            self.bump();
            let Tok::Int(m) = self.bump() else { unreachable!() };
            if m >= 60 {
                return Err(ParseError {
                    line: tok.line,
                    column: tok.column,
                    expected: "minutes below 60".into(),
                    found: format!("`{v}:{m}`"),
                });
            }
            return Ok(TimeConst::Clock(v, m as u64));
        }
        Ok(TimeConst::Ticks(v))
    }

    fn time(&mut self) -> PResult<TimeExpr> {
        if let Tok::Var(v) = self.peek().clone() {
            self.bump();
            let off = if self.eat("+") { Some(self.time_const()?) } else { None };
            return Ok(TimeExpr::Var(v, off));
        }
        Ok(TimeExpr::Const(self.time_const()?))
    }

    fn op(&mut self, time_vars: BTreeSet<String>) -> PResult<IntervalOp> {
        let start = self.here().clone();
        let kind = match self.peek() {
            Tok::Kw("ALWAYS") => OpKind::Always,
            Tok::Kw("EVENTUALLY") => OpKind::Eventually,
            Tok::Kw("NEVER") => OpKind::Never,
            _ => return Err(self.error("ALWAYS, EVENTUALLY or NEVER")),
        };
        self.bump();
        let mut op = IntervalOp::new(kind);
        if self.eat("(") {
            if !self.is_punct(";") {
                op.lo = Some(self.time()?);
                if self.eat(",") {
                    op.hi = Some(self.time()?);
                }
            }
            if self.eat(";") {
                op.k = Some(self.time()?);
            }
            self.expect(")")?;
        }
        self.ops.push(PendingOp {
            op: op.clone(),
            line: start.line,
            column: start.column,
            time_vars,
        });
        Ok(op)
    }

    // ---- patterns and reactions ----

    fn quantifier(&mut self) -> Option<Quantifier> {
        let q = match self.peek() {
            Tok::Punct("+") => Quantifier::Plus,
            Tok::Punct("*") => Quantifier::Star,
            _ => return None,
        };
        self.bump();
        Some(q)
    }

    fn pattern_elem(&mut self) -> PResult<PatternElem> {
        let Tok::Ident(name) = self.peek().clone() else {
            return Err(self.error("event pattern"));
        };
        self.bump();
        let mut q = self.quantifier();
        let args = if self.is_punct("(") { self.args()? } else { Vec::new() };
        if q.is_none() {
            q = self.quantifier();
        }
        let mut el = PatternElem::new(Term::compound(name, args), q.unwrap_or(Quantifier::One));
        if self.eat("@") {
            match self.bump() {
                Tok::Var(v) => el = el.with_stamp(v),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("variable after `@`"));
                }
            }
        }
        Ok(el)
    }

    fn patseq(&mut self) -> PResult<PatternSeq> {
        let mut elems = vec![self.pattern_elem()?];
        while self.eat(",") {
            elems.push(self.pattern_elem()?);
        }
        Ok(PatternSeq::new(elems))
    }

    fn reaction_elem(&mut self) -> PResult<ReactionElem> {
        if self.at_choice() {
            let Tok::Var(var) = self.bump() else { unreachable!() };
            self.bump();
            self.expect("{")?;
            let mut options = vec![self.atom()?];
            while self.eat(",") {
                options.push(self.atom()?);
            }
            self.expect(":")?;
            let pref = match self.bump() {
                Tok::Ident(p) => p,
                _ => {
                    self.pos -= 1;
                    return Err(self.error("preference name"));
                }
            };
            self.expect("}")?;
            return Ok(ReactionElem::Choice { var, options, pref });
        }
        let atom = self.atom()?;
        let pre = if self.eat(":<") {
            if self.eat("(") {
                let c = self.conj()?;
                self.expect(")")?;
                c
            } else {
                self.conj()?
            }
        } else {
            Vec::new()
        };
        Ok(ReactionElem::Action { atom, pre })
    }

    fn reaction(&mut self) -> PResult<Reaction> {
        let mut elems = vec![self.reaction_elem()?];
        while self.eat(",") {
            elems.push(self.reaction_elem()?);
        }
        Ok(Reaction::new(elems))
    }

    // ---- sections ----

    fn program(&mut self) -> PResult<Program> {
        let mut p = Program::default();
        let mut seen_config = BTreeSet::new();
        if *self.peek() == Tok::Eof {
            return Err(self.error("a section header"));
        }
        while *self.peek() != Tok::Eof {
            if !self.at_section_start() {
                return Err(self.error(format!("a section header ({}:)", SECTIONS.join(":, "))));
            }
            let Tok::Ident(section) = self.bump() else { unreachable!() };
            self.bump();
            while !self.at_end_of_section() {
                match section.as_str() {
                    "facts" => {
                        let f = self.ground_term("ground fact")?;
                        p.facts.push(f);
                    }
                    "meta" => p.metarules.push(self.metarule()?),
                    "rules" => p.reactive.push(self.reactive()?),
                    "expr" => p.evolutionary.push(self.evo()?),
                    "costs" => self.cost_row(&mut p)?,
                    "config" => self.config_entry(&mut p.config, &mut seen_config)?,
                    _ => unreachable!(),
                }
                self.expect(".")?;
            }
        }
        Ok(p)
    }

    fn metarule(&mut self) -> PResult<MetaRule> {
        let polarity = match self.peek() {
            Tok::Ident(s) if s == "solve" => Polarity::Solve,
            Tok::Ident(s) if s == "solve_not" => Polarity::SolveNot,
            _ => return Err(self.error("`solve` or `solve_not`")),
        };
        self.bump();
        self.expect("(")?;
        let head = self.atom()?;
        self.expect(")")?;
        let body = if self.eat(":-") { self.conj()? } else { Vec::new() };
        Ok(MetaRule { polarity, head, body })
    }

    fn formula(&mut self, time_vars: BTreeSet<String>) -> PResult<ContextualFormula> {
        let op = self.op(time_vars)?;
        let phi = self.conj()?;
        let chi = if self.eat("::") { self.conj()? } else { Vec::new() };
        Ok(ContextualFormula { op, phi, chi })
    }

    fn reactive(&mut self) -> PResult<ReactiveRule> {
        let monitor = self.formula(BTreeSet::new())?;
        if *self.peek() != Tok::Kw("DIV") {
            return Err(self.error("`DIV`"));
        }
        self.bump();
        let reaction = self.reaction()?;
        Ok(ReactiveRule { monitor, reaction })
    }

    fn evo(&mut self) -> PResult<EvolutionaryExpr> {
        let pre = if matches!(self.peek(), Tok::Kw("ALWAYS" | "EVENTUALLY" | "NEVER")) {
            PatternSeq::default()
        } else {
            let seq = self.patseq()?;
            self.expect(":")?;
            seq
        };
        let tau = self.formula(pre.vars())?;
        let future = if self.eat(":::") { self.patseq()? } else { PatternSeq::default() };
        let breaking = if self.eat("::::") { self.patseq()? } else { PatternSeq::default() };
        let repair = if *self.peek() == Tok::Kw("DIV") {
            self.bump();
            Some(self.reaction()?)
        } else {
            None
        };
        let eta1 = if self.eat("|") { Some(self.atom()?) } else { None };
        let eta2 = if self.eat("||") { Some(self.atom()?) } else { None };
        let eta3 = if self.eat("|||") { Some(self.reaction()?) } else { None };
        Ok(EvolutionaryExpr { pre, tau, future, breaking, repair, eta1, eta2, eta3 })
    }

    fn cost_row(&mut self, p: &mut Program) -> PResult<()> {
        let start = self.here().clone();
        let Tok::Ident(pref) = self.bump() else {
            self.pos -= 1;
            return Err(self.error("preference name"));
        };
        if p.costs.iter().any(|(k, _)| *k == pref) {
            return Err(ParseError {
                line: start.line,
                column: start.column,
                expected: "a preference not already listed".into(),
                found: format!("`{pref}`"),
            });
        }
        self.expect(":")?;
        loop {
            let opt = self.ground_term("ground option")?;
            self.expect("=")?;
            let cost = self.int()?;
            p.costs.insert(pref.clone(), opt, cost);
            if !self.eat(",") {
                break;
            }
        }
        Ok(())
    }

    fn config_entry(&mut self, c: &mut Config, seen: &mut BTreeSet<String>) -> PResult<()> {
        let start = self.here().clone();
        let Tok::Ident(key) = self.bump() else {
            self.pos -= 1;
            return Err(self.error("configuration key"));
        };
        let mut full_key = key.clone();
        let mut retention_functor = None;
        if key == "retention" {
            self.expect("(")?;
            match self.bump() {
                Tok::Ident(f) => {
                    full_key = format!("retention({f})");
                    retention_functor = Some(f);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error("functor name"));
                }
            }
            self.expect(")")?;
        }
        if !seen.insert(full_key.clone()) {
            return Err(ParseError {
                line: start.line,
                column: start.column,
                expected: "a key not already set".into(),
                found: format!("`{full_key}`"),
            });
        }
        self.expect("=")?;
        let positive = |p: &mut Parser| -> PResult<u64> {
            let t = p.here().clone();
            let v = p.int()?;
            if v < 0 {
                return Err(ParseError {
                    line: t.line,
                    column: t.column,
                    expected: "non-negative integer".into(),
                    found: format!("`{v}`"),
                });
            }
            Ok(v as u64)
        };
        match key.as_str() {
            "default_frequency" => {
                let t = self.here().clone();
                let k = positive(self)?;
                if k == 0 {
                    return Err(ParseError {
                        line: t.line,
                        column: t.column,
                        expected: "frequency of at least 1".into(),
                        found: "`0`".into(),
                    });
                }
                c.default_frequency = Some(k);
            }
            "horizon" => c.horizon = Some(positive(self)?),
            "tick" => {
                let unit = match self.peek() {
                    Tok::Ident(s) => TickUnit::from_name(s),
                    _ => None,
                };
                match unit {
                    Some(u) => {
                        self.bump();
                        c.tick = Some(u);
                    }
                    None => return Err(self.error("`second`, `minute` or `hour`")),
                }
            }
            "retention" => {
                let n = positive(self)? as usize;
                c.retention.push((retention_functor.expect("set above"), n));
            }
            _ => {
                return Err(ParseError {
                    line: start.line,
                    column: start.column,
                    expected: "default_frequency, tick, horizon or retention(...)".into(),
                    found: format!("`{key}`"),
                })
            }
        }
        Ok(())
    }

    /// Interval checks that need the tick unit, which may be set anywhere.
    fn check_ops(&self, unit: TickUnit) -> PResult<()> {
        for p in &self.ops {
            let err = |expected: &str| ParseError {
                line: p.line,
                column: p.column,
                expected: expected.to_string(),
                found: format!("`{}`", p.op),
            };
            for t in [&p.op.lo, &p.op.hi, &p.op.k].into_iter().flatten() {
                if let TimeExpr::Var(v, _) = t {
                    if !p.time_vars.contains(v) {
                        return Err(err("time variables bound by the precondition"));
                    }
                }
            }
            if let Some(TimeExpr::Const(k)) = &p.op.k {
                if k.ticks(unit) == 0 {
                    return Err(err("frequency of at least 1"));
                }
            }
            if let (Some(lo), Some(hi)) = (&p.op.lo, &p.op.hi) {
                let ordered = match (lo, hi) {
                    (TimeExpr::Const(a), TimeExpr::Const(b)) => a.ticks(unit) <= b.ticks(unit),
                    (TimeExpr::Var(x, a), TimeExpr::Var(y, b)) if x == y => {
                        a.map_or(0, |c| c.ticks(unit)) <= b.map_or(0, |c| c.ticks(unit))
                    }
                    _ => true,
                };
                if !ordered {
                    return Err(err("lower bound not above upper bound"));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(lex(text)?);
    let prog = p.program()?;
    p.check_ops(prog.config.tick_unit())?;
    Ok(prog)
}

/// A single term, such as a fact or a goal typed on the command line.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(lex(text)?);
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("end of input"));
    }
    Ok(t)
}

/// Parses `<timestamp> <kind letter> <term>` lines; `#` starts a comment.
pub fn parse_trace(text: &str) -> Result<Vec<Event>, TraceError> {
    let mut out: Vec<Event> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks = lex(raw).map_err(|mut e| {
            e.line = line_no;
            e
        })?;
        let mut p = Parser::new(
            toks.into_iter().map(|t| Token { line: line_no, ..t }).collect(),
        );
        if *p.peek() == Tok::Eof {
            continue;
        }
        let ts = match p.peek() {
            Tok::Int(v) => *v as Tick,
            _ => return Err(p.error("timestamp").into()),
        };
        p.bump();
        let kind = match p.peek() {
            Tok::Var(s) if s.len() == 1 => {
                EventKind::from_letter(s.chars().next().unwrap_or(' '))
            }
            _ => None,
        };
        let Some(kind) = kind else {
            return Err(p.error("event kind letter (E, I, N, P, A or G)").into());
        };
        p.bump();
        let payload = p.ground_term("ground event term")?;
        if payload.functor().is_some_and(|(f, _)| split_kind_suffix(f).is_some()) {
            return Err(ParseError {
                line: line_no,
                column: p.toks[2].column,
                expected: "event term without a kind suffix".into(),
                found: format!("`{payload}`"),
            }
            .into());
        }
        if *p.peek() != Tok::Eof {
            return Err(p.error("end of line").into());
        }
        if let Some(last) = out.last() {
            if ts < last.timestamp {
                return Err(TraceError::TimestampRegression {
                    line: line_no,
                    last: last.timestamp,
                    got: ts,
                });
            }
        }
        out.push(Event::new(ts, kind, payload));
    }
    Ok(out)
}
