//! Event-sequence patterns in a small regular-expression style: each element
//! matches one event, optionally repeated with `+` or `*`.
//!
//! Matching only looks at *relevant* events, those that could match some
//! element of the sequence; everything else in the log is skipped. The
//! matcher simulates the pattern's automaton over a set of configurations so
//! repetitions never need to guess how many events to absorb.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexSet;

use crate::events::{split_kind_suffix, Event, History, KindFilter, LoggedEvent, Tick};
use crate::kb::{match_ground, Binding, FactBase, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    One,
    Plus,
    Star,
}

/// One pattern element. `template` carries the functor without its kind
/// suffix; `filter` holds the kind the suffix selected.
///
/// An unsuffixed unary element `f(X)` also matches any event whose payload
/// `p` is classified by a stored fact `f(p)`, binding `X` to `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatternElem {
    pub filter: KindFilter,
    pub template: Term,
    pub quantifier: Quantifier,
    /// Variable bound to the timestamp of the matched event (`@T`).
    pub stamp: Option<String>,
}

impl PatternElem {
    /// Builds an element from a term whose functor may carry a kind suffix.
    pub fn new(term: Term, quantifier: Quantifier) -> Self {
        let (filter, template) = match term.functor().and_then(|(f, _)| split_kind_suffix(f)) {
            Some((base, filter)) => (filter, term.with_functor(base)),
            None => (KindFilter::Any, term),
        };
        PatternElem { filter, template, quantifier, stamp: None }
    }

    pub fn with_stamp(mut self, var: impl Into<String>) -> Self {
        self.stamp = Some(var.into());
        self
    }

    /// The element's term as written, suffix included.
    pub fn written_term(&self) -> Term {
        match self.template.functor() {
            Some((f, _)) if self.filter != KindFilter::Any => {
                self.template.with_functor(&format!("{f}{}", self.filter.suffix()))
            }
            _ => self.template.clone(),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut v = self.template.vars();
        if let Some(s) = &self.stamp {
            v.insert(s.clone());
        }
        v
    }

    fn classifies(&self, event: &Event, kb: &FactBase) -> bool {
        match self.template.functor() {
            Some((f, 1)) if self.filter == KindFilter::Any => {
                kb.contains(&Term::compound(f, vec![event.payload.clone()]))
            }
            _ => false,
        }
    }

    fn direct(&self, event: &Event) -> bool {
        self.filter.accepts(event.kind) && event.payload.functor() == self.template.functor()
    }

    /// Could this event match the element under some binding?
    pub fn relevant(&self, event: &Event, kb: &FactBase) -> bool {
        self.direct(event) || self.classifies(event, kb)
    }

    /// Matches one event, extending `b`. Leaves `b` untouched on failure.
    pub fn try_match(&self, event: &Event, kb: &FactBase, b: &mut Binding) -> bool {
        let mut nb = b.clone();
        let ok = if self.direct(event) {
            match_ground(&self.template, &event.payload, &mut nb)
        } else if self.classifies(event, kb) {
            match_ground(&self.template.args()[0], &event.payload, &mut nb)
        } else {
            false
        };
        if !ok {
            return false;
        }
        if let Some(v) = &self.stamp {
            let ts = Term::int(event.timestamp as i64);
            match nb.get(v) {
                Some(bound) if *bound != ts => return false,
                Some(_) => {}
                None => nb.bind(v.clone(), ts),
            }
        }
        *b = nb;
        true
    }
}

impl fmt::Display for PatternElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.written_term();
        let q = match self.quantifier {
            Quantifier::One => "",
            Quantifier::Plus => "+",
            Quantifier::Star => "*",
        };
        match &t {
            Term::Compound(name, args) => {
                write!(f, "{name}{q}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")?;
            }
            other => write!(f, "{other}{q}")?,
        }
        if let Some(s) = &self.stamp {
            write!(f, "@{s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PatternSeq {
    pub elems: Vec<PatternElem>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchResult {
    /// No relevant event occurred.
    NoEvents,
    /// The relevant events form a proper prefix; `consumed` elements are satisfied.
    Prefix { consumed: usize, binding: Binding },
    /// The relevant events match the whole sequence.
    Complete { binding: Binding },
    /// The relevant event at position `at` (among relevant events) broke the order.
    Mismatch { at: usize },
}

impl MatchResult {
    pub fn is_triggered(&self) -> bool {
        matches!(self, MatchResult::Prefix { .. } | MatchResult::Complete { .. })
    }

    pub fn binding(&self) -> Option<&Binding> {
        match self {
            MatchResult::Prefix { binding, .. } | MatchResult::Complete { binding } => Some(binding),
            _ => None,
        }
    }
}

/// A match result plus the log position of the last relevant event looked at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixMatch {
    pub result: MatchResult,
    pub last_relevant: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Config {
    elem: usize,
    entered: bool,
    binding: Binding,
}

impl PatternSeq {
    pub fn new(elems: Vec<PatternElem>) -> Self {
        PatternSeq { elems }
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.elems.iter().flat_map(PatternElem::vars).collect()
    }

    pub fn relevant(&self, event: &Event, kb: &FactBase) -> bool {
        self.elems.iter().any(|e| e.relevant(event, kb))
    }

    /// Variables refreshed on every repetition of element `i`: those that
    /// occur in no other element, are not pre-bound and are not `shared`.
    fn locals(&self, seed: &Binding, shared: &BTreeSet<String>) -> Vec<BTreeSet<String>> {
        let per: Vec<BTreeSet<String>> = self.elems.iter().map(PatternElem::vars).collect();
        per.iter()
            .enumerate()
            .map(|(i, vars)| {
                vars.iter()
                    .filter(|v| {
                        !seed.contains(v)
                            && !shared.contains(*v)
                            && per.iter().enumerate().all(|(j, o)| j == i || !o.contains(*v))
                    })
                    .cloned()
                    .collect()
            })
            .collect()
    }

    fn close(&self, cfg: Config, out: &mut IndexSet<Config>) {
        let mut cur = cfg;
        loop {
            let skippable = self.elems.get(cur.elem).is_some_and(|el| match el.quantifier {
                Quantifier::Star => true,
                Quantifier::Plus => cur.entered,
                Quantifier::One => false,
            });
            let next = Config { elem: cur.elem + 1, entered: false, binding: cur.binding.clone() };
            out.insert(cur);
            if !skippable {
                break;
            }
            cur = next;
        }
    }

    /// Matches against the events at or after `since`, with no prior binding.
    pub fn match_prefix(&self, history: &History, kb: &FactBase, since: Tick) -> MatchResult {
        self.match_events(history.since(since), kb, &Binding::new(), &BTreeSet::new())
            .result
    }

    /// Core matcher over an explicit event slice.
    ///
    /// `seed` constrains the match. Variables in `shared` stay consistent
    /// across repetitions even when only one element mentions them.
    pub fn match_events(
        &self,
        events: &[LoggedEvent],
        kb: &FactBase,
        seed: &Binding,
        shared: &BTreeSet<String>,
    ) -> PrefixMatch {
        let locals = self.locals(seed, shared);
        let mut configs = IndexSet::new();
        self.close(Config { elem: 0, entered: false, binding: seed.clone() }, &mut configs);
        let n = self.elems.len();
        let mut seen = 0usize;
        let mut last_relevant = None;
        for (pos, logged) in events.iter().enumerate() {
            let ev = &logged.event;
            if !self.relevant(ev, kb) {
                continue;
            }
            last_relevant = Some(pos);
            let mut next = IndexSet::new();
            for cfg in &configs {
                if cfg.elem >= n {
                    continue;
                }
                let el = &self.elems[cfg.elem];
                let mut b = cfg.binding.clone();
                if cfg.entered {
                    for v in &locals[cfg.elem] {
                        b.remove(v);
                    }
                }
                if !el.try_match(ev, kb, &mut b) {
                    continue;
                }
                let moved = match el.quantifier {
                    Quantifier::One => Config { elem: cfg.elem + 1, entered: false, binding: b },
                    _ => Config { elem: cfg.elem, entered: true, binding: b },
                };
                self.close(moved, &mut next);
            }
            if next.is_empty() {
                return PrefixMatch { result: MatchResult::Mismatch { at: seen }, last_relevant };
            }
            configs = next;
            seen += 1;
        }
        let result = if seen == 0 {
            MatchResult::NoEvents
        } else if let Some(done) = configs.iter().find(|c| c.elem == n) {
            MatchResult::Complete { binding: done.binding.clone() }
        } else {
            let best = configs
                .iter()
                .filter(|c| !c.entered)
                .max_by(|a, b| a.elem.cmp(&b.elem).then(std::cmp::Ordering::Greater))
                .or_else(|| configs.first())
                .expect("configs non-empty after a relevant event");
            MatchResult::Prefix { consumed: best.elem, binding: best.binding.clone() }
        };
        PrefixMatch { result, last_relevant }
    }

    /// The earliest event at or after `since` matching any element.
    pub fn occurs_any(
        &self,
        history: &History,
        kb: &FactBase,
        since: Tick,
    ) -> Option<(LoggedEvent, Binding)> {
        self.occurrences(history.since(since), kb, &Binding::new())
            .next()
            .map(|(e, b)| (e.clone(), b))
    }

    /// Every event in `events` matching some element under `seed`, in log order.
    pub fn occurrences<'a>(
        &'a self,
        events: &'a [LoggedEvent],
        kb: &'a FactBase,
        seed: &'a Binding,
    ) -> impl Iterator<Item = (&'a LoggedEvent, Binding)> + 'a {
        events.iter().filter_map(move |logged| {
            self.elems.iter().find_map(|el| {
                let mut b = seed.clone();
                el.try_match(&logged.event, kb, &mut b).then_some((logged, b))
            })
        })
    }
}

impl fmt::Display for PatternSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elems.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}
