//! Agent history: the event log, the current past events `P`, the archive of
//! superseded versions `PNV`, and the timed state sequence.
//!
//! Trace files hold one event per line, `<timestamp> <KIND-LETTER> <term>`,
//! for example `14 A push(37,q1)`. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::kb::Term;

/// Engine-local time in ticks. One tick is one minute unless configured otherwise.
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    External,
    Internal,
    Present,
    Past,
    Action,
    Goal,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::External,
        EventKind::Internal,
        EventKind::Present,
        EventKind::Past,
        EventKind::Action,
        EventKind::Goal,
    ];

    pub fn letter(self) -> char {
        match self {
            EventKind::External => 'E',
            EventKind::Internal => 'I',
            EventKind::Present => 'N',
            EventKind::Past => 'P',
            EventKind::Action => 'A',
            EventKind::Goal => 'G',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.letter() == c)
    }

    /// Whether a recorded event of this kind counts as a past event (`_P`).
    pub fn is_past(self) -> bool {
        matches!(
            self,
            EventKind::External | EventKind::Internal | EventKind::Past | EventKind::Action
        )
    }
}

/// Which recorded events a `_X`-suffixed functor refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KindFilter {
    /// `_E`, `_I`, `_N`, `_A`, `_G`.
    Exact(EventKind),
    /// `_P`: external, internal, past and action events once recorded.
    Past,
    /// No suffix.
    Any,
}

impl KindFilter {
    pub fn accepts(self, kind: EventKind) -> bool {
        match self {
            KindFilter::Exact(k) => k == kind,
            KindFilter::Past => kind.is_past(),
            KindFilter::Any => true,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            KindFilter::Exact(EventKind::External) => "_E",
            KindFilter::Exact(EventKind::Internal) => "_I",
            KindFilter::Exact(EventKind::Present) => "_N",
            KindFilter::Exact(EventKind::Past) | KindFilter::Past => "_P",
            KindFilter::Exact(EventKind::Action) => "_A",
            KindFilter::Exact(EventKind::Goal) => "_G",
            KindFilter::Any => "",
        }
    }
}

/// Splits `temperature_N` into (`temperature`, Present).
pub fn split_kind_suffix(functor: &str) -> Option<(&str, KindFilter)> {
    let (base, suffix) = functor.rsplit_once('_')?;
    if base.is_empty() {
        return None;
    }
    let filter = match suffix {
        "P" => KindFilter::Past,
        "E" => KindFilter::Exact(EventKind::External),
        "I" => KindFilter::Exact(EventKind::Internal),
        "N" => KindFilter::Exact(EventKind::Present),
        "A" => KindFilter::Exact(EventKind::Action),
        "G" => KindFilter::Exact(EventKind::Goal),
        _ => return None,
    };
    Some((base, filter))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub payload: Term,
    pub timestamp: Tick,
}

impl Event {
    pub fn new(timestamp: Tick, kind: EventKind, payload: Term) -> Self {
        Event { kind, payload, timestamp }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.timestamp, self.kind.letter(), self.payload)
    }
}

/// An event plus its arrival number, which breaks timestamp ties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoggedEvent {
    pub seq: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventsError {
    #[error("timestamp {got} precedes last recorded timestamp {last}")]
    TimestampRegression { last: Tick, got: Tick },
    #[error("event payload is not ground: {0}")]
    NonGroundPayload(Term),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct HistoryKey {
    kind: EventKind,
    functor: String,
    arity: usize,
}

#[derive(Clone, Debug, Default)]
pub struct History {
    current: IndexMap<HistoryKey, LoggedEvent>,
    archive: Vec<LoggedEvent>,
    log: Vec<LoggedEvent>,
    retention: BTreeMap<String, usize>,
    evicted: usize,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keep at most `limit` superseded versions of `functor` in `PNV`.
    pub fn with_retention(mut self, functor: impl Into<String>, limit: usize) -> Self {
        self.retention.insert(functor.into(), limit);
        self
    }

    pub fn record(&mut self, event: Event) -> Result<&LoggedEvent, EventsError> {
        if let Some(last) = self.log.last() {
            if event.timestamp < last.event.timestamp {
                return Err(EventsError::TimestampRegression {
                    last: last.event.timestamp,
                    got: event.timestamp,
                });
            }
        }
        if !event.payload.is_ground() {
            return Err(EventsError::NonGroundPayload(event.payload));
        }
        let (functor, arity) = event
            .payload
            .functor()
            .map(|(f, a)| (f.to_string(), a))
            .unwrap_or_else(|| (event.payload.to_string(), 0));
        let key = HistoryKey { kind: event.kind, functor: functor.clone(), arity };
        let logged = LoggedEvent { seq: self.log.len() as u64, event };
        if let Some(old) = self.current.insert(key, logged.clone()) {
            self.archive.push(old);
            self.enforce_retention(&functor);
        }
        self.log.push(logged);
        Ok(self.log.last().expect("just pushed"))
    }

    fn enforce_retention(&mut self, functor: &str) {
        let Some(&limit) = self.retention.get(functor) else {
            return;
        };
        let held = self
            .archive
            .iter()
            .filter(|e| e.event.payload.functor().map(|f| f.0) == Some(functor))
            .count();
        if held > limit {
            let pos = self
                .archive
                .iter()
                .position(|e| e.event.payload.functor().map(|f| f.0) == Some(functor))
                .expect("counted above");
            self.archive.remove(pos);
            self.evicted += 1;
        }
    }

    /// The most recent event of exactly this kind and functor.
    pub fn latest(&self, kind: EventKind, functor: &str, arity: usize) -> Option<&LoggedEvent> {
        self.current.get(&HistoryKey { kind, functor: functor.to_string(), arity })
    }

    /// The most recent event accepted by `filter`.
    pub fn latest_matching(
        &self,
        filter: KindFilter,
        functor: &str,
        arity: usize,
    ) -> Option<&LoggedEvent> {
        match filter {
            KindFilter::Exact(k) => self.latest(k, functor, arity),
            _ => EventKind::ALL
                .into_iter()
                .filter(|k| filter.accepts(*k))
                .filter_map(|k| self.latest(k, functor, arity))
                .max_by_key(|e| e.seq),
        }
    }

    /// `P`: current versions, in first-recorded order of their keys.
    pub fn current(&self) -> impl Iterator<Item = &LoggedEvent> {
        self.current.values()
    }

    /// `PNV`: superseded versions, oldest first.
    pub fn archive(&self) -> &[LoggedEvent] {
        &self.archive
    }

    pub fn log(&self) -> &[LoggedEvent] {
        &self.log
    }

    /// Logged events with timestamp at or after `since`.
    pub fn since(&self, since: Tick) -> &[LoggedEvent] {
        let start = self.log.partition_point(|e| e.event.timestamp < since);
        &self.log[start..]
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn evicted(&self) -> usize {
        self.evicted
    }

    pub fn last_timestamp(&self) -> Option<Tick> {
        self.log.last().map(|e| e.event.timestamp)
    }
}

/// Identifies the content of an agent snapshot without copying it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SnapshotStamp {
    pub history_len: usize,
    pub kb_version: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimedState {
    pub index: usize,
    pub time: Tick,
    pub stamp: SnapshotStamp,
}

/// A monotonic timed state sequence: a new state is appended only when the
/// snapshot has changed.
#[derive(Clone, Debug)]
pub struct StateSeq {
    states: Vec<TimedState>,
}

impl StateSeq {
    pub fn new(initial: SnapshotStamp) -> Self {
        StateSeq { states: vec![TimedState { index: 0, time: 0, stamp: initial }] }
    }

    pub fn current(&self) -> &TimedState {
        self.states.last().expect("sequence is never empty")
    }

    /// Appends state `i+1` at `now` if `stamp` differs from the current one.
    /// Returns the new state, or `None` when nothing changed.
    pub fn advance(
        &mut self,
        now: Tick,
        stamp: SnapshotStamp,
    ) -> Result<Option<&TimedState>, EventsError> {
        let cur = *self.current();
        if now < cur.time {
            return Err(EventsError::TimestampRegression { last: cur.time, got: now });
        }
        if stamp == cur.stamp {
            return Ok(None);
        }
        self.states.push(TimedState { index: cur.index + 1, time: now, stamp });
        Ok(self.states.last())
    }

    pub fn states(&self) -> &[TimedState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
