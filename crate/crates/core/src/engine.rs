//! Deterministic discrete-event scheduler.
//!
//! Events are ordered by `(fire_time, sequence)`. The sequence counter is
//! assigned at scheduling time, so events sharing a timestamp run in the
//! order they were scheduled. Time has a fixed 1 ns resolution.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Sub};

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Simulation time (or a duration) with nanosecond resolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    /// Converts seconds to the nearest nanosecond.
    pub fn from_secs(secs: f64) -> Result<Self, EngineError> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(EngineError::InvalidTime(secs));
        }
        let ns = (secs * 1e9).round();
        if ns >= u64::MAX as f64 {
            return Err(EngineError::InvalidTime(secs));
        }
        Ok(SimTime(ns as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    /// Smallest multiple of `period` that is `>= self`.
    pub fn ceil_to(self, period: SimTime) -> SimTime {
        assert!(period.0 > 0, "period must be positive");
        SimTime(self.0.div_ceil(period.0) * period.0)
    }

    /// `self / other` as a real ratio.
    pub fn ratio(self, other: SimTime) -> f64 {
        self.0 as f64 / other.0 as f64
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("simulation time overflow"))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("negative simulation duration"),
        )
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.as_secs())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("causality violation: event at {at} scheduled while clock is at {now}")]
    Causality { at: SimTime, now: SimTime },
    #[error("invalid time value {0} s")]
    InvalidTime(f64),
}

/// Handle returned by [`Scheduler::schedule`]; used for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: P,
}

struct Entry<P> {
    key: (SimTime, u64),
    payload: P,
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<P> Eq for Entry<P> {}
impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

/// Counts used to audit that no scheduled event goes missing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventAudit {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
    pub pending: u64,
}

impl EventAudit {
    pub fn is_balanced(&self) -> bool {
        self.scheduled == self.processed + self.cancelled + self.pending
    }
}

/// Single-queue event scheduler with an optional running trace digest.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<P>>>,
    live: HashSet<u64>,
    processed: u64,
    cancelled: u64,
    trace: Option<Sha256>,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            processed: 0,
            cancelled: 0,
            trace: None,
        }
    }

    /// Enables hashing of every processed `(time, sequence, payload)` triple.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Sha256::new());
        self
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, fire_time: SimTime, payload: P) -> Result<EventHandle, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::Causality {
                at: fire_time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(Entry {
            key: (fire_time, seq),
            payload,
        }));
        Ok(EventHandle(seq))
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload)
            .expect("non-negative delay cannot violate causality")
    }

    /// Returns `false` if the event already ran or was already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.live.remove(&handle.0) {
            self.cancelled += 1;
            true
        } else {
            false
        }
    }

    pub fn audit(&self) -> EventAudit {
        EventAudit {
            scheduled: self.next_seq,
            processed: self.processed,
            cancelled: self.cancelled,
            pending: self.live.len() as u64,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.live.is_empty()
    }

    /// Final trace digest, if tracing was enabled.
    pub fn trace_digest(&self) -> Option<[u8; 32]> {
        self.trace.as_ref().map(|h| h.clone().finalize().into())
    }

    fn discard_cancelled_head(&mut self) {
        while let Some(Reverse(head)) = self.heap.peek() {
            if self.live.contains(&head.key.1) {
                break;
            }
            self.heap.pop();
        }
    }

    /// Fire time of the next live event.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_cancelled_head();
        self.heap.peek().map(|Reverse(e)| e.key.0)
    }

    /// Advances the clock without processing anything. Fails if a live event
    /// would be skipped.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), EngineError> {
        if t < self.now {
            return Err(EngineError::Causality {
                at: t,
                now: self.now,
            });
        }
        if let Some(next) = self.peek_time() {
            if next < t {
                return Err(EngineError::Causality { at: next, now: t });
            }
        }
        self.now = t;
        Ok(())
    }
}

impl<P: Hash> Scheduler<P> {
    /// Pops the next live event with `fire_time <= limit` and moves the clock to it.
    pub fn pop_next(&mut self, limit: SimTime) -> Option<Event<P>> {
        self.discard_cancelled_head();
        let due = matches!(self.heap.peek(), Some(Reverse(e)) if e.key.0 <= limit);
        if !due {
            return None;
        }
        let Reverse(entry) = self.heap.pop()?;
        self.live.remove(&entry.key.1);
        self.processed += 1;
        debug_assert!(entry.key.0 >= self.now);
        self.now = entry.key.0;
        if let Some(trace) = self.trace.as_mut() {
            let mut h = DigestHasher(trace);
            entry.key.0.as_nanos().hash(&mut h);
            entry.key.1.hash(&mut h);
            entry.payload.hash(&mut h);
        }
        Some(Event {
            fire_time: entry.key.0,
            sequence: entry.key.1,
            payload: entry.payload,
        })
    }

    /// Processes every event with `fire_time <= t_end`, then sets the clock to `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, EngineError>
    where
        F: FnMut(&mut Scheduler<P>, Event<P>),
    {
        if t_end < self.now {
            return Err(EngineError::Causality {
                at: t_end,
                now: self.now,
            });
        }
        let mut count = 0;
        while let Some(ev) = self.pop_next(t_end) {
            handler(self, ev);
            count += 1;
        }
        self.now = t_end;
        Ok(count)
    }
}

struct DigestHasher<'a>(&'a mut Sha256);

impl Hasher for DigestHasher<'_> {
    fn finish(&self) -> u64 {
        0
    }
    fn write(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }
}
