//! Deterministic discrete-event core: a virtual clock and an ordered event
//! queue.
//!
//! Events are dispatched in ascending `(time, seq)` order, where `seq` is a
//! per-engine insertion counter. Events scheduled for the same instant are
//! therefore dispatched in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

/// Simulation time in sim units (one unit is one second of trace time).
pub type SimTime = f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("event scheduled at t={time} but the clock is already at t={now}")]
    Causality { time: SimTime, now: SimTime },
    #[error("event time {0} is not a finite non-negative number")]
    InvalidTime(SimTime),
}

/// Opaque handle to a scheduled event, usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(&self) -> u64 {
        self.0
    }
}

/// A dispatched event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<E> {
    pub time: SimTime,
    pub seq: u64,
    pub payload: E,
}

struct Queued<E> {
    time: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<E> Eq for Queued<E> {}

impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Queued<E> {
    // Reversed so that `BinaryHeap` pops the smallest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Queued<E>>,
    // seqs of events that are queued and not cancelled
    live: HashSet<u64>,
    dispatched: u64,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Self {
            now: 0.0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            live: HashSet::new(),
            dispatched: 0,
        }
    }

    /// Current value of the virtual clock.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Number of live (scheduled, not cancelled, not yet fired) events.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn is_idle(&self) -> bool {
        self.live.is_empty()
    }

    /// Schedules `payload` to fire at absolute time `time`.
    pub fn schedule(&mut self, time: SimTime, payload: E) -> Result<EventHandle, EngineError> {
        if !time.is_finite() || time < 0.0 {
            return Err(EngineError::InvalidTime(time));
        }
        if time < self.now {
            return Err(EngineError::Causality {
                time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued { time, seq, payload });
        self.live.insert(seq);
        Ok(EventHandle(seq))
    }

    /// Schedules `payload` to fire `delay` sim units from now.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> Result<EventHandle, EngineError> {
        self.schedule(self.now + delay, payload)
    }

    /// Suppresses a scheduled event. Returns false if it already fired or
    /// was already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_cancelled();
        self.queue.peek().map(|q| q.time)
    }

    /// Pops the next live event if it fires at or before `limit`, advancing
    /// the clock to its time.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<Event<E>> {
        self.discard_cancelled();
        if self.queue.peek()?.time > limit {
            return None;
        }
        let q = self.queue.pop()?;
        self.live.remove(&q.seq);
        debug_assert!(q.time >= self.now);
        self.now = q.time;
        self.dispatched += 1;
        Some(Event {
            time: q.time,
            seq: q.seq,
            payload: q.payload,
        })
    }

    /// Dispatches every event with time ≤ `limit` to `handler`, in order.
    ///
    /// Returns the clock afterwards: the time of the last processed event,
    /// which is never beyond `limit`. An empty queue ends the run early.
    pub fn run_until<F, Err>(&mut self, limit: SimTime, mut handler: F) -> Result<SimTime, Err>
    where
        F: FnMut(&mut Self, Event<E>) -> Result<(), Err>,
    {
        while let Some(ev) = self.pop_until(limit) {
            handler(self, ev)?;
        }
        Ok(self.now)
    }

    fn discard_cancelled(&mut self) {
        while let Some(top) = self.queue.peek() {
            if self.live.contains(&top.seq) {
                break;
            }
            self.queue.pop();
        }
    }
}
