use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{SimError, SimTime};

/// Identifies a scheduled event by its insertion sequence number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(pub u64);

#[derive(Debug)]
struct Entry<K> {
    at: SimTime,
    seq: u64,
    kind: K,
}

impl<K> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<K> Eq for Entry<K> {}

impl<K> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K> Ord for Entry<K> {
    // `BinaryHeap` is a max-heap; reverse so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Discrete-event queue ordered by `(time, insertion sequence)`.
#[derive(Debug)]
pub struct Scheduler<K> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<K>>,
}

impl<K> Default for Scheduler<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K> Scheduler<K> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, kind: K) -> Result<EventHandle, SimError> {
        if at < self.now {
            return Err(SimError::SchedulingInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { at, seq, kind });
        Ok(EventHandle(seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    /// Removes the next event if it is due at or before `until`, advancing
    /// the clock to its timestamp.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, EventHandle, K)> {
        if self.heap.peek()?.at > until {
            return None;
        }
        let entry = self.heap.pop()?;
        self.now = entry.at;
        Some((entry.at, EventHandle(entry.seq), entry.kind))
    }

    pub fn pop(&mut self) -> Option<(SimTime, EventHandle, K)> {
        self.pop_until(SimTime::MAX)
    }

    /// Moves the clock forward without executing anything. Never moves it back.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Pending events in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = (SimTime, &K)> {
        self.heap.iter().map(|e| (e.at, &e.kind))
    }
}
