//! Simulation clock and event queue.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

/// Simulation time in integer microseconds.
pub type Micros = u64;

pub const MICROS_PER_SECOND: f64 = 1e6;

/// Rounds a duration in seconds to the microsecond grid.
pub fn to_micros(seconds: f64) -> Micros {
    libm::round(seconds * MICROS_PER_SECOND) as Micros
}

pub fn to_seconds(t: Micros) -> f64 {
    t as f64 / MICROS_PER_SECOND
}

#[derive(Debug, Clone)]
struct Entry<E> {
    at: Micros,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending events ordered by `(time, insertion index)`.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
    now: Micros,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
        }
    }

    /// Current clock: the time of the last dispatched event.
    pub fn now(&self) -> Micros {
        self.now
    }

    /// Schedules `event` at `at`; times in the past are clamped to now.
    pub fn schedule(&mut self, at: Micros, event: E) {
        let at = at.max(self.now);
        self.heap.push(Entry {
            at,
            seq: self.next_seq,
            event,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Micros, E)> {
        let entry = self.heap.pop()?;
        self.now = entry.at;
        Some((entry.at, entry.event))
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn dispatches_in_time_then_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(20, 'c');
        q.schedule(10, 'a');
        q.schedule(20, 'd');
        q.schedule(10, 'b');
        let order: Vec<_> = core::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, [(10, 'a'), (10, 'b'), (20, 'c'), (20, 'd')]);
        assert_eq!(q.now(), 20);
    }

    #[test]
    fn past_events_are_clamped() {
        let mut q = EventQueue::new();
        q.schedule(50, 1);
        q.pop();
        q.schedule(10, 2);
        assert_eq!(q.pop(), Some((50, 2)));
    }

    #[test]
    fn micros_conversion() {
        assert_eq!(to_micros(0.05), 50_000);
        assert_eq!(to_micros(1e-3), 1_000);
        assert_eq!(to_seconds(2_337_500), 2.3375);
    }
}
