use alloc::collections::BinaryHeap;
use core::cmp::{Ordering, Reverse};

use crate::time::SimTime;

struct Entry<T> {
    time: SimTime,
    seq_no: u64,
    payload: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq_no) == (other.time, other.seq_no)
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq_no).cmp(&(other.time, other.seq_no))
    }
}

/// A dispatched event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatched<T> {
    pub time: SimTime,
    pub seq_no: u64,
    pub payload: T,
}

/// Discrete-event queue with a monotone clock. Events fire in `(time, seq_no)`
/// order, `seq_no` being the insertion counter, so simultaneous events keep
/// their scheduling order.
pub struct Scheduler<T> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Entry<T>>>,
}

impl<T> Default for Scheduler<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Scheduler<T> {
    pub fn new() -> Self {
        Scheduler { now: SimTime::ZERO, next_seq: 0, queue: BinaryHeap::new() }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Panics if `at` is earlier than the current time.
    pub fn schedule(&mut self, at: SimTime, payload: T) -> u64 {
        assert!(at >= self.now, "event scheduled at {at} before now {}", self.now);
        let seq_no = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Entry { time: at, seq_no, payload }));
        seq_no
    }

    pub fn schedule_in(&mut self, delay_us: u64, payload: T) -> u64 {
        self.schedule(self.now + delay_us, payload)
    }

    /// Pops the next event due at or before `t_end`, advancing the clock to it.
    /// When nothing is due the clock moves to `t_end` and `None` is returned.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Dispatched<T>> {
        assert!(t_end >= self.now, "run_until({t_end}) before now {}", self.now);
        match self.queue.peek() {
            Some(Reverse(e)) if e.time <= t_end => {
                let Reverse(e) = self.queue.pop().expect("peeked");
                self.now = e.time;
                Some(Dispatched { time: e.time, seq_no: e.seq_no, payload: e.payload })
            }
            _ => {
                self.now = t_end;
                None
            }
        }
    }

    /// Dispatches every event due at or before `t_end` to `handler`, which may
    /// schedule further events. Returns the number dispatched.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> usize
    where
        F: FnMut(&mut Self, Dispatched<T>),
    {
        let mut n = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            n += 1;
        }
        n
    }

    /// Pending events in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &T> {
        self.queue.iter().map(|Reverse(e)| &e.payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn empty_queue_advances_clock() {
        let mut s: Scheduler<()> = Scheduler::new();
        let n = s.run_until(SimTime::from_micros(10_000_000), |_, _| {});
        assert_eq!(n, 0);
        assert_eq!(s.now().as_micros(), 10_000_000);
    }

    #[test]
    fn ties_dispatch_in_insertion_order() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_micros(5), 'b');
        s.schedule(SimTime::from_micros(5), 'c');
        s.schedule(SimTime::from_micros(1), 'a');
        let mut seen = Vec::new();
        s.run_until(SimTime::from_micros(5), |_, ev| seen.push((ev.time.as_micros(), ev.payload)));
        assert_eq!(seen, [(1, 'a'), (5, 'b'), (5, 'c')]);
    }

    #[test]
    fn handler_can_chain_events() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32);
        let mut seen = Vec::new();
        s.run_until(SimTime::from_micros(35), |s, ev| {
            seen.push((ev.time.as_micros(), ev.payload));
            s.schedule_in(10, ev.payload + 1);
        });
        assert_eq!(seen, [(0, 0), (10, 1), (20, 2), (30, 3)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.now().as_micros(), 35);
    }

    #[test]
    #[should_panic(expected = "before now")]
    fn scheduling_into_the_past_panics() {
        let mut s = Scheduler::new();
        s.run_until(SimTime::from_micros(100), |_, _: Dispatched<()>| {});
        s.schedule(SimTime::from_micros(50), ());
    }
}
