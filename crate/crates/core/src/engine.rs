//! Discrete-event kernel: a time-ordered event queue with cancellation, and
//! named RNG sub-streams derived from one master seed. Runs are
//! single-threaded and fully deterministic; independent runs may execute in
//! parallel because nothing here is shared.

use std::collections::{BinaryHeap, HashSet};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Token returned by [`EventQueue::schedule`]; cancels at most one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Scheduled<E> {
    time: f64,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

// BinaryHeap is a max-heap; reverse the comparison so the earliest
// (fire_time, sequence) pair surfaces first.
impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending events ordered by (fire_time, insertion sequence).
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    live: HashSet<u64>,
    next_seq: u64,
    now: f64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), live: HashSet::new(), next_seq: 0, now: 0.0 }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Number of scheduled events that have neither fired nor been cancelled.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Enqueues an event. Scheduling into the past is a programming error and
    /// aborts the run.
    pub fn schedule(&mut self, fire_time: f64, payload: E) -> EventHandle {
        assert!(
            fire_time.is_finite() && fire_time >= self.now,
            "event scheduled into the past: fire_time {} < now {}",
            fire_time,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Scheduled { time: fire_time, seq, payload });
        EventHandle(seq)
    }

    /// Revokes a scheduled event. Returns true iff the event had not yet
    /// fired (and was not already cancelled); cancelled events never fire.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Pops the next live event with fire_time <= t_end, advancing the clock.
    pub fn pop_due(&mut self, t_end: f64) -> Option<(f64, E)> {
        while let Some(top) = self.heap.peek() {
            if top.time > t_end {
                return None;
            }
            let ev = self.heap.pop().expect("peeked");
            if self.live.remove(&ev.seq) {
                debug_assert!(ev.time >= self.now, "clock would move backwards");
                self.now = ev.time;
                return Some((ev.time, ev.payload));
            }
            // cancelled entry: discard and keep looking
        }
        None
    }

    /// Dispatches every event with fire_time <= t_end in (fire_time,
    /// sequence) order, handing each to `handler` together with a mutable
    /// borrow of the queue so handlers can schedule follow-ups. Returns the
    /// number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: f64, mut handler: F) -> usize
    where
        F: FnMut(&mut Self, f64, E),
    {
        let mut dispatched = 0;
        while let Some((time, payload)) = self.pop_due(t_end) {
            handler(self, time, payload);
            dispatched += 1;
        }
        if self.now < t_end {
            self.now = t_end;
        }
        dispatched
    }
}

// ============================================================================
// Named RNG streams
// ============================================================================

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives independent named RNG streams from one master seed. Equal
/// (master seed, name) pairs always produce identical streams, on every
/// platform.
#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    master_seed: u64,
}

impl StreamFactory {
    pub fn new(master_seed: u64) -> Self {
        StreamFactory { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, name: &str) -> RngStream {
        let mut state = self.master_seed ^ fnv1a64(name.as_bytes());
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        RngStream { name: name.to_string(), rng: ChaCha12Rng::from_seed(key), draws: 0 }
    }
}

/// One named random sequence; tracks how many draws it has served.
pub struct RngStream {
    pub name: String,
    rng: ChaCha12Rng,
    draws: u64,
}

impl RngStream {
    /// Uniform draw in [0, 1) with 53 significand bits.
    pub fn next_f64(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fires_at_scheduled_time() {
        let mut q: EventQueue<&str> = EventQueue::new();
        q.schedule(5.0, "a");
        let mut fired = Vec::new();
        let n = q.run_until(10.0, |_, t, e| fired.push((t, e)));
        assert_eq!(n, 1);
        assert_eq!(fired, vec![(5.0, "a")]);
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(5.0, 1);
        q.schedule(5.0, 2);
        q.schedule(3.0, 0);
        let mut fired = Vec::new();
        q.run_until(10.0, |_, _, e| fired.push(e));
        assert_eq!(fired, vec![0, 1, 2]);
    }

    #[test]
    fn cancel_before_fire() {
        let mut q: EventQueue<&str> = EventQueue::new();
        let h = q.schedule(5.0, "never");
        assert!(q.cancel(h));
        assert!(!q.cancel(h), "second cancel reports already-gone");
        let mut fired = Vec::new();
        let n = q.run_until(10.0, |_, _, e| fired.push(e));
        assert_eq!(n, 0);
        assert!(fired.is_empty());
    }

    #[test]
    fn cancel_after_fire_is_false() {
        let mut q: EventQueue<&str> = EventQueue::new();
        let h = q.schedule(2.0, "x");
        q.run_until(10.0, |_, _, _| {});
        assert!(!q.cancel(h));
    }

    #[test]
    fn empty_queue_dispatches_nothing() {
        let mut q: EventQueue<u8> = EventQueue::new();
        assert_eq!(q.run_until(100.0, |_, _, _| {}), 0);
        assert_eq!(q.now(), 100.0);
    }

    #[test]
    fn horizon_is_inclusive_and_clock_tracks_fires() {
        let mut q: EventQueue<u8> = EventQueue::new();
        q.schedule(1.0, 1);
        q.schedule(4.0, 2);
        q.schedule(7.0, 3);
        q.schedule(7.5, 4);
        let mut fired = Vec::new();
        let n = q.run_until(7.0, |q, t, e| {
            fired.push(e);
            assert_eq!(q.now(), t);
        });
        assert_eq!(n, 3);
        assert_eq!(fired, vec![1, 2, 3]);
        // the 7.5 event survives for a later horizon
        assert_eq!(q.pending(), 1);
        let n = q.run_until(8.0, |_, _, e| fired.push(e));
        assert_eq!(n, 1);
        assert_eq!(fired, vec![1, 2, 3, 4]);
    }

    #[test]
    fn handlers_can_schedule_followups() {
        let mut q: EventQueue<u32> = EventQueue::new();
        q.schedule(1.0, 3);
        let mut fired = Vec::new();
        q.run_until(100.0, |q, t, e| {
            fired.push((t, e));
            if e > 0 {
                q.schedule(t + 1.0, e - 1);
            }
        });
        assert_eq!(fired, vec![(1.0, 3), (2.0, 2), (3.0, 1), (4.0, 0)]);
    }

    #[test]
    #[should_panic(expected = "scheduled into the past")]
    fn scheduling_into_the_past_aborts() {
        let mut q: EventQueue<u8> = EventQueue::new();
        q.schedule(5.0, 1);
        q.run_until(10.0, |q, _, _| {
            q.schedule(1.0, 2);
        });
    }

    #[test]
    fn same_stream_name_reproduces() {
        let f = StreamFactory::new(42);
        let mut a = f.stream("channel");
        let mut b = f.stream("channel");
        for _ in 0..100 {
            assert_eq!(a.next_f64(), b.next_f64());
        }
        assert_eq!(a.draws(), 100);
    }

    #[test]
    fn different_names_differ() {
        let f = StreamFactory::new(42);
        let mut a = f.stream("channel");
        let mut b = f.stream("jitter");
        let equal = (0..100).filter(|_| a.next_f64() == b.next_f64()).count();
        assert!(equal < 100, "independent streams should not be identical");
    }

    #[test]
    fn master_seed_changes_streams() {
        let mut a = StreamFactory::new(1).stream("channel");
        let mut b = StreamFactory::new(2).stream("channel");
        let equal = (0..100).filter(|_| a.next_f64() == b.next_f64()).count();
        assert!(equal < 100);
    }

    #[test]
    fn draw_helpers_stay_in_range() {
        let mut s = StreamFactory::new(7).stream("misc");
        for _ in 0..1000 {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
        for _ in 0..1000 {
            let v = s.uniform(-3.0, 9.0);
            assert!((-3.0..9.0).contains(&v));
        }
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[s.index(5)] = true;
        }
        assert!(seen.iter().all(|&x| x), "index(5) should reach every slot");
    }
}
