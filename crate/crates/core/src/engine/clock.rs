use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// What a clock does when it rings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClockKind {
    /// Rate-one clock on a bulk edge; the uniform picks the jump direction.
    Edge,
    /// Boundary clock that occupies the boundary site.
    Fill,
    /// Boundary clock that empties the boundary site.
    Clear,
}

/// A clock is addressed by the edge it lives on and its kind. Edge `x` joins `x` and `x + 1`;
/// on a segment the reservoirs are edges `0` and `N + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClockId {
    pub edge: i64,
    pub kind: ClockKind,
}

impl ClockId {
    pub fn edge(edge: i64) -> Self {
        Self { edge, kind: ClockKind::Edge }
    }

    /// Key of the random sub-stream owned by this clock.
    pub fn stream_key(&self) -> u64 {
        let kind = match self.kind {
            ClockKind::Edge => 0u64,
            ClockKind::Fill => 1,
            ClockKind::Clear => 2,
        };
        ((self.edge as u64).wrapping_add(1 << 40) << 2) | kind
    }
}

/// One ring of a clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub clock: ClockId,
    pub u: f64,
}

struct Clock {
    id: ClockId,
    rate: f64,
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    slot: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // Reversed so the max-heap pops the earliest event; ties go to the smaller clock id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.slot.cmp(&self.slot))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Independent Poisson clocks, each driven by its own ChaCha sub-stream keyed by its id, merged
/// into one time-ordered event sequence.
pub struct ClockStream {
    seed: u64,
    clocks: Vec<Clock>,
    heap: BinaryHeap<Pending>,
}

/// Resumable state of one clock: its rate, the position of its random stream and its next
/// ring time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockState {
    pub id: ClockId,
    pub rate: f64,
    pub word_pos: u128,
    pub next: Option<f64>,
}

impl ClockStream {
    /// Clocks with rate zero never ring.
    pub fn new(seed: u64, mut clocks: Vec<(ClockId, f64)>) -> Self {
        clocks.sort_by_key(|c| c.0);
        clocks.dedup_by(|a, b| a.0 == b.0);
        let mut stream = Self { seed, clocks: Vec::with_capacity(clocks.len()), heap: BinaryHeap::new() };
        for (slot, (id, rate)) in clocks.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id.stream_key());
            let mut clock = Clock { id, rate, rng };
            if rate > 0.0 {
                let first = clock.wait();
                stream.heap.push(Pending { time: first, slot });
            }
            stream.clocks.push(clock);
        }
        stream
    }

    pub fn snapshot(&self) -> Vec<ClockState> {
        let mut next = vec![None; self.clocks.len()];
        for p in self.heap.iter() {
            next[p.slot] = Some(p.time);
        }
        self.clocks.iter().zip(next).map(|(c, next)| ClockState { id: c.id, rate: c.rate, word_pos: c.rng.get_word_pos(), next }).collect()
    }

    /// Inverse of [`ClockStream::snapshot`]; states must be sorted by id.
    pub fn restore(seed: u64, states: &[ClockState]) -> Self {
        let mut stream = Self { seed, clocks: Vec::with_capacity(states.len()), heap: BinaryHeap::new() };
        for (slot, st) in states.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(st.id.stream_key());
            rng.set_word_pos(st.word_pos);
            if let Some(time) = st.next {
                stream.heap.push(Pending { time, slot });
            }
            stream.clocks.push(Clock { id: st.id, rate: st.rate, rng });
        }
        stream
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rate(&self, id: ClockId) -> Option<f64> {
        self.clocks.binary_search_by(|c| c.id.cmp(&id)).ok().map(|i| self.clocks[i].rate)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|p| p.time)
    }

    /// Pops the next event if it happens no later than `t_end`.
    pub fn next_before(&mut self, t_end: f64) -> Option<Event> {
        let top = *self.heap.peek()?;
        if top.time > t_end {
            return None;
        }
        self.heap.pop();
        let clock = &mut self.clocks[top.slot];
        let u: f64 = clock.rng.random();
        let next = top.time + clock.wait();
        self.heap.push(Pending { time: next, slot: top.slot });
        Some(Event { time: top.time, clock: clock.id, u })
    }
}

impl Clock {
    fn wait(&mut self) -> f64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        e / self.rate
    }
}

impl Iterator for ClockStream {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        self.next_before(f64::INFINITY)
    }
}
