//! Reference sequential objects for arena object cells: exact counters,
//! h-approximate counters and h-relaxed queues, stacks and priority queues.
//!
//! The approximate objects hold their true state and choose a legal
//! response through a pluggable rule, so reductions can be exercised
//! against adversarial but legal behavior.

use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::memsim::{ObjOp, ObjResponse, ObjectFault, SeqObject};

fn unsupported(object: &str, op: ObjOp) -> ObjectFault {
    ObjectFault::Unsupported { object: object.to_string(), op }
}

/// Exact counter supporting increment, read and fetch-and-increment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CounterObject {
    value: u64,
}

impl CounterObject {
    pub fn new(initial: u64) -> Self {
        CounterObject { value: initial }
    }

    pub fn value(&self) -> u64 {
        self.value
    }
}

impl SeqObject for CounterObject {
    fn apply(&mut self, op: ObjOp) -> Result<ObjResponse, ObjectFault> {
        match op {
            ObjOp::Increment => {
                self.value += 1;
                Ok(ObjResponse::Ack)
            }
            ObjOp::Read => Ok(ObjResponse::Value(self.value)),
            ObjOp::FetchAndIncrement => {
                self.value += 1;
                Ok(ObjResponse::Value(self.value - 1))
            }
            other => Err(unsupported("counter", other)),
        }
    }
}

/// Seeded generator whose state hashes as `(seed, position)`.
#[derive(Debug, Clone)]
struct SeededRng(ChaCha8Rng);

impl SeededRng {
    fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl Hash for SeededRng {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.get_seed().hash(state);
        self.0.get_word_pos().hash(state);
    }
}

impl PartialEq for SeededRng {
    fn eq(&self, other: &Self) -> bool {
        self.0.get_seed() == other.0.get_seed() && self.0.get_word_pos() == other.0.get_word_pos()
    }
}

impl Eq for SeededRng {}

/// How an approximate counter perturbs reads before clamping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    Exact,
    /// Offsets drawn uniformly from `[-(2h+1), 2h+1]`, so the clamp is
    /// exercised at both ends.
    Seeded(u64),
    Fixed(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Offsets {
    Exact,
    Seeded(Box<SeededRng>),
    Fixed(i64),
}

/// Counter whose reads may be off by up to `h`: a read of true value `v`
/// returns `clamp(v + offset, max(v - h, 0), v + h)`. Reads are not
/// required to be monotone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ApproxCounter {
    h: u64,
    value: u64,
    offsets: Offsets,
}

impl ApproxCounter {
    pub fn new(h: u64, perturbation: Perturbation) -> Self {
        let offsets = match perturbation {
            Perturbation::Exact => Offsets::Exact,
            Perturbation::Seeded(seed) => Offsets::Seeded(Box::new(SeededRng::new(seed))),
            Perturbation::Fixed(o) => Offsets::Fixed(o),
        };
        ApproxCounter { h, value: 0, offsets }
    }

    pub fn h(&self) -> u64 {
        self.h
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    fn read(&mut self) -> u64 {
        let spread = 2 * self.h as i64 + 1;
        let offset = match &mut self.offsets {
            Offsets::Exact => 0,
            Offsets::Seeded(rng) => rng.0.gen_range(-spread..=spread),
            Offsets::Fixed(o) => *o,
        };
        let v = self.value as i64;
        let lo = (v - self.h as i64).max(0);
        let hi = v + self.h as i64;
        (v.saturating_add(offset)).clamp(lo, hi) as u64
    }
}

impl SeqObject for ApproxCounter {
    fn apply(&mut self, op: ObjOp) -> Result<ObjResponse, ObjectFault> {
        match op {
            ObjOp::Increment => {
                self.value += 1;
                Ok(ObjResponse::Ack)
            }
            ObjOp::Read => Ok(ObjResponse::Value(self.read())),
            other => Err(unsupported("approximate counter", other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueKind {
    Fifo,
    Lifo,
    /// Smallest value first.
    MinPriority,
}

impl QueueKind {
    pub fn name(self) -> &'static str {
        match self {
            QueueKind::Fifo => "queue",
            QueueKind::Lifo => "stack",
            QueueKind::MinPriority => "priority queue",
        }
    }
}

/// Which of the eligible elements a removal takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RemovalPolicy {
    StrictFirst,
    /// The deepest eligible element, rank `min(h, size)`.
    AlwaysHth,
    SeededRandom(u64),
    /// Always rank `r`, even when illegal; used to test the legality guard.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Picker {
    StrictFirst,
    AlwaysHth,
    Random(Box<SeededRng>),
    Fixed(usize),
}

/// Queue, stack or priority queue whose removal may return any of the
/// first `h` elements in the structure's order. A slack of 0 behaves
/// like 1 (strict).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelaxedQueue {
    kind: QueueKind,
    h: usize,
    /// Elements in removal order.
    items: VecDeque<u64>,
    picker: Picker,
    last_rank: Option<usize>,
}

impl RelaxedQueue {
    pub fn new(kind: QueueKind, h: usize, policy: RemovalPolicy) -> Self {
        let picker = match policy {
            RemovalPolicy::StrictFirst => Picker::StrictFirst,
            RemovalPolicy::AlwaysHth => Picker::AlwaysHth,
            RemovalPolicy::SeededRandom(seed) => Picker::Random(Box::new(SeededRng::new(seed))),
            RemovalPolicy::Fixed(r) => Picker::Fixed(r),
        };
        RelaxedQueue { kind, h, items: VecDeque::new(), picker, last_rank: None }
    }

    /// Builds the structure by inserting `values` in order.
    pub fn loaded(kind: QueueKind, h: usize, policy: RemovalPolicy, values: impl IntoIterator<Item = u64>) -> Self {
        let mut q = Self::new(kind, h, policy);
        for v in values {
            q.insert(v);
        }
        q
    }

    pub fn kind(&self) -> QueueKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Elements in removal order.
    pub fn items(&self) -> impl Iterator<Item = u64> + '_ {
        self.items.iter().copied()
    }

    /// 1-based rank taken by the most recent removal.
    pub fn last_rank(&self) -> Option<usize> {
        self.last_rank
    }

    /// Largest legal rank for a removal from the current contents.
    pub fn window(&self) -> usize {
        self.h.max(1).min(self.items.len())
    }

    fn insert(&mut self, v: u64) {
        match self.kind {
            QueueKind::Fifo => self.items.push_back(v),
            QueueKind::Lifo => self.items.push_front(v),
            QueueKind::MinPriority => {
                let at = self.items.partition_point(|&x| x <= v);
                self.items.insert(at, v);
            }
        }
    }

    fn remove(&mut self) -> Result<ObjResponse, ObjectFault> {
        if self.items.is_empty() {
            return Ok(ObjResponse::Empty);
        }
        let allowed = self.window();
        let rank = match &mut self.picker {
            Picker::StrictFirst => 1,
            Picker::AlwaysHth => allowed,
            Picker::Random(rng) => rng.0.gen_range(1..=allowed),
            Picker::Fixed(r) => *r,
        };
        if rank == 0 || rank > allowed {
            return Err(ObjectFault::IllegalRank { rank, allowed });
        }
        self.last_rank = Some(rank);
        let v = self.items.remove(rank - 1).expect("rank within contents");
        Ok(ObjResponse::Value(v))
    }
}

impl SeqObject for RelaxedQueue {
    fn apply(&mut self, op: ObjOp) -> Result<ObjResponse, ObjectFault> {
        match op {
            ObjOp::Remove => self.remove(),
            ObjOp::Insert(v) => {
                self.insert(v);
                Ok(ObjResponse::Ack)
            }
            other => Err(unsupported(self.kind.name(), other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drain(q: &mut RelaxedQueue) -> Vec<u64> {
        let mut out = Vec::new();
        while let ObjResponse::Value(v) = q.apply(ObjOp::Remove).unwrap() {
            out.push(v);
        }
        out
    }

    #[test]
    fn counter_semantics() {
        let mut c = CounterObject::new(1);
        assert_eq!(c.apply(ObjOp::FetchAndIncrement), Ok(ObjResponse::Value(1)));
        assert_eq!(c.value(), 2);
        assert_eq!(c.apply(ObjOp::Increment), Ok(ObjResponse::Ack));
        assert_eq!(c.apply(ObjOp::Read), Ok(ObjResponse::Value(3)));
        assert!(matches!(c.apply(ObjOp::Remove), Err(ObjectFault::Unsupported { .. })));
    }

    #[test]
    fn zero_slack_reads_exactly() {
        let mut c = ApproxCounter::new(0, Perturbation::Seeded(1));
        for i in 1..=50 {
            c.apply(ObjOp::Increment).unwrap();
            assert_eq!(c.apply(ObjOp::Read), Ok(ObjResponse::Value(i)));
        }
    }

    #[test]
    fn approx_read_clamps_to_lower_bound() {
        let mut c = ApproxCounter::new(3, Perturbation::Fixed(-5));
        for _ in 0..10 {
            c.apply(ObjOp::Increment).unwrap();
        }
        assert_eq!(c.apply(ObjOp::Read), Ok(ObjResponse::Value(7)));
        let mut z = ApproxCounter::new(3, Perturbation::Fixed(-5));
        z.apply(ObjOp::Increment).unwrap();
        assert_eq!(z.apply(ObjOp::Read), Ok(ObjResponse::Value(0)));
    }

    #[test]
    fn fifo_with_unit_slack_is_exact() {
        let mut q = RelaxedQueue::loaded(QueueKind::Fifo, 1, RemovalPolicy::SeededRandom(3), 1..=8);
        assert_eq!(drain(&mut q), (1..=8).collect::<Vec<_>>());
        assert_eq!(q.apply(ObjOp::Remove), Ok(ObjResponse::Empty));
    }

    #[test]
    fn always_hth_takes_rank_h() {
        let mut q = RelaxedQueue::loaded(QueueKind::Fifo, 3, RemovalPolicy::AlwaysHth, 1..=8);
        assert_eq!(q.apply(ObjOp::Remove), Ok(ObjResponse::Value(3)));
        assert_eq!(q.last_rank(), Some(3));
        // once fewer than h remain, the deepest remaining element
        assert_eq!(drain(&mut q), vec![4, 5, 6, 7, 8, 2, 1]);
    }

    #[test]
    fn stack_and_priority_orders() {
        let mut s = RelaxedQueue::loaded(QueueKind::Lifo, 1, RemovalPolicy::StrictFirst, 1..=4);
        assert_eq!(drain(&mut s), vec![4, 3, 2, 1]);
        let mut s = RelaxedQueue::loaded(QueueKind::Lifo, 1, RemovalPolicy::StrictFirst, (1..=4).rev());
        assert_eq!(drain(&mut s), vec![1, 2, 3, 4]);
        let mut p = RelaxedQueue::loaded(QueueKind::MinPriority, 1, RemovalPolicy::StrictFirst, [5, 1, 4, 2, 3]);
        assert_eq!(drain(&mut p), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn rogue_rank_trips_guard() {
        let mut q = RelaxedQueue::loaded(QueueKind::Fifo, 2, RemovalPolicy::Fixed(3), 1..=8);
        assert_eq!(q.apply(ObjOp::Remove), Err(ObjectFault::IllegalRank { rank: 3, allowed: 2 }));
        let mut q = RelaxedQueue::loaded(QueueKind::Fifo, 0, RemovalPolicy::Fixed(2), 1..=8);
        assert_eq!(q.apply(ObjOp::Remove), Err(ObjectFault::IllegalRank { rank: 2, allowed: 1 }));
    }

    proptest! {
        #[test]
        fn approx_reads_within_slack(h in 0u64..20, seed: u64, incs in proptest::collection::vec(0u8..4, 1..40)) {
            let mut c = ApproxCounter::new(h, Perturbation::Seeded(seed));
            for k in incs {
                for _ in 0..k {
                    c.apply(ObjOp::Increment).unwrap();
                }
                let v = c.value();
                match c.apply(ObjOp::Read).unwrap() {
                    ObjResponse::Value(r) => prop_assert!(r.abs_diff(v) <= h),
                    other => prop_assert!(false, "unexpected {:?}", other),
                }
            }
        }

        #[test]
        fn removal_rank_within_slack(
            h in 0usize..10,
            seed: u64,
            kind in prop_oneof![Just(QueueKind::Fifo), Just(QueueKind::Lifo), Just(QueueKind::MinPriority)],
            len in 1u64..30,
        ) {
            let mut q = RelaxedQueue::loaded(kind, h, RemovalPolicy::SeededRandom(seed), 1..=len);
            let mut got = Vec::new();
            while !q.is_empty() {
                let order: Vec<u64> = q.items().collect();
                let ObjResponse::Value(v) = q.apply(ObjOp::Remove).unwrap() else { unreachable!() };
                let rank = order.iter().position(|&x| x == v).unwrap() + 1;
                prop_assert!(rank <= h.max(1));
                prop_assert_eq!(Some(rank), q.last_rank());
                got.push(v);
            }
            got.sort_unstable();
            prop_assert_eq!(got, (1..=len).collect::<Vec<_>>());
        }
    }
}
