//! Aggregating tree over per-processor cells with a one-read query.
//!
//! Leaves hold plain payloads. Internal nodes pack `(version << 32) | payload`
//! so a versioned CAS stands in for load-linked/store-conditional. An update
//! writes its leaf, then at every ancestor performs two refreshes; a refresh
//! reads the node, reads both children and CASes in the combined payload
//! with the version bumped. If both of a processor's refreshes at a node
//! fail, some other refresh that started after its first read succeeded, so
//! the new leaf value has reached the node either way.

use std::fmt;

use thiserror::Error;

use crate::memsim::{Arena, Outcome, Pid, Program, Request, Step};

const PAYLOAD_MASK: u64 = 0xFFFF_FFFF;

/// Identity of `min`; payloads of min/max arrays are limited to 31 bits.
pub const MIN_IDENTITY: u32 = 1 << 31;
pub const MAX_PAYLOAD_31: u32 = MIN_IDENTITY - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Combine {
    /// Wrapping 32-bit addition.
    Sum,
    Min,
    Max,
}

impl Combine {
    pub fn identity(self) -> u32 {
        match self {
            Combine::Sum | Combine::Max => 0,
            Combine::Min => MIN_IDENTITY,
        }
    }

    pub fn apply(self, a: u32, b: u32) -> u32 {
        match self {
            Combine::Sum => a.wrapping_add(b),
            Combine::Min => a.min(b),
            Combine::Max => a.max(b),
        }
    }

    pub fn fold(self, values: impl IntoIterator<Item = u32>) -> u32 {
        values.into_iter().fold(self.identity(), |acc, v| self.apply(acc, v))
    }

    pub fn name(self) -> &'static str {
        match self {
            Combine::Sum => "sum",
            Combine::Min => "min",
            Combine::Max => "max",
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FArrayError {
    #[error("an f-array needs at least one leaf")]
    NoLeaves,
    #[error("processor {pid} has no leaf in an f-array of {n}")]
    NoSuchLeaf { pid: Pid, n: usize },
    #[error("payload {value} does not fit in 31 bits, required by {combine}")]
    PayloadTooWide { value: u32, combine: Combine },
}

pub fn version(word: u64) -> u32 {
    (word >> 32) as u32
}

pub fn payload(word: u64) -> u32 {
    (word & PAYLOAD_MASK) as u32
}

pub fn pack(version: u32, payload: u32) -> u64 {
    (u64::from(version) << 32) | u64::from(payload)
}

/// Placement of an f-array in arena words.
///
/// The leaf count is padded to a power of two `N`; nodes are numbered in
/// heap order (root 1, children `2x` and `2x+1`) and node `x` lives at word
/// `base + x - 1`. Padding leaves stay at the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FArrayLayout {
    n: usize,
    leaves: usize,
    base: usize,
    combine: Combine,
}

impl FArrayLayout {
    pub fn new(n: usize, combine: Combine, base: usize) -> Result<Self, FArrayError> {
        if n == 0 {
            return Err(FArrayError::NoLeaves);
        }
        Ok(FArrayLayout { n, leaves: n.next_power_of_two(), base, combine })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Tree height, `ceil(log2 n)`.
    pub fn depth(&self) -> u32 {
        self.leaves.trailing_zeros()
    }

    pub fn word_count(&self) -> usize {
        2 * self.leaves - 1
    }

    pub fn node_count(&self) -> usize {
        self.word_count()
    }

    pub fn addr(&self, node: usize) -> usize {
        self.base + node - 1
    }

    pub fn root_addr(&self) -> usize {
        self.base
    }

    pub fn leaf_node(&self, pid: Pid) -> usize {
        self.leaves + pid - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node >= self.leaves
    }

    /// Zero-version words at the identity.
    pub fn initial_image(&self) -> Vec<u64> {
        vec![u64::from(self.combine.identity()); self.word_count()]
    }

    /// Arena holding only this f-array; `base` must be 0.
    pub fn arena(&self) -> Arena {
        assert_eq!(self.base, 0, "standalone arena requires base 0");
        Arena::with_image(self.initial_image(), vec![])
    }

    /// Operations per update: one leaf write plus 2 refreshes of 4
    /// operations at each ancestor.
    pub fn update_steps(&self) -> u64 {
        1 + 8 * u64::from(self.depth())
    }

    pub fn query_steps(&self) -> u64 {
        1
    }

    pub fn check_update(&self, pid: Pid, value: u32) -> Result<(), FArrayError> {
        if pid == 0 || pid > self.n {
            return Err(FArrayError::NoSuchLeaf { pid, n: self.n });
        }
        if self.combine != Combine::Sum && value > MAX_PAYLOAD_31 {
            return Err(FArrayError::PayloadTooWide { value, combine: self.combine });
        }
        Ok(())
    }

    /// Aggregate read straight from memory (no simulated cost).
    pub fn peek(&self, words: &[u64]) -> u32 {
        payload(words[self.root_addr()])
    }

    /// Leaf payloads `k1..kn` straight from memory.
    pub fn leaf_values(&self, words: &[u64]) -> Vec<u32> {
        (1..=self.n).map(|p| payload(words[self.addr(self.leaf_node(p))])).collect()
    }

    /// Checks that every internal node's payload combines its children.
    pub fn is_consistent(&self, words: &[u64]) -> bool {
        (1..self.leaves).all(|x| {
            let l = payload(words[self.addr(2 * x)]);
            let r = payload(words[self.addr(2 * x + 1)]);
            payload(words[self.addr(x)]) == self.combine.apply(l, r)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Stage {
    Start,
    WriteLeaf,
    ReadNode,
    ReadLeft,
    ReadRight,
    Cas,
    Done,
}

/// An in-flight update, driven one operation at a time. Embed it in a
/// [`Program`] and feed it outcomes until it yields `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FArrayUpdate {
    layout: FArrayLayout,
    value: u32,
    node: usize,
    stage: Stage,
    refresh: u8,
    old: u64,
    left: u32,
}

impl FArrayUpdate {
    pub fn new(layout: FArrayLayout, pid: Pid, value: u32) -> Result<Self, FArrayError> {
        layout.check_update(pid, value)?;
        Ok(FArrayUpdate {
            layout,
            value,
            node: layout.leaf_node(pid),
            stage: Stage::Start,
            refresh: 0,
            old: 0,
            left: 0,
        })
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    /// Next request given the outcome of the previous one; the first call's
    /// outcome is ignored.
    pub fn next(&mut self, last: &Outcome) -> Option<Request> {
        let l = self.layout;
        match self.stage {
            Stage::Start => {
                self.stage = Stage::WriteLeaf;
                Some(Request::Write(l.addr(self.node), u64::from(self.value)))
            }
            Stage::WriteLeaf => self.ascend(),
            Stage::ReadNode => {
                self.old = last.expect_read();
                self.stage = Stage::ReadLeft;
                Some(Request::Read(l.addr(2 * self.node)))
            }
            Stage::ReadLeft => {
                self.left = payload(last.expect_read());
                self.stage = Stage::ReadRight;
                Some(Request::Read(l.addr(2 * self.node + 1)))
            }
            Stage::ReadRight => {
                let right = payload(last.expect_read());
                let new = pack(version(self.old).wrapping_add(1), l.combine.apply(self.left, right));
                self.stage = Stage::Cas;
                Some(Request::Cas { addr: l.addr(self.node), expected: self.old, new })
            }
            Stage::Cas => {
                last.expect_cas();
                self.refresh += 1;
                if self.refresh < 2 {
                    self.stage = Stage::ReadNode;
                    return Some(Request::Read(l.addr(self.node)));
                }
                self.ascend()
            }
            Stage::Done => None,
        }
    }

    fn ascend(&mut self) -> Option<Request> {
        if self.node == 1 {
            self.stage = Stage::Done;
            return None;
        }
        self.node /= 2;
        self.refresh = 0;
        self.stage = Stage::ReadNode;
        Some(Request::Read(self.layout.addr(self.node)))
    }
}

/// One f-array operation in a client script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FArrayOp {
    Update(u32),
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Active {
    Idle,
    Update(FArrayUpdate),
    Query,
}

/// Runs a fixed script of operations on one processor and returns the
/// last query result (0 if it made none).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FArrayClient {
    pid: Pid,
    layout: FArrayLayout,
    ops: Vec<FArrayOp>,
    next_op: usize,
    active: Active,
    last_query: u32,
}

impl FArrayClient {
    pub fn new(layout: FArrayLayout, pid: Pid, ops: Vec<FArrayOp>) -> Result<Self, FArrayError> {
        for op in &ops {
            if let FArrayOp::Update(v) = op {
                layout.check_update(pid, *v)?;
            }
        }
        if pid == 0 || pid > layout.n() {
            return Err(FArrayError::NoSuchLeaf { pid, n: layout.n() });
        }
        Ok(FArrayClient { pid, layout, ops, next_op: 0, active: Active::Idle, last_query: 0 })
    }

    pub fn ops(&self) -> &[FArrayOp] {
        &self.ops
    }
}

impl Program for FArrayClient {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        match &mut self.active {
            Active::Update(u) => {
                if let Some(req) = u.next(&last) {
                    return Step::Request(req);
                }
            }
            Active::Query => self.last_query = payload(last.expect_read()),
            Active::Idle => {}
        }
        match self.ops.get(self.next_op) {
            None => {
                self.active = Active::Idle;
                Step::Return(i64::from(self.last_query))
            }
            Some(&op) => {
                self.next_op += 1;
                match op {
                    FArrayOp::Update(v) => {
                        let mut u = FArrayUpdate::new(self.layout, self.pid, v).expect("checked in new");
                        let req = u.next(&Outcome::Start).expect("update issues a leaf write");
                        self.active = Active::Update(u);
                        Step::Request(req)
                    }
                    FArrayOp::Query => {
                        self.active = Active::Query;
                        Step::Request(Request::Read(self.layout.root_addr()))
                    }
                }
            }
        }
    }
}

/// Boxed clients, one per script, pids in order.
pub fn clients(layout: FArrayLayout, scripts: &[Vec<FArrayOp>]) -> Result<Vec<Box<dyn Program>>, FArrayError> {
    scripts
        .iter()
        .enumerate()
        .map(|(i, ops)| FArrayClient::new(layout, i + 1, ops.clone()).map(|c| Box::new(c) as Box<dyn Program>))
        .collect()
}
