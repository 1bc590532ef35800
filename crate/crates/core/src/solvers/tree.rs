//! Tournament-tree solver for the easy problem, `O(n)` total work.
//!
//! Each processor starts at its leaf claiming `k = 1` and tries to CAS the
//! node from 0 to `k`. After a successful CAS it reads the sibling: a
//! nonzero sibling means the whole parent subtree (`2k` leaves) has woken,
//! so it climbs with `2k`; otherwise it returns `k`. A failed CAS or a
//! zero sibling ends the climb with `k`, and the processor that sets the
//! root returns `n`.

use crate::memsim::{Arena, Event, Outcome, Pid, Program, Request, Step};

use super::SolverError;

/// Heap-ordered complete binary tree over `n = 2^m` leaves, node `x` at
/// word `x - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeLayout {
    n: usize,
}

impl TreeLayout {
    pub fn new(n: usize) -> Result<Self, SolverError> {
        if n == 0 {
            return Err(SolverError::NoProcessors);
        }
        if !n.is_power_of_two() {
            return Err(SolverError::NotPowerOfTwo(n));
        }
        Ok(TreeLayout { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `m = log2 n`.
    pub fn height(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn word_count(&self) -> usize {
        2 * self.n - 1
    }

    pub fn arena(&self) -> Arena {
        Arena::new(self.word_count(), vec![])
    }

    pub fn addr(&self, node: usize) -> usize {
        node - 1
    }

    pub fn node_at(&self, addr: usize) -> usize {
        addr + 1
    }

    pub fn leaf(&self, pid: Pid) -> usize {
        self.n + pid - 1
    }

    pub fn pid_of_leaf(&self, node: usize) -> Pid {
        node - self.n + 1
    }

    pub fn parent(&self, node: usize) -> usize {
        node / 2
    }

    pub fn sibling(&self, node: usize) -> usize {
        node ^ 1
    }

    /// Height of a node above the leaves.
    pub fn node_height(&self, node: usize) -> u32 {
        self.height() - node.ilog2()
    }

    /// Leaf pids below `node`.
    pub fn subtree_pids(&self, node: usize) -> std::ops::RangeInclusive<Pid> {
        let h = self.node_height(node);
        let first = node << h;
        self.pid_of_leaf(first)..=self.pid_of_leaf(first + (1 << h) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Stage {
    Start,
    Cas,
    Sibling,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeProgram {
    pid: Pid,
    layout: TreeLayout,
    node: usize,
    k: u64,
    stage: Stage,
}

impl TreeProgram {
    pub fn new(layout: TreeLayout, pid: Pid) -> Self {
        assert!((1..=layout.n).contains(&pid), "pid {pid} outside 1..={}", layout.n);
        TreeProgram { pid, layout, node: layout.leaf(pid), k: 1, stage: Stage::Start }
    }

    fn cas(&mut self) -> Step {
        self.stage = Stage::Cas;
        Step::Request(Request::Cas { addr: self.layout.addr(self.node), expected: 0, new: self.k })
    }
}

impl Program for TreeProgram {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        match self.stage {
            Stage::Start => self.cas(),
            Stage::Cas => {
                if !last.expect_cas() || self.node == 1 {
                    return Step::Return(self.k as i64);
                }
                self.stage = Stage::Sibling;
                Step::Request(Request::Read(self.layout.addr(self.layout.sibling(self.node))))
            }
            Stage::Sibling => {
                if last.expect_read() == 0 {
                    return Step::Return(self.k as i64);
                }
                self.node = self.layout.parent(self.node);
                self.k *= 2;
                self.cas()
            }
        }
    }
}

pub fn tree_programs(layout: TreeLayout) -> Vec<Box<dyn Program>> {
    (1..=layout.n).map(|p| Box::new(TreeProgram::new(layout, p)) as Box<dyn Program>).collect()
}

/// Online check of the tree's safety invariants, fed one event at a time:
/// a node at height `h` becomes nonzero at most once, holds `2^h`, and only
/// after at least `2^h` processors below it have woken.
#[derive(Debug, Clone)]
pub struct TreeMonitor {
    layout: TreeLayout,
    woken: Vec<bool>,
    set: Vec<bool>,
}

impl TreeMonitor {
    pub fn new(layout: TreeLayout) -> Self {
        TreeMonitor { layout, woken: vec![false; layout.n + 1], set: vec![false; layout.word_count() + 1] }
    }

    pub fn observe(&mut self, event: &Event) -> Result<(), String> {
        self.woken[event.pid] = true;
        let Request::Cas { addr, new, .. } = event.request else {
            return Ok(());
        };
        if event.outcome != Outcome::Cas(true) {
            return Ok(());
        }
        let node = self.layout.node_at(addr);
        if std::mem::replace(&mut self.set[node], true) {
            return Err(format!("time {}: node {node} set a second time", event.time));
        }
        let h = self.layout.node_height(node);
        if new != 1 << h {
            return Err(format!("time {}: node {node} at height {h} set to {new}", event.time));
        }
        let woken = self.layout.subtree_pids(node).filter(|&p| self.woken[p]).count();
        if woken < 1 << h {
            return Err(format!(
                "time {}: node {node} at height {h} set with only {woken} woken below it",
                event.time
            ));
        }
        Ok(())
    }
}
