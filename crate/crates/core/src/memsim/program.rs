use std::fmt;
use std::hash::{Hash, Hasher};

use super::arena::{ObjOp, ObjResponse};

/// Processor id, 1-based.
pub type Pid = usize;

/// One shared-memory operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Request {
    Read(usize),
    Write(usize, u64),
    Cas { addr: usize, expected: u64, new: u64 },
    Apply { obj: usize, op: ObjOp },
}

/// Result of the previous memory operation, fed back into [`Program::step`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// First call; no operation has been issued yet.
    Start,
    Read(u64),
    Written,
    Cas(bool),
    Applied(ObjResponse),
}

impl Outcome {
    /// Panics unless the outcome is a read. Programs call this where their
    /// own state guarantees the last request was a read.
    pub fn expect_read(&self) -> u64 {
        match self {
            Outcome::Read(v) => *v,
            other => panic!("expected read outcome, got {other:?}"),
        }
    }

    pub fn expect_cas(&self) -> bool {
        match self {
            Outcome::Cas(ok) => *ok,
            other => panic!("expected CAS outcome, got {other:?}"),
        }
    }

    pub fn expect_applied(&self) -> ObjResponse {
        match self {
            Outcome::Applied(r) => *r,
            other => panic!("expected object response, got {other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Request(Request),
    Return(i64),
}

/// A resumable per-processor state machine.
///
/// Each call to [`step`](Program::step) receives the outcome of the
/// previously issued request and either issues the next one or returns.
/// After `Return` the program is never stepped again.
pub trait Program: ProgramExt + fmt::Debug + Send {
    fn pid(&self) -> Pid;
    fn step(&mut self, last: Outcome) -> Step;
}

/// Cloning and state hashing for boxed programs, used by the schedule
/// explorers. Implemented automatically for `Clone + Hash` programs.
pub trait ProgramExt {
    fn box_clone(&self) -> Box<dyn Program>;
    fn hash_state(&self, state: &mut dyn Hasher);
}

impl<T> ProgramExt for T
where
    T: Program + Clone + Hash + 'static,
{
    fn box_clone(&self) -> Box<dyn Program> {
        Box::new(self.clone())
    }

    fn hash_state(&self, mut state: &mut dyn Hasher) {
        self.hash(&mut state);
    }
}

impl Clone for Box<dyn Program> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}
