//! Fetch-and-increment built from word operations.
//!
//! [`CasLoopFai`] is the lock-free read/CAS retry loop and returns exact
//! ranks. [`FArrayFai`] increments the caller's leaf of a sum f-array and
//! reads the root: wait-free, but the result is only guaranteed to be at
//! least the caller's rank, and values may repeat.

use crate::memsim::{Outcome, Pid, Program, Request, Step};

use super::farray::{payload, Combine, FArrayError, FArrayLayout, FArrayUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum CasStage {
    Start,
    Read,
    Cas(u64),
    Done(u64),
}

/// One fetch-and-increment on word `addr`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CasLoopFai {
    addr: usize,
    stage: CasStage,
}

impl CasLoopFai {
    pub fn new(addr: usize) -> Self {
        CasLoopFai { addr, stage: CasStage::Start }
    }

    /// The fetched value once the operation has completed.
    pub fn value(&self) -> Option<u64> {
        match self.stage {
            CasStage::Done(v) => Some(v),
            _ => None,
        }
    }

    pub fn next(&mut self, last: &Outcome) -> Option<Request> {
        match self.stage {
            CasStage::Start => {
                self.stage = CasStage::Read;
                Some(Request::Read(self.addr))
            }
            CasStage::Read => {
                let v = last.expect_read();
                self.stage = CasStage::Cas(v);
                Some(Request::Cas { addr: self.addr, expected: v, new: v + 1 })
            }
            CasStage::Cas(v) => {
                if last.expect_cas() {
                    self.stage = CasStage::Done(v);
                    None
                } else {
                    self.stage = CasStage::Read;
                    Some(Request::Read(self.addr))
                }
            }
            CasStage::Done(_) => None,
        }
    }
}

/// One increment-then-read on a sum f-array.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FArrayFai {
    update: FArrayUpdate,
    root: usize,
    querying: bool,
    result: Option<u64>,
}

impl FArrayFai {
    /// `done` is the number of increments this processor has completed
    /// before; the leaf is set to `done + 1`.
    pub fn new(layout: FArrayLayout, pid: Pid, done: u32) -> Result<Self, FArrayError> {
        assert_eq!(layout.combine(), Combine::Sum, "fetch-and-increment needs a sum f-array");
        Ok(FArrayFai {
            update: FArrayUpdate::new(layout, pid, done + 1)?,
            root: layout.root_addr(),
            querying: false,
            result: None,
        })
    }

    pub fn value(&self) -> Option<u64> {
        self.result
    }

    pub fn next(&mut self, last: &Outcome) -> Option<Request> {
        if self.querying {
            if self.result.is_none() {
                self.result = Some(u64::from(payload(last.expect_read())));
            }
            return None;
        }
        match self.update.next(last) {
            Some(req) => Some(req),
            None => {
                self.querying = true;
                Some(Request::Read(self.root))
            }
        }
    }
}

/// Calls a CAS-loop fetch-and-increment `calls` times and returns the
/// last fetched value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaiCaller {
    pid: Pid,
    addr: usize,
    calls: u32,
    current: Option<CasLoopFai>,
    last: u64,
}

impl FaiCaller {
    pub fn new(pid: Pid, addr: usize, calls: u32) -> Self {
        assert!(calls >= 1, "a caller must make at least one call");
        FaiCaller { pid, addr, calls, current: None, last: 0 }
    }
}

impl Program for FaiCaller {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        let mut outcome = last;
        loop {
            let op = self.current.get_or_insert_with(|| CasLoopFai::new(self.addr));
            if let Some(req) = op.next(&outcome) {
                return Step::Request(req);
            }
            self.last = op.value().expect("completed");
            self.current = None;
            self.calls -= 1;
            if self.calls == 0 {
                return Step::Return(self.last as i64);
            }
            outcome = Outcome::Start;
        }
    }
}
