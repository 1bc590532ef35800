//! Step-level simulator of an asynchronous shared-memory machine.
//!
//! `n` processors (ids `1..=n`) each run a [`Program`]: a passive state
//! machine that, on every step, issues exactly one shared-memory operation
//! against the [`Arena`] or returns an integer. A scheduler picks which
//! unreturned processor steps next, one event per time slot. Work is the
//! number of shared-memory operations; local computation is free.
//!
//! The sequential [`Machine`] is the reference executor. [`exhaustive_run`]
//! and [`explore_states`] enumerate schedules for model checking, and
//! [`parallel::run_parallel`] runs the same programs on OS threads for
//! schedule-independent checks.

mod arena;
mod explore;
mod machine;
pub mod parallel;
mod program;
mod schedule;
mod trace;

pub use arena::{Arena, ObjOp, ObjResponse, ObjectFault, SeqObject, SeqObjectExt};
pub use explore::{exhaustive_run, explore_states, ExploreStats, Explored, Interleavings};
pub use machine::{run, run_with, Machine, RunOptions, RunResult, DEFAULT_STEP_BUDGET};
pub use program::{Outcome, Pid, Program, ProgramExt, Request, Step};
pub use schedule::{SchedulePolicy, Scheduler};
pub use trace::{
    parse_trace, replay, write_trace, Event, ReplayMismatch, RunStatus, Trace, TraceParseError,
    WorkReport,
};

use thiserror::Error;

/// Faults that halt a simulation. Non-termination is not a fault; it is
/// reported through [`RunStatus`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("processor {pid}: word address {addr} out of range (arena has {len} words)")]
    WordOutOfRange { pid: Pid, addr: usize, len: usize },
    #[error("processor {pid}: object address {addr} out of range (arena has {len} objects)")]
    ObjectOutOfRange { pid: Pid, addr: usize, len: usize },
    #[error("processor {pid}: object {addr} fault: {fault}")]
    Object { pid: Pid, addr: usize, fault: ObjectFault },
    #[error("program list is empty")]
    NoPrograms,
    #[error("program at position {index} reports pid {pid}; pids must be 1..=n in order")]
    PidMismatch { index: usize, pid: Pid },
    #[error("processor {pid} returned before issuing any shared-memory operation")]
    ReturnWithoutStep { pid: Pid },
    #[error("schedule selected processor {pid}, which is unknown or has already returned")]
    InvalidSchedule { pid: Pid },
}
