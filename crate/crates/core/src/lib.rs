//! A shared-memory concurrency laboratory for the generalized wake-up
//! problem family `J(s1, ..., sn)`.
//!
//! - [`memsim`]: deterministic step-level simulator of an asynchronous
//!   read/write/CAS machine with work accounting and schedule exploration.
//! - [`wakeup`]: problem parameters, trace checkers, the boolean/easy
//!   equivalence wrappers, and the reference lower-bound value.
//! - [`structures`]: the f-array, fetch-and-increment, and reference
//!   models of exact and relaxed objects.
//! - [`solvers`]: the tournament-tree and counter solvers, the object
//!   reductions, and the epoch runner.
//! - [`bench`]: experiment runner, scaling rows and CSV output.

pub mod bench;
pub mod memsim;
pub mod solvers;
pub mod structures;
pub mod wakeup;
