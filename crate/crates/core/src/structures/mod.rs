//! Shared data structures: the f-array, fetch-and-increment from words,
//! and reference objects (exact and approximate counters, relaxed queues)
//! for arena object cells.

mod fai;
mod farray;
pub mod linearize;
mod objects;

pub use fai::{CasLoopFai, FArrayFai, FaiCaller};
pub use farray::{
    clients, pack, payload, version, Combine, FArrayClient, FArrayError, FArrayLayout, FArrayOp, FArrayUpdate,
    MAX_PAYLOAD_31, MIN_IDENTITY,
};
pub use objects::{ApproxCounter, CounterObject, Perturbation, QueueKind, RelaxedQueue, RemovalPolicy};
