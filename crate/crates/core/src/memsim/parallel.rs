//! Parallel backend: the same [`Program`]s on OS threads.
//!
//! Word operations map to `SeqCst` atomics and object cells sit behind a
//! mutex, so every operation is linearizable. A shared ticket counter
//! orders events: a ticket is drawn before each operation and once more
//! after a processor's final operation to stamp its return. The resulting
//! trace is *not* replayable (a ticket and its operation are not one atomic
//! step), but wake/return ordering is conservative: if a return can
//! legitimately depend on another processor's first step, that step's
//! ticket precedes the return ticket. Use it only for checks that hold
//! under every schedule; work accounting belongs to the sequential machine.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::arena::{Arena, SeqObject};
use super::program::{Outcome, Pid, Program, Request, Step};
use super::trace::{Event, RunStatus, Trace, WorkReport};
use super::SimError;

struct SharedArena {
    words: Vec<AtomicU64>,
    objects: Vec<Mutex<Box<dyn SeqObject>>>,
}

impl SharedArena {
    fn mem_op(&self, pid: Pid, request: &Request) -> Result<Outcome, SimError> {
        let word = |addr: usize| {
            self.words.get(addr).ok_or(SimError::WordOutOfRange { pid, addr, len: self.words.len() })
        };
        Ok(match *request {
            Request::Read(addr) => Outcome::Read(word(addr)?.load(Ordering::SeqCst)),
            Request::Write(addr, v) => {
                word(addr)?.store(v, Ordering::SeqCst);
                Outcome::Written
            }
            Request::Cas { addr, expected, new } => Outcome::Cas(
                word(addr)?
                    .compare_exchange(expected, new, Ordering::SeqCst, Ordering::SeqCst)
                    .is_ok(),
            ),
            Request::Apply { obj, op } => {
                let cell = self.objects.get(obj).ok_or(SimError::ObjectOutOfRange {
                    pid,
                    addr: obj,
                    len: self.objects.len(),
                })?;
                let mut guard = cell.lock().unwrap_or_else(|e| e.into_inner());
                Outcome::Applied(
                    guard.apply(op).map_err(|fault| SimError::Object { pid, addr: obj, fault })?,
                )
            }
        })
    }
}

struct Log {
    pid: Pid,
    events: Vec<(u64, Request, Outcome)>,
    ret: Option<(u64, i64)>,
}

/// Result of a parallel run.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub trace: Trace,
    pub report: WorkReport,
    pub final_words: Vec<u64>,
}

/// Runs each program on its own thread until all return, or until a
/// processor exceeds `per_proc_budget` operations.
pub fn run_parallel(
    mut programs: Vec<Box<dyn Program>>,
    arena: Arena,
    per_proc_budget: u64,
) -> Result<ParallelRun, SimError> {
    if programs.is_empty() {
        return Err(SimError::NoPrograms);
    }
    for (index, p) in programs.iter().enumerate() {
        if p.pid() != index + 1 {
            return Err(SimError::PidMismatch { index, pid: p.pid() });
        }
    }
    let n = programs.len();
    let (words, objects) = arena.into_parts();
    let shared = SharedArena {
        words: words.into_iter().map(AtomicU64::new).collect(),
        objects: objects.into_iter().map(Mutex::new).collect(),
    };
    let tickets = AtomicU64::new(1);

    let logs: Vec<Result<Log, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = programs
            .iter_mut()
            .map(|program| {
                let shared = &shared;
                let tickets = &tickets;
                scope.spawn(move || {
                    let pid = program.pid();
                    let mut log = Log { pid, events: Vec::new(), ret: None };
                    let mut next = program.step(Outcome::Start);
                    loop {
                        match next {
                            Step::Return(v) => {
                                if log.events.is_empty() {
                                    return Err(SimError::ReturnWithoutStep { pid });
                                }
                                log.ret = Some((tickets.fetch_add(1, Ordering::SeqCst), v));
                                return Ok(log);
                            }
                            Step::Request(req) => {
                                if log.events.len() as u64 >= per_proc_budget {
                                    return Ok(log);
                                }
                                let ticket = tickets.fetch_add(1, Ordering::SeqCst);
                                let outcome = shared.mem_op(pid, &req)?;
                                log.events.push((ticket, req, outcome.clone()));
                                next = program.step(outcome);
                            }
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let mut all = Vec::new();
    let mut returns = Vec::new();
    let mut status = RunStatus::Complete;
    for log in logs {
        let log = log?;
        if log.ret.is_none() {
            status = RunStatus::NonTermination { budget: per_proc_budget };
        }
        for (ticket, req, out) in log.events {
            all.push((ticket, log.pid, req, out));
        }
        if let Some((ticket, v)) = log.ret {
            returns.push((log.pid, ticket, v));
        }
    }
    all.sort_by_key(|e| e.0);
    let op_tickets: Vec<u64> = all.iter().map(|e| e.0).collect();
    let mut report = WorkReport::new(n);
    let events = all
        .into_iter()
        .enumerate()
        .map(|(i, (_, pid, request, outcome))| {
            report.record(pid, &request, &outcome);
            Event { time: i as u64 + 1, pid, request, outcome }
        })
        .collect();
    let returns = returns
        .into_iter()
        .map(|(pid, ticket, v)| (pid, op_tickets.partition_point(|&t| t < ticket) as u64, v))
        .collect();
    let trace = Trace::from_parts(n, events, returns, status)
        .expect("ticket order yields a consistent trace");
    let final_words = shared.words.into_iter().map(AtomicU64::into_inner).collect();
    Ok(ParallelRun { trace, report, final_words })
}
