//! Boolean/general wrappers, checked over every schedule for small `n`.

use wakeup_lab::memsim::{exhaustive_run, Arena, Outcome, Pid, Program, Request, Step};
use wakeup_lab::solvers::{TreeLayout, TreeProgram};
use wakeup_lab::wakeup::{
    check_boolean_trace, check_trace, easy_params, wrap_bool_as_general, wrap_general_as_bool, Clause, Verdict,
    FALSE, TRUE,
};

/// Boolean solver: bump word 0 with a read/CAS loop and answer true iff the
/// bump reached `claim_at`. Correct when `claim_at == n`.
#[derive(Debug, Clone, Hash)]
struct Bumper {
    pid: Pid,
    claim_at: u64,
    seen: Option<u64>,
}

impl Bumper {
    fn new(pid: Pid, claim_at: u64) -> Self {
        Bumper { pid, claim_at, seen: None }
    }
}

impl Program for Bumper {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        match (last, self.seen) {
            (Outcome::Read(v), _) => {
                self.seen = Some(v);
                Step::Request(Request::Cas { addr: 0, expected: v, new: v + 1 })
            }
            (Outcome::Cas(true), Some(v)) => Step::Return(if v + 1 >= self.claim_at { TRUE } else { FALSE }),
            _ => Step::Request(Request::Read(0)),
        }
    }
}

fn clauses(v: &Verdict) -> [bool; 3] {
    [Clause::Termination, Clause::Truthfulness, Clause::NonTriviality].map(|c| v.clause_ok(c))
}

/// Runs the bare and wrapped solver under the same schedules and compares
/// the boolean verdict with the easy-problem verdict clause by clause.
/// Returns (schedules, schedules where the bare solver failed).
fn compare_bool_wrapper(n: usize, claim_at: u64) -> (usize, usize) {
    let bare: Vec<Box<dyn Program>> = (1..=n).map(|p| Box::new(Bumper::new(p, claim_at)) as Box<dyn Program>).collect();
    let wrapped: Vec<Box<dyn Program>> = (1..=n)
        .map(|p| Box::new(wrap_bool_as_general(Bumper::new(p, claim_at), n)) as Box<dyn Program>)
        .collect();
    let a = exhaustive_run(bare, Arena::new(1, vec![]), 1000).unwrap();
    let b = exhaustive_run(wrapped, Arena::new(1, vec![]), 1000).unwrap();
    let (mut runs, mut failures) = (0, 0);
    for (x, y) in a.zip(b) {
        let (x, y) = (x.unwrap(), y.unwrap());
        assert_eq!(x.trace.events, y.trace.events);
        let vb = check_boolean_trace(n, &x.trace);
        let vg = check_trace(&easy_params(n), &y.trace);
        assert_eq!(clauses(&vb), clauses(&vg), "n={n} claim_at={claim_at}\n{vb}\n{vg}");
        runs += 1;
        failures += usize::from(!vb.passed());
    }
    (runs, failures)
}

#[test]
fn correct_boolean_solver_wraps_to_correct_easy_solver() {
    for n in 1..=3 {
        let (runs, failures) = compare_bool_wrapper(n, n as u64);
        assert!(runs > 0);
        assert_eq!(failures, 0, "n={n}");
    }
}

#[test]
fn premature_boolean_solver_fails_identically_when_wrapped() {
    for n in 2..=3 {
        let (runs, failures) = compare_bool_wrapper(n, n as u64 - 1);
        assert!(failures > 0 && failures <= runs, "n={n}: {failures} of {runs}");
    }
}

#[test]
fn tree_solver_wrapped_as_boolean_passes_whenever_easy_passes() {
    for (n, cap) in [(2, usize::MAX), (4, 20_000)] {
        let l = TreeLayout::new(n).unwrap();
        let bare: Vec<Box<dyn Program>> = (1..=n).map(|p| Box::new(TreeProgram::new(l, p)) as Box<dyn Program>).collect();
        let wrapped: Vec<Box<dyn Program>> = (1..=n)
            .map(|p| Box::new(wrap_general_as_bool(TreeProgram::new(l, p), n)) as Box<dyn Program>)
            .collect();
        let a = exhaustive_run(bare, l.arena(), 1000).unwrap();
        let b = exhaustive_run(wrapped, l.arena(), 1000).unwrap();
        for (x, y) in a.zip(b).take(cap) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!(check_trace(&easy_params(n), &x.trace).passed());
            assert!(check_boolean_trace(n, &y.trace).passed());
            let trues = y.trace.returns().filter(|&(_, _, v)| v == TRUE).count();
            let tops = x.trace.returns().filter(|&(_, _, v)| v == n as i64).count();
            assert_eq!(trues, tops);
        }
    }
}
