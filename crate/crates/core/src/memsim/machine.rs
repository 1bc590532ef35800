use std::hash::Hasher;

use super::arena::Arena;
use super::program::{Outcome, Pid, Program, Request, Step};
use super::schedule::SchedulePolicy;
use super::trace::{RunStatus, Trace, WorkReport};
use super::SimError;

/// Default cap on events per run; exceeding it yields
/// [`RunStatus::NonTermination`].
pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone)]
enum Slot {
    Pending(Request),
    Returned,
}

/// The sequential machine: one owner advances it one event at a time.
#[derive(Debug, Clone)]
pub struct Machine {
    arena: Arena,
    programs: Vec<Box<dyn Program>>,
    slots: Vec<Slot>,
    /// Ascending unreturned pids.
    runnable: Vec<Pid>,
    trace: Trace,
    report: WorkReport,
}

impl Machine {
    /// Primes every program with [`Outcome::Start`] to obtain its first
    /// request. Programs must carry pids `1..=n` in order.
    pub fn new(mut programs: Vec<Box<dyn Program>>, arena: Arena) -> Result<Self, SimError> {
        if programs.is_empty() {
            return Err(SimError::NoPrograms);
        }
        let n = programs.len();
        let mut slots = Vec::with_capacity(n);
        for (index, p) in programs.iter_mut().enumerate() {
            if p.pid() != index + 1 {
                return Err(SimError::PidMismatch { index, pid: p.pid() });
            }
            match p.step(Outcome::Start) {
                Step::Request(r) => slots.push(Slot::Pending(r)),
                Step::Return(_) => return Err(SimError::ReturnWithoutStep { pid: index + 1 }),
            }
        }
        Ok(Machine {
            arena,
            programs,
            slots,
            runnable: (1..=n).collect(),
            trace: Trace::new(n),
            report: WorkReport::new(n),
        })
    }

    pub fn n(&self) -> usize {
        self.programs.len()
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn report(&self) -> &WorkReport {
        &self.report
    }

    pub fn is_returned(&self, pid: Pid) -> bool {
        matches!(self.slots.get(pid.wrapping_sub(1)), Some(Slot::Returned))
    }

    /// The request `pid` will issue on its next step.
    pub fn pending(&self, pid: Pid) -> Option<&Request> {
        match self.slots.get(pid.wrapping_sub(1)) {
            Some(Slot::Pending(r)) => Some(r),
            _ => None,
        }
    }

    /// Ascending list of unreturned pids.
    pub fn runnable(&self) -> &[Pid] {
        &self.runnable
    }

    pub fn is_done(&self) -> bool {
        self.runnable.is_empty()
    }

    /// Executes `pid`'s pending request as the next event.
    pub fn step(&mut self, pid: Pid) -> Result<(), SimError> {
        let request = match self.slots.get_mut(pid.wrapping_sub(1)) {
            Some(slot @ Slot::Pending(_)) => match std::mem::replace(slot, Slot::Returned) {
                Slot::Pending(r) => r,
                Slot::Returned => unreachable!(),
            },
            _ => return Err(SimError::InvalidSchedule { pid }),
        };
        let outcome = self.arena.mem_op(pid, &request)?;
        self.report.record(pid, &request, &outcome);
        let time = self.trace.push(pid, request, outcome.clone());
        match self.programs[pid - 1].step(outcome) {
            Step::Request(next) => self.slots[pid - 1] = Slot::Pending(next),
            Step::Return(value) => {
                self.trace.set_return(pid, time, value);
                if let Ok(i) = self.runnable.binary_search(&pid) {
                    self.runnable.remove(i);
                }
            }
        }
        Ok(())
    }

    pub(crate) fn set_status(&mut self, status: RunStatus) {
        self.trace.status = status;
    }

    pub(crate) fn hash_state(&self, state: &mut dyn Hasher) {
        self.arena.hash_state(state);
        for p in &self.programs {
            p.hash_state(state);
        }
    }

    pub fn finish(self) -> RunResult {
        RunResult { trace: self.trace, report: self.report, arena: self.arena }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub step_budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { step_budget: DEFAULT_STEP_BUDGET }
    }
}

/// Trace, work counts, and the final memory of a run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub report: WorkReport,
    pub arena: Arena,
}

/// Runs `programs` under `policy` until all return or the default budget
/// is exhausted.
pub fn run(
    programs: Vec<Box<dyn Program>>,
    policy: &SchedulePolicy,
    arena: Arena,
) -> Result<RunResult, SimError> {
    run_with(programs, policy, arena, RunOptions::default(), |_| Ok(()))
}

/// Like [`run`], with explicit options and an observer called after every
/// event. An observer error aborts the run and is returned as-is.
pub fn run_with<E>(
    programs: Vec<Box<dyn Program>>,
    policy: &SchedulePolicy,
    arena: Arena,
    options: RunOptions,
    mut observe: impl FnMut(&Machine) -> Result<(), E>,
) -> Result<RunResult, E>
where
    E: From<SimError>,
{
    let mut machine = Machine::new(programs, arena)?;
    let mut scheduler = policy.scheduler();
    while !machine.is_done() {
        if machine.trace.len() as u64 >= options.step_budget {
            machine.set_status(RunStatus::NonTermination { budget: options.step_budget });
            break;
        }
        let pid = scheduler.pick(machine.runnable());
        machine.step(pid)?;
        observe(&machine)?;
    }
    Ok(machine.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memsim::{replay, ObjOp};

    /// Reads address 0 `reads` times, then returns `value`.
    #[derive(Debug, Clone, Hash)]
    struct Reader {
        pid: Pid,
        reads: u32,
        value: i64,
    }

    impl Program for Reader {
        fn pid(&self) -> Pid {
            self.pid
        }
        fn step(&mut self, _last: Outcome) -> Step {
            if self.reads == 0 {
                return Step::Return(self.value);
            }
            self.reads -= 1;
            Step::Request(Request::Read(0))
        }
    }

    /// Spins on a CAS that never succeeds.
    #[derive(Debug, Clone, Hash)]
    struct Spinner;

    impl Program for Spinner {
        fn pid(&self) -> Pid {
            1
        }
        fn step(&mut self, _last: Outcome) -> Step {
            Step::Request(Request::Cas { addr: 0, expected: 1, new: 2 })
        }
    }

    fn readers(n: usize, reads: u32) -> Vec<Box<dyn Program>> {
        (1..=n).map(|pid| Box::new(Reader { pid, reads, value: 1 }) as Box<dyn Program>).collect()
    }

    #[test]
    fn single_read_then_return() {
        let r = run(readers(1, 1), &SchedulePolicy::RoundRobin, Arena::new(1, vec![])).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.report.total, 1);
        assert_eq!(r.trace.return_value(1), Some(1));
        assert_eq!(r.trace.wake_time(1), Some(1));
        assert_eq!(r.trace.return_time(1), Some(1));
    }

    #[test]
    fn round_robin_alternates() {
        let r = run(readers(2, 3), &SchedulePolicy::RoundRobin, Arena::new(1, vec![])).unwrap();
        let pids: Vec<_> = r.trace.events.iter().map(|e| e.pid).collect();
        assert_eq!(pids, vec![1, 2, 1, 2, 1, 2]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let go = || run(readers(4, 5), &SchedulePolicy::SeededRandom(99), Arena::new(1, vec![])).unwrap();
        let (a, b) = (go(), go());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn budget_exhaustion_is_nontermination() {
        let opts = RunOptions { step_budget: 100 };
        let r = run_with::<SimError>(
            vec![Box::new(Spinner)],
            &SchedulePolicy::RoundRobin,
            Arena::new(1, vec![]),
            opts,
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(r.trace.status, RunStatus::NonTermination { budget: 100 });
        assert_eq!(r.report.total, 100);
        assert_eq!(r.report.cas_successes, 0);
    }

    #[test]
    fn out_of_range_address_faults() {
        let err = run(readers(1, 1), &SchedulePolicy::RoundRobin, Arena::new(0, vec![])).unwrap_err();
        assert_eq!(err, SimError::WordOutOfRange { pid: 1, addr: 0, len: 0 });
    }

    #[test]
    fn explicit_schedule_rejects_returned_processor() {
        let policy = SchedulePolicy::Explicit(vec![1, 1]);
        let err = run(readers(2, 1), &policy, Arena::new(1, vec![])).unwrap_err();
        assert_eq!(err, SimError::InvalidSchedule { pid: 1 });
    }

    #[test]
    fn pids_must_be_in_order() {
        let progs: Vec<Box<dyn Program>> = vec![Box::new(Reader { pid: 2, reads: 1, value: 1 })];
        assert!(matches!(Machine::new(progs, Arena::default()), Err(SimError::PidMismatch { .. })));
        assert!(matches!(Machine::new(vec![], Arena::default()), Err(SimError::NoPrograms)));
        let progs: Vec<Box<dyn Program>> = vec![Box::new(Reader { pid: 1, reads: 0, value: 1 })];
        assert!(matches!(
            Machine::new(progs, Arena::default()),
            Err(SimError::ReturnWithoutStep { pid: 1 })
        ));
    }

    #[test]
    fn mem_op_semantics() {
        let mut a = Arena::new(1, vec![]);
        let cas = |e, n| Request::Cas { addr: 0, expected: e, new: n };
        assert_eq!(a.mem_op(1, &cas(0, 5)).unwrap(), Outcome::Cas(true));
        assert_eq!(a.word(0), Some(5));
        assert_eq!(a.mem_op(1, &cas(0, 7)).unwrap(), Outcome::Cas(false));
        assert_eq!(a.word(0), Some(5));
        assert_eq!(a.mem_op(1, &Request::Read(0)).unwrap(), Outcome::Read(5));
        let bad = a.mem_op(3, &Request::Apply { obj: 0, op: ObjOp::Read }).unwrap_err();
        assert_eq!(bad, SimError::ObjectOutOfRange { pid: 3, addr: 0, len: 0 });
    }

    #[test]
    fn trace_replays() {
        let arena = Arena::new(1, vec![]);
        let r = run(readers(3, 4), &SchedulePolicy::SeededRandom(3), arena.clone()).unwrap();
        replay(&r.trace, arena).unwrap();
    }
}
