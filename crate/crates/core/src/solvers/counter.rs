//! Counter solver for the hard problem: add one to the caller's leaf of a
//! sum f-array, then return the aggregate.

use crate::memsim::{Outcome, Pid, Program, Step};
use crate::structures::{Combine, FArrayFai, FArrayLayout};

use super::SolverError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CounterProgram {
    pid: Pid,
    op: FArrayFai,
}

impl CounterProgram {
    pub fn new(layout: FArrayLayout, pid: Pid) -> Result<Self, SolverError> {
        Ok(CounterProgram { pid, op: FArrayFai::new(layout, pid, 0)? })
    }
}

impl Program for CounterProgram {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        match self.op.next(&last) {
            Some(req) => Step::Request(req),
            None => Step::Return(self.op.value().expect("query completed") as i64),
        }
    }
}

pub fn counter_layout(n: usize) -> Result<FArrayLayout, SolverError> {
    Ok(FArrayLayout::new(n, Combine::Sum, 0)?)
}

pub fn counter_programs(layout: FArrayLayout) -> Result<Vec<Box<dyn Program>>, SolverError> {
    (1..=layout.n())
        .map(|p| CounterProgram::new(layout, p).map(|c| Box::new(c) as Box<dyn Program>))
        .collect()
}

/// Steps each processor takes: the update plus one root read.
pub fn counter_steps_per_proc(n: usize) -> u64 {
    let depth = n.next_power_of_two().trailing_zeros();
    2 + 8 * u64::from(depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memsim::{run, SchedulePolicy};
    use crate::wakeup::{check_trace, hard_params};

    #[test]
    fn single_processor_returns_one() {
        let l = counter_layout(1).unwrap();
        let r = run(counter_programs(l).unwrap(), &SchedulePolicy::RoundRobin, l.arena()).unwrap();
        assert_eq!(r.trace.return_value(1), Some(1));
        assert_eq!(r.report.total, 2);
    }

    #[test]
    fn sequential_schedule_counts_up() {
        let l = counter_layout(4).unwrap();
        let per = counter_steps_per_proc(4) as usize;
        let schedule: Vec<_> = (1..=4).flat_map(|p| std::iter::repeat_n(p, per)).collect();
        let r = run(counter_programs(l).unwrap(), &SchedulePolicy::Explicit(schedule), l.arena()).unwrap();
        let got: Vec<_> = (1..=4).map(|p| r.trace.return_value(p).unwrap()).collect();
        assert_eq!(got, vec![1, 2, 3, 4]);
        assert!(check_trace(&hard_params(4), &r.trace).passed());
    }

    #[test]
    fn per_processor_work_is_fixed() {
        for n in [1, 2, 3, 4, 7, 16] {
            let l = counter_layout(n).unwrap();
            let r = run(counter_programs(l).unwrap(), &SchedulePolicy::SeededRandom(n as u64), l.arena()).unwrap();
            for p in 1..=n {
                assert_eq!(r.report.steps(p), counter_steps_per_proc(n));
            }
            assert!(check_trace(&hard_params(n), &r.trace).passed());
        }
    }
}
