use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::program::Pid;

/// How the adversary picks the next processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulePolicy {
    /// Rounds in pid order; every unreturned processor steps once per round.
    RoundRobin,
    /// Uniform choice among unreturned processors, reproducible from the seed.
    SeededRandom(u64),
    /// Follow the given pids; once exhausted, continue round-robin.
    Explicit(Vec<Pid>),
}

impl SchedulePolicy {
    pub fn scheduler(&self) -> Scheduler {
        let kind = match self {
            SchedulePolicy::RoundRobin => Kind::RoundRobin,
            SchedulePolicy::SeededRandom(seed) => Kind::Random(Box::new(ChaCha8Rng::seed_from_u64(*seed))),
            SchedulePolicy::Explicit(list) => Kind::Explicit { list: list.clone(), next: 0 },
        };
        Scheduler { kind, last: 0 }
    }

    pub fn label(&self) -> String {
        match self {
            SchedulePolicy::RoundRobin => "round-robin".to_string(),
            SchedulePolicy::SeededRandom(seed) => format!("random:{seed}"),
            SchedulePolicy::Explicit(list) => format!("explicit:{list:?}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    RoundRobin,
    Random(Box<ChaCha8Rng>),
    Explicit { list: Vec<Pid>, next: usize },
}

/// Stateful cursor of a [`SchedulePolicy`].
#[derive(Debug, Clone)]
pub struct Scheduler {
    kind: Kind,
    last: Pid,
}

impl Scheduler {
    /// Picks the next processor. `runnable` is the ascending list of
    /// unreturned pids and must be nonempty. An explicit schedule may name
    /// a pid that is not runnable; the caller rejects it.
    pub fn pick(&mut self, runnable: &[Pid]) -> Pid {
        debug_assert!(!runnable.is_empty());
        let pid = match &mut self.kind {
            Kind::RoundRobin => round_robin(self.last, runnable),
            Kind::Random(rng) => runnable[rng.gen_range(0..runnable.len())],
            Kind::Explicit { list, next } => match list.get(*next) {
                Some(&pid) => {
                    *next += 1;
                    pid
                }
                None => round_robin(self.last, runnable),
            },
        };
        self.last = pid;
        pid
    }
}

fn round_robin(last: Pid, runnable: &[Pid]) -> Pid {
    let i = runnable.partition_point(|&p| p <= last);
    runnable.get(i).copied().unwrap_or(runnable[0])
}
