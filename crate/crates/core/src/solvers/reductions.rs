//! Wake-up solvers built from shared objects, and the epoch runner that
//! reuses one object for `k` consecutive instances.
//!
//! In epoch `e` (1-based) every raw object value is first corrected by
//! subtracting `(e - 1) n`.

use std::fmt;
use std::str::FromStr;

use crate::memsim::{
    run, Arena, ObjOp, ObjResponse, Outcome, Pid, Program, Request, SchedulePolicy, SeqObject, Step, Trace,
    WorkReport,
};
use crate::structures::{ApproxCounter, CasLoopFai, CounterObject, Perturbation, QueueKind, RelaxedQueue, RemovalPolicy};
use crate::wakeup::{check_trace, hard_params, reduction_profile, Verdict, WakeupParams};

use super::SolverError;

/// A rational `0 < num/den <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Epsilon {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Self, SolverError> {
        if den == 0 || num == 0 || num > den {
            return Err(SolverError::Epsilon(format!("{num}/{den} is not in (0, 1]")));
        }
        let g = gcd(num, den);
        Ok(Epsilon { num: num / g, den: den / g })
    }

    pub fn one() -> Self {
        Epsilon { num: 1, den: 1 }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn exact(&self, what: &str, numer: u64, denom: u64, n: usize) -> Result<u64, SolverError> {
        if !numer.is_multiple_of(denom) {
            return Err(SolverError::Epsilon(format!("{what} is not an integer for n = {n}, epsilon = {self}")));
        }
        Ok(numer / denom)
    }

    /// `epsilon n / 2`, required to be a positive integer.
    pub fn high_value(&self, n: usize) -> Result<u64, SolverError> {
        let v = self.exact("epsilon*n/2", n as u64 * self.num, 2 * self.den, n)?;
        if v == 0 {
            return Err(SolverError::Epsilon(format!("epsilon*n/2 is 0 for n = {n}, epsilon = {self}")));
        }
        Ok(v)
    }

    /// `(1 - epsilon) n / 2`, the approximate counter's slack.
    pub fn counter_slack(&self, n: usize) -> Result<u64, SolverError> {
        self.exact("(1-epsilon)*n/2", n as u64 * (self.den - self.num), 2 * self.den, n)
    }

    /// `(1 - epsilon) n`, the relaxed queue's slack.
    pub fn queue_slack(&self, n: usize) -> Result<u64, SolverError> {
        self.exact("(1-epsilon)*n", n as u64 * (self.den - self.num), self.den, n)
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Epsilon {
    type Err = SolverError;

    /// Accepts `p/q` or a decimal such as `0.25`.
    fn from_str(s: &str) -> Result<Self, SolverError> {
        let bad = || SolverError::Epsilon(format!("cannot parse {s:?}"));
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse().map_err(|_| bad())?;
            let q = q.trim().parse().map_err(|_| bad())?;
            return Epsilon::new(p, q);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Epsilon::new(int * den + frac, den)
    }
}

/// How a fetch-and-increment adapter reaches its object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaiImpl {
    /// Atomic object cell.
    Object,
    /// Read/CAS retry loop on word 0.
    CasLoop,
}

/// An object-to-wake-up reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reduction {
    /// One fetch-and-increment (initialized to 1), return the value.
    Fai(FaiImpl),
    /// Increment, then return the read value.
    Counter,
    /// Increment, read `t`, return `max(t - h, 1)` clamped to `[1, n]`,
    /// with `h = (1 - epsilon) n / 2`.
    ApproxCounter { epsilon: Epsilon, perturbation: Perturbation },
    /// One removal from a structure loaded with `1..=n` (reversed for a
    /// stack) with slack `(1 - epsilon) n`; return `epsilon n / 2` when the
    /// value exceeds `n - epsilon n / 2`, else 1.
    RelaxedDequeue { epsilon: Epsilon, kind: QueueKind, policy: RemovalPolicy },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Rule {
    Identity,
    Approx { slack: u64 },
    Threshold { threshold: u64, high: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Plan {
    ObjectFai,
    WordFai,
    IncThenRead,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Stage {
    Start,
    Fai(CasLoopFai),
    Incremented,
    Applied,
}

/// Per-processor adapter program.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdapterProgram {
    pid: Pid,
    n: usize,
    offset: u64,
    plan: Plan,
    rule: Rule,
    stage: Stage,
}

impl AdapterProgram {
    fn finish(&self, raw: u64) -> i64 {
        let corrected = raw as i64 - self.offset as i64;
        match self.rule {
            Rule::Identity => corrected,
            Rule::Approx { slack } => (corrected - slack as i64).max(1).clamp(1, self.n as i64),
            Rule::Threshold { threshold, high } => {
                if corrected > threshold as i64 {
                    high as i64
                } else {
                    1
                }
            }
        }
    }
}

fn applied_value(last: &Outcome) -> u64 {
    match last.expect_applied() {
        ObjResponse::Value(v) => v,
        other => panic!("object returned {other:?} where a value was expected"),
    }
}

impl Program for AdapterProgram {
    fn pid(&self) -> Pid {
        self.pid
    }

    fn step(&mut self, last: Outcome) -> Step {
        let apply = |op| Step::Request(Request::Apply { obj: 0, op });
        match &mut self.stage {
            Stage::Start => match self.plan {
                Plan::ObjectFai => {
                    self.stage = Stage::Applied;
                    apply(ObjOp::FetchAndIncrement)
                }
                Plan::WordFai => {
                    let mut op = CasLoopFai::new(0);
                    let req = op.next(&Outcome::Start).expect("first request");
                    self.stage = Stage::Fai(op);
                    Step::Request(req)
                }
                Plan::IncThenRead => {
                    self.stage = Stage::Incremented;
                    apply(ObjOp::Increment)
                }
                Plan::Remove => {
                    self.stage = Stage::Applied;
                    apply(ObjOp::Remove)
                }
            },
            Stage::Fai(op) => match op.next(&last) {
                Some(req) => Step::Request(req),
                None => {
                    let v = op.value().expect("completed");
                    Step::Return(self.finish(v))
                }
            },
            Stage::Incremented => {
                self.stage = Stage::Applied;
                apply(ObjOp::Read)
            }
            Stage::Applied => Step::Return(self.finish(applied_value(&last))),
        }
    }
}

/// Everything needed to run one wake-up instance.
pub struct Instance {
    pub params: WakeupParams,
    pub programs: Vec<Box<dyn Program>>,
    pub arena: Arena,
}

impl Reduction {
    pub fn name(&self) -> &'static str {
        match self {
            Reduction::Fai(FaiImpl::Object) => "fai",
            Reduction::Fai(FaiImpl::CasLoop) => "fai-casloop",
            Reduction::Counter => "counter-obj",
            Reduction::ApproxCounter { .. } => "approx-counter",
            Reduction::RelaxedDequeue { .. } => "relaxed-queue",
        }
    }

    /// The problem the reduction solves on `n` processors.
    pub fn params(&self, n: usize) -> Result<WakeupParams, SolverError> {
        if n == 0 {
            return Err(SolverError::NoProcessors);
        }
        match self {
            Reduction::Fai(_) | Reduction::Counter => Ok(hard_params(n)),
            Reduction::ApproxCounter { epsilon, .. } => {
                epsilon.counter_slack(n)?;
                Ok(reduction_profile(n, epsilon.high_value(n)? as u32)?)
            }
            Reduction::RelaxedDequeue { epsilon, .. } => {
                epsilon.queue_slack(n)?;
                Ok(reduction_profile(n, epsilon.high_value(n)? as u32)?)
            }
        }
    }

    /// Fresh memory for `ops` operations in total (one removal each for
    /// queues, which are loaded with `1..=ops`).
    pub fn arena(&self, n: usize, ops: usize) -> Result<Arena, SolverError> {
        let object: Box<dyn SeqObject> = match *self {
            Reduction::Fai(FaiImpl::CasLoop) => return Ok(Arena::with_image(vec![1], vec![])),
            Reduction::Fai(FaiImpl::Object) => Box::new(CounterObject::new(1)),
            Reduction::Counter => Box::new(CounterObject::new(0)),
            Reduction::ApproxCounter { epsilon, perturbation } => {
                Box::new(ApproxCounter::new(epsilon.counter_slack(n)?, perturbation))
            }
            Reduction::RelaxedDequeue { epsilon, kind, policy } => {
                let h = epsilon.queue_slack(n)? as usize;
                let values: Vec<u64> = match kind {
                    QueueKind::Lifo => (1..=ops as u64).rev().collect(),
                    _ => (1..=ops as u64).collect(),
                };
                Box::new(RelaxedQueue::loaded(kind, h, policy, values))
            }
        };
        Ok(Arena::new(0, vec![object]))
    }

    /// Programs for pids `1..=count` in epoch `epoch` of an `n`-processor
    /// plan. `count` is `n` except for the unchecked remainder.
    pub fn programs(&self, n: usize, epoch: usize, count: usize) -> Result<Vec<Box<dyn Program>>, SolverError> {
        let (plan, rule) = match *self {
            Reduction::Fai(FaiImpl::Object) => (Plan::ObjectFai, Rule::Identity),
            Reduction::Fai(FaiImpl::CasLoop) => (Plan::WordFai, Rule::Identity),
            Reduction::Counter => (Plan::IncThenRead, Rule::Identity),
            Reduction::ApproxCounter { epsilon, .. } => {
                (Plan::IncThenRead, Rule::Approx { slack: epsilon.counter_slack(n)? })
            }
            Reduction::RelaxedDequeue { epsilon, .. } => {
                epsilon.queue_slack(n)?;
                let high = epsilon.high_value(n)?;
                (Plan::Remove, Rule::Threshold { threshold: n as u64 - high, high })
            }
        };
        let offset = (epoch as u64 - 1) * n as u64;
        Ok((1..=count)
            .map(|pid| {
                Box::new(AdapterProgram { pid, n, offset, plan, rule, stage: Stage::Start }) as Box<dyn Program>
            })
            .collect())
    }

    /// A single instance on fresh memory.
    pub fn instance(&self, n: usize) -> Result<Instance, SolverError> {
        Ok(Instance { params: self.params(n)?, programs: self.programs(n, 1, n)?, arena: self.arena(n, n)? })
    }

    /// Completed object operations according to a work report.
    pub fn object_ops(&self, report: &WorkReport) -> u64 {
        match self {
            // each call ends with exactly one successful CAS
            Reduction::Fai(FaiImpl::CasLoop) => report.cas_successes,
            _ => report.object_applies,
        }
    }
}

/// `k` epochs of `n` processors plus `remainder` unchecked operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochPlan {
    pub k: usize,
    pub n: usize,
    pub remainder: usize,
}

impl EpochPlan {
    pub fn new(k: usize, n: usize) -> Self {
        EpochPlan { k, n, remainder: 0 }
    }

    /// Plan for `m` operations: `m / n` checked epochs, the rest unchecked.
    pub fn for_ops(m: usize, n: usize) -> Self {
        EpochPlan { k: m / n, n, remainder: m % n }
    }

    pub fn total_ops(&self) -> usize {
        self.k * self.n + self.remainder
    }

    /// Value subtracted from raw object values in 1-based epoch `e`.
    pub fn correction(&self, e: usize) -> u64 {
        (e as u64 - 1) * self.n as u64
    }
}

#[derive(Debug, Clone)]
pub struct EpochReport {
    pub verdicts: Vec<Verdict>,
    pub traces: Vec<Trace>,
    /// Work summed over all epochs and the remainder, per pid.
    pub work: WorkReport,
    pub object_ops: u64,
}

/// Schedule used in 1-based epoch `e`: seeded policies get a distinct seed
/// per epoch.
pub fn epoch_policy(policy: &SchedulePolicy, e: usize) -> SchedulePolicy {
    match policy {
        SchedulePolicy::SeededRandom(seed) => SchedulePolicy::SeededRandom(seed.wrapping_add(e as u64 - 1)),
        other => other.clone(),
    }
}

/// Runs the plan against one persistent object. Epochs run to completion
/// one after another (a barrier costing no work); each is checked against
/// the reduction's problem after correcting by `(e - 1) n`.
pub fn run_epochs(reduction: &Reduction, plan: EpochPlan, policy: &SchedulePolicy) -> Result<EpochReport, SolverError> {
    if plan.k == 0 {
        return Err(SolverError::NoEpochs);
    }
    let n = plan.n;
    let params = reduction.params(n)?;
    let mut arena = reduction.arena(n, plan.total_ops())?;
    let mut work = WorkReport::new(n);
    let mut verdicts = Vec::with_capacity(plan.k);
    let mut traces = Vec::with_capacity(plan.k);
    for e in 1..=plan.k {
        let r = run(reduction.programs(n, e, n)?, &epoch_policy(policy, e), arena)?;
        let verdict = check_trace(&params, &r.trace);
        if !verdict.passed() {
            return Err(SolverError::EpochFailed { epoch: e, verdict, trace: Box::new(r.trace) });
        }
        work.merge(&r.report);
        verdicts.push(verdict);
        traces.push(r.trace);
        arena = r.arena;
    }
    if plan.remainder > 0 {
        let r = run(reduction.programs(n, plan.k + 1, plan.remainder)?, &epoch_policy(policy, plan.k + 1), arena)?;
        work.merge(&r.report);
    }
    let object_ops = reduction.object_ops(&work);
    Ok(EpochReport { verdicts, traces, work, object_ops })
}
