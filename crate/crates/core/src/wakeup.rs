//! The generalized wake-up problem `J(s1, ..., sn)`.
//!
//! Each of `n` processors returns an integer in `[1, n]`. A processor may
//! return `k` only once at least `k` processors (itself included) have
//! taken a step, and with returns sorted ascending `r1 <= ... <= rn`, the
//! k-th smallest must be at least `sk`. The easy problem is
//! `J(1, ..., 1, n)`, the hard problem `J(1, 2, ..., n)`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::memsim::{Outcome, Pid, Program, RunStatus, Step, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("slack vector is empty")]
    Empty,
    #[error("slack vector must be non-decreasing (s{index} = {value} < s{prev_index} = {prev})")]
    Decreasing { index: usize, value: u32, prev_index: usize, prev: u32 },
    #[error("s{index} = {value} exceeds n = {n}")]
    TooLarge { index: usize, value: u32, n: usize },
    #[error("cannot parse slack entry {0:?}")]
    Parse(String),
}

/// Slack vector of one problem in the family: `0 <= s1 <= ... <= sn <= n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WakeupParams {
    s: Vec<u32>,
}

impl WakeupParams {
    pub fn new(s: Vec<u32>) -> Result<Self, ParamsError> {
        if s.is_empty() {
            return Err(ParamsError::Empty);
        }
        let n = s.len();
        for (i, &v) in s.iter().enumerate() {
            if v as usize > n {
                return Err(ParamsError::TooLarge { index: i + 1, value: v, n });
            }
            if i > 0 && v < s[i - 1] {
                return Err(ParamsError::Decreasing {
                    index: i + 1,
                    value: v,
                    prev_index: i,
                    prev: s[i - 1],
                });
            }
        }
        Ok(WakeupParams { s })
    }

    /// Parses a comma-separated slack vector such as `1,1,1,4`.
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let s = text
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|_| ParamsError::Parse(t.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(s)
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn s(&self) -> &[u32] {
        &self.s
    }

    /// `s_k`, 1-based.
    pub fn slack(&self, k: usize) -> u32 {
        self.s[k - 1]
    }
}

impl fmt::Display for WakeupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J(")?;
        for (i, v) in self.s.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// `J(1, ..., 1, n)`.
pub fn easy_params(n: usize) -> WakeupParams {
    assert!(n >= 1, "easy_params needs n >= 1");
    let mut s = vec![1; n];
    s[n - 1] = n as u32;
    WakeupParams { s }
}

/// `J(1, 2, ..., n)`.
pub fn hard_params(n: usize) -> WakeupParams {
    assert!(n >= 1, "hard_params needs n >= 1");
    WakeupParams { s: (1..=n as u32).collect() }
}

/// `s_i = 1` for the first `n - high` entries and `s_i = high` for the
/// last `high`: the profile reached by the approximate-object reductions.
pub fn reduction_profile(n: usize, high: u32) -> Result<WakeupParams, ParamsError> {
    let high_count = (high as usize).min(n);
    let s = (0..n).map(|i| if i < n - high_count { 1 } else { high }).collect();
    WakeupParams::new(s)
}

/// Reference magnitude `n + sum floor(log2 s_i)` (entries 0 and 1 add
/// nothing). Base 2 is used throughout; the value sizes reports and is not
/// a certified constant-factor bound.
pub fn lower_bound_value(params: &WakeupParams) -> u64 {
    params.n() as u64 + params.s.iter().filter(|&&v| v >= 1).map(|&v| u64::from(v.ilog2())).sum::<u64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    Termination,
    Truthfulness,
    NonTriviality,
}

impl Clause {
    pub fn name(self) -> &'static str {
        match self {
            Clause::Termination => "termination",
            Clause::Truthfulness => "truthfulness",
            Clause::NonTriviality => "nontriviality",
        }
    }
}

/// What a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Processor(Pid),
    /// Position `k` in the ascending order of returns.
    Rank(usize),
    Run,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub clause: Clause,
    pub subject: Subject,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub termination_ok: bool,
    pub truthfulness_ok: bool,
    pub nontriviality_ok: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { termination_ok: true, truthfulness_ok: true, nontriviality_ok: true, violations: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.termination_ok && self.truthfulness_ok && self.nontriviality_ok
    }

    pub fn clause_ok(&self, clause: Clause) -> bool {
        match clause {
            Clause::Termination => self.termination_ok,
            Clause::Truthfulness => self.truthfulness_ok,
            Clause::NonTriviality => self.nontriviality_ok,
        }
    }

    fn fail(&mut self, clause: Clause, subject: Subject, detail: String) {
        match clause {
            Clause::Termination => self.termination_ok = false,
            Clause::Truthfulness => self.truthfulness_ok = false,
            Clause::NonTriviality => self.nontriviality_ok = false,
        }
        self.violations.push(Violation { clause, subject, detail });
    }

    /// `clause,ok,detail` with one row per clause; details of multiple
    /// violations are joined with `; `.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("clause,ok,detail\n");
        for clause in [Clause::Termination, Clause::Truthfulness, Clause::NonTriviality] {
            let detail = self
                .violations
                .iter()
                .filter(|v| v.clause == clause)
                .map(|v| v.detail.replace(',', ";"))
                .collect::<Vec<_>>()
                .join("; ");
            writeln!(out, "{},{},{}", clause.name(), self.clause_ok(clause), detail).unwrap();
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (termination={}, truthfulness={}, nontriviality={})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.termination_ok,
            self.truthfulness_ok,
            self.nontriviality_ok
        )?;
        for v in self.violations.iter().take(5) {
            write!(f, "\n  {}: {}", v.clause.name(), v.detail)?;
        }
        if self.violations.len() > 5 {
            write!(f, "\n  ... {} more", self.violations.len() - 5)?;
        }
        Ok(())
    }
}

fn sorted_wake_times(trace: &Trace) -> Vec<u64> {
    let mut wakes: Vec<u64> = (1..=trace.n()).filter_map(|p| trace.wake_time(p)).collect();
    wakes.sort_unstable();
    wakes
}

fn check_run_status(trace: &Trace, verdict: &mut Verdict) {
    match trace.status {
        RunStatus::Complete => {}
        RunStatus::NonTermination { budget } => verdict.fail(
            Clause::Termination,
            Subject::Run,
            format!("step budget of {budget} events exhausted"),
        ),
        RunStatus::Truncated { depth } => verdict.fail(
            Clause::Termination,
            Subject::Run,
            format!("exploration truncated at depth {depth}"),
        ),
    }
}

/// Checks a trace against `J(params)`.
///
/// Truthfulness is evaluated at each return's timestamp, counting the
/// returning processor among the woken. Non-triviality is evaluated only
/// for complete traces.
pub fn check_trace(params: &WakeupParams, trace: &Trace) -> Verdict {
    let n = params.n();
    let mut verdict = Verdict::new();
    if trace.n() != n {
        verdict.fail(
            Clause::Termination,
            Subject::Run,
            format!("trace has {} processors but the problem has {n}", trace.n()),
        );
        return verdict;
    }
    check_run_status(trace, &mut verdict);
    for pid in 1..=n {
        match trace.return_value(pid) {
            None => {
                if trace.is_complete() {
                    verdict.fail(Clause::Termination, Subject::Processor(pid), format!("p{pid} never returned"));
                }
            }
            Some(v) if v < 1 || v > n as i64 => verdict.fail(
                Clause::Termination,
                Subject::Processor(pid),
                format!("p{pid} returned {v} outside [1;{n}]"),
            ),
            Some(_) => {}
        }
    }
    let wakes = sorted_wake_times(trace);
    for (pid, time, value) in trace.returns() {
        let woken = wakes.partition_point(|&w| w <= time);
        if value > woken as i64 {
            verdict.fail(
                Clause::Truthfulness,
                Subject::Processor(pid),
                format!("p{pid} returned {value} at time {time} with only {woken} woken"),
            );
        }
    }
    if trace.is_complete() {
        let mut returns: Vec<i64> = trace.returns().map(|(_, _, v)| v).collect();
        returns.sort_unstable();
        if returns.len() < n {
            verdict.fail(Clause::NonTriviality, Subject::Run, "not every processor returned".to_string());
        }
        for (k, &r) in returns.iter().enumerate() {
            let s = i64::from(params.slack(k + 1));
            if r < s {
                verdict.fail(
                    Clause::NonTriviality,
                    Subject::Rank(k + 1),
                    format!("sorted return r{} = {r} < s{} = {s}", k + 1, k + 1),
                );
            }
        }
    }
    verdict
}

/// Boolean return encoding used by [`check_boolean_trace`] and the wrappers.
pub const FALSE: i64 = 0;
pub const TRUE: i64 = 1;

/// Checks the boolean wake-up problem on `n` processors: everyone returns
/// a boolean, nobody returns true before all `n` have woken, and not all
/// return false.
pub fn check_boolean_trace(n: usize, trace: &Trace) -> Verdict {
    let mut verdict = Verdict::new();
    if trace.n() != n {
        verdict.fail(
            Clause::Termination,
            Subject::Run,
            format!("trace has {} processors but the problem has {n}", trace.n()),
        );
        return verdict;
    }
    check_run_status(trace, &mut verdict);
    for pid in 1..=n {
        match trace.return_value(pid) {
            None if trace.is_complete() => {
                verdict.fail(Clause::Termination, Subject::Processor(pid), format!("p{pid} never returned"))
            }
            Some(v) if v != FALSE && v != TRUE => verdict.fail(
                Clause::Termination,
                Subject::Processor(pid),
                format!("p{pid} returned non-boolean {v}"),
            ),
            _ => {}
        }
    }
    let wakes = sorted_wake_times(trace);
    for (pid, time, value) in trace.returns() {
        let woken = wakes.partition_point(|&w| w <= time);
        if value == TRUE && woken < n {
            verdict.fail(
                Clause::Truthfulness,
                Subject::Processor(pid),
                format!("p{pid} returned true at time {time} with only {woken} woken"),
            );
        }
    }
    if trace.is_complete() && trace.returns().all(|(_, _, v)| v != TRUE) {
        verdict.fail(Clause::NonTriviality, Subject::Run, "every processor returned false".to_string());
    }
    verdict
}

/// Runs a boolean wake-up program as an easy-problem program: false
/// becomes 1 and true becomes `n`. Other values pass through unchanged.
#[derive(Debug, Clone, Hash)]
pub struct BoolAsGeneral<P> {
    inner: P,
    n: usize,
}

pub fn wrap_bool_as_general<P: Program>(inner: P, n: usize) -> BoolAsGeneral<P> {
    BoolAsGeneral { inner, n }
}

impl<P: Program + Clone + std::hash::Hash + 'static> Program for BoolAsGeneral<P> {
    fn pid(&self) -> Pid {
        self.inner.pid()
    }

    fn step(&mut self, last: Outcome) -> Step {
        match self.inner.step(last) {
            Step::Return(FALSE) => Step::Return(1),
            Step::Return(TRUE) => Step::Return(self.n as i64),
            other => other,
        }
    }
}

/// Runs an easy-problem program as a boolean one: `n` becomes true and any
/// value in `[1, n)` becomes false. Other values pass through unchanged.
#[derive(Debug, Clone, Hash)]
pub struct GeneralAsBool<P> {
    inner: P,
    n: usize,
}

pub fn wrap_general_as_bool<P: Program>(inner: P, n: usize) -> GeneralAsBool<P> {
    GeneralAsBool { inner, n }
}

impl<P: Program + Clone + std::hash::Hash + 'static> Program for GeneralAsBool<P> {
    fn pid(&self) -> Pid {
        self.inner.pid()
    }

    fn step(&mut self, last: Outcome) -> Step {
        match self.inner.step(last) {
            Step::Return(v) if v == self.n as i64 => Step::Return(TRUE),
            Step::Return(v) if (1..self.n as i64).contains(&v) => Step::Return(FALSE),
            other => other,
        }
    }
}
