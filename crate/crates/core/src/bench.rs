//! Experiment harness: runs a solver over a range of `n` under a battery of
//! schedules, checks every run, and tabulates total work.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::memsim::{run, SchedulePolicy, Trace, WorkReport};
use crate::solvers::{run_epochs, EpochPlan, SolverError, SolverKind};
use crate::wakeup::{check_trace, lower_bound_value, Verdict, WakeupParams};

/// First seed of the default random schedules.
pub const DEFAULT_SEED_BASE: u64 = 0x5EED_2024;
pub const DEFAULT_SEED_COUNT: usize = 10;

pub const CSV_HEADER: &str = "n,total_work,per_proc_max,lower_bound,ratio_linear,ratio_nlogn";

pub fn default_seeds(count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| DEFAULT_SEED_BASE + i).collect()
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("n = {n} under {policy}: {verdict}")]
    VerdictFailed { n: usize, policy: String, verdict: Verdict, trace: Box<Trace> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub solver: SolverKind,
    pub ns: Vec<usize>,
    pub round_robin: bool,
    pub seeds: Vec<u64>,
    /// Consecutive instances per run; only reductions support more than 1.
    pub epochs: usize,
}

impl ExperimentSpec {
    /// Round-robin plus the default seeded schedules, one epoch.
    pub fn new(solver: SolverKind, ns: Vec<usize>) -> Self {
        ExperimentSpec { solver, ns, round_robin: true, seeds: default_seeds(DEFAULT_SEED_COUNT), epochs: 1 }
    }

    pub fn policies(&self) -> Vec<SchedulePolicy> {
        let mut out = Vec::with_capacity(self.seeds.len() + 1);
        if self.round_robin {
            out.push(SchedulePolicy::RoundRobin);
        }
        out.extend(self.seeds.iter().map(|&s| SchedulePolicy::SeededRandom(s)));
        out
    }

    /// Rejects experiments the solver cannot run.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.epochs == 0 {
            return Err(SolverError::NoEpochs.into());
        }
        if self.epochs > 1 && !matches!(self.solver, SolverKind::Reduction(_)) {
            return Err(SolverError::Invariant(format!("{} does not run in epochs", self.solver.name())).into());
        }
        for &n in &self.ns {
            self.solver.validate(n)?;
        }
        Ok(())
    }
}

/// One checked run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub n: usize,
    pub policy: SchedulePolicy,
    pub params: WakeupParams,
    /// Verdict of the run, or of its last epoch.
    pub verdict: Verdict,
    pub report: WorkReport,
    /// Present for single-instance runs.
    pub trace: Option<Trace>,
}

/// Runs and checks one instance (or one epoch plan). A failed verdict is
/// an error carrying the offending trace.
pub fn run_one(solver: &SolverKind, n: usize, policy: &SchedulePolicy, epochs: usize) -> Result<RunSummary, BenchError> {
    if epochs > 1 {
        let SolverKind::Reduction(r) = solver else {
            return Err(SolverError::Invariant(format!("{} does not run in epochs", solver.name())).into());
        };
        let rep = run_epochs(r, EpochPlan::new(epochs, n), policy).map_err(|e| match e {
            SolverError::EpochFailed { epoch, verdict, trace } => BenchError::VerdictFailed {
                n,
                policy: format!("{} (epoch {epoch})", policy.label()),
                verdict,
                trace,
            },
            other => other.into(),
        })?;
        return Ok(RunSummary {
            n,
            policy: policy.clone(),
            params: r.params(n)?,
            verdict: rep.verdicts.last().expect("at least one epoch").clone(),
            report: rep.work,
            trace: None,
        });
    }
    let inst = solver.instance(n)?;
    let r = run(inst.programs, policy, inst.arena).map_err(SolverError::from)?;
    let verdict = check_trace(&inst.params, &r.trace);
    if !verdict.passed() {
        return Err(BenchError::VerdictFailed { n, policy: policy.label(), verdict, trace: Box::new(r.trace) });
    }
    Ok(RunSummary { n, policy: policy.clone(), params: inst.params, verdict, report: r.report, trace: Some(r.trace) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    /// Largest total work over the schedule battery.
    pub total_work: u64,
    pub per_proc_max: u64,
    pub lower_bound: u64,
    pub ratio_linear: f64,
    /// Absent for `n = 1`.
    pub ratio_nlogn: Option<f64>,
}

impl ScalingRow {
    pub fn new(n: usize, total_work: u64, per_proc_max: u64, lower_bound: u64) -> Self {
        let nf = n as f64;
        let ratio_nlogn = (n >= 2).then(|| total_work as f64 / (nf * nf.log2()));
        ScalingRow { n, total_work, per_proc_max, lower_bound, ratio_linear: total_work as f64 / nf, ratio_nlogn }
    }
}

/// Runs every `(n, schedule)` pair, in parallel, and returns one row per
/// `n` sorted by `n`. The lower bound column is the reference value per
/// instance times the number of epochs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ScalingRow>, BenchError> {
    spec.validate()?;
    let policies = spec.policies();
    let jobs: Vec<(usize, &SchedulePolicy)> =
        spec.ns.iter().flat_map(|&n| policies.iter().map(move |p| (n, p))).collect();
    let runs: Vec<RunSummary> = jobs
        .into_par_iter()
        .map(|(n, p)| {
            let mut s = run_one(&spec.solver, n, p, spec.epochs)?;
            s.trace = None;
            Ok(s)
        })
        .collect::<Result<_, BenchError>>()?;
    let mut ns = spec.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns
        .into_iter()
        .map(|n| {
            let mine = runs.iter().filter(|r| r.n == n);
            let total = mine.clone().map(|r| r.report.total).max().unwrap_or(0);
            let per_proc = mine.clone().map(|r| r.report.per_proc_max()).max().unwrap_or(0);
            let lb = mine.map(|r| lower_bound_value(&r.params)).max().unwrap_or(0) * spec.epochs as u64;
            ScalingRow::new(n, total, per_proc, lb)
        })
        .collect())
}

/// CSV text for `rows`, sorted by `n`.
pub fn rows_to_csv(rows: &[ScalingRow]) -> String {
    let mut sorted: Vec<&ScalingRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        let nlogn = r.ratio_nlogn.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{}", r.n, r.total_work, r.per_proc_max, r.lower_bound, r.ratio_linear, nlogn)
            .unwrap();
    }
    out
}

pub fn emit_csv(rows: &[ScalingRow], path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, rows_to_csv(rows)).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

pub fn parse_csv(text: &str) -> Result<Vec<ScalingRow>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(BenchError::Csv { line: 1, msg: format!("expected header {CSV_HEADER:?}") }),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |msg: String| BenchError::Csv { line: i + 1, msg };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", f.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
            let float = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            Ok(ScalingRow {
                n: int(f[0])? as usize,
                total_work: int(f[1])?,
                per_proc_max: int(f[2])?,
                lower_bound: int(f[3])?,
                ratio_linear: float(f[4])?,
                ratio_nlogn: if f[5].is_empty() { None } else { Some(float(f[5])?) },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(rows_to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_hand_built_row() {
        let row = ScalingRow::new(2, 9, 5, 3);
        assert_eq!(row.ratio_linear, 4.5);
        assert_eq!(row.ratio_nlogn, Some(4.5));
        assert_eq!(rows_to_csv(&[row]), format!("{CSV_HEADER}\n2,9,5,3,4.5,4.5\n"));
        let single = ScalingRow::new(1, 2, 2, 1);
        assert_eq!(rows_to_csv(&[single]), format!("{CSV_HEADER}\n1,2,2,1,2,\n"));
    }

    #[test]
    fn emitted_files_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![ScalingRow::new(8, 40, 7, 11), ScalingRow::new(4, 19, 6, 6)];
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_csv(&rows, &a).unwrap();
        emit_csv(&rows, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let parsed = parse_csv(&std::fs::read_to_string(&a).unwrap()).unwrap();
        assert_eq!(parsed.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 8]);
    }

    #[test]
    fn unwritable_path_names_itself() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn tree_rows_stay_under_linear_bound() {
        let rows = run_experiment(&ExperimentSpec::new(SolverKind::Tree, vec![2, 4, 8])).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.ratio_linear <= 6.0, "{r:?}");
            assert!(r.total_work <= 2 * (3 * r.n as u64 - 1));
        }
    }

    #[test]
    fn tree_rejects_three() {
        let err = run_experiment(&ExperimentSpec::new(SolverKind::Tree, vec![2, 3])).unwrap_err();
        assert!(matches!(err, BenchError::Solver(SolverError::NotPowerOfTwo(3))));
    }

    #[test]
    fn counter_rows_are_exact() {
        let rows = run_experiment(&ExperimentSpec::new(SolverKind::Counter, vec![1, 4, 5])).unwrap();
        assert_eq!(rows[0].total_work, 2);
        assert_eq!(rows[0].ratio_nlogn, None);
        assert_eq!(rows[1].per_proc_max, 2 + 8 * 2);
        assert_eq!(rows[2].total_work, 5 * (2 + 8 * 3));
    }

    proptest! {
        #[test]
        fn csv_round_trips(raw in proptest::collection::vec((1usize..5000, 0u64..1_000_000, 0u64..10_000, 0u64..100_000), 0..20)) {
            let rows: Vec<ScalingRow> = raw.iter().map(|&(n, t, p, l)| ScalingRow::new(n, t, p, l)).collect();
            let mut sorted = rows.clone();
            sorted.sort_by_key(|r| r.n);
            let parsed = parse_csv(&rows_to_csv(&rows)).unwrap();
            prop_assert_eq!(parsed, sorted);
        }
    }
}
