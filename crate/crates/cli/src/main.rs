//! `wakeup`: run, check, and measure wake-up solvers on the simulated
//! machine. Exit status 0 means every verdict passed, 1 means a verdict or
//! structural check failed, 2 means bad input.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use wakeup_lab::bench::{
    emit_csv, rows_to_csv, run_experiment, BenchError, ExperimentSpec, DEFAULT_SEED_BASE, DEFAULT_SEED_COUNT,
};
use wakeup_lab::memsim::{
    exhaustive_run, explore_states, parse_trace, run, write_trace, Arena, Program, SchedulePolicy, Trace,
};
use wakeup_lab::solvers::{run_epochs, EpochPlan, Epsilon, FaiImpl, Instance, Reduction, SolverError, SolverKind};
use wakeup_lab::structures::linearize::{farray_history, find_witness};
use wakeup_lab::structures::{clients, Combine, FArrayLayout, FArrayOp, Perturbation, QueueKind, RemovalPolicy};
use wakeup_lab::wakeup::{check_boolean_trace, check_trace, easy_params, hard_params, Verdict, WakeupParams};

const FAILURE_TRACE: &str = "wakeup-failure.trace";

#[derive(Parser)]
#[command(name = "wakeup", version, about = "Wake-up solvers on a simulated asynchronous shared-memory machine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instance (or one epoch plan) and check it.
    Solve(SolveArgs),
    /// Check an exported trace against a wake-up problem.
    Check(CheckArgs),
    /// Measure total work over a range of n and emit the scaling CSV.
    Scale(ScaleArgs),
    /// Check every schedule of a small instance.
    Exhaust(ExhaustArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverName {
    Tree,
    Counter,
    Fai,
    FaiCasloop,
    CounterObj,
    ApproxCounter,
    RelaxedQueue,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindName {
    Queue,
    Stack,
    Pq,
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureName {
    #[value(name = "farray-sum")]
    Sum,
    #[value(name = "farray-min")]
    Min,
    #[value(name = "farray-max")]
    Max,
}

impl StructureName {
    fn combine(self) -> Combine {
        match self {
            StructureName::Sum => Combine::Sum,
            StructureName::Min => Combine::Min,
            StructureName::Max => Combine::Max,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "tree")]
    solver: SolverName,
    /// Accuracy of the approximate objects, as `p/q` or a decimal.
    #[arg(long, default_value = "1/2")]
    epsilon: Epsilon,
    /// Relaxed structure flavor.
    #[arg(long, value_enum, default_value = "queue")]
    kind: KindName,
    /// Removal choice of the relaxed structure: strict, hth, random:SEED or fixed:RANK.
    #[arg(long, default_value = "hth", value_parser = parse_removal)]
    removal: RemovalPolicy,
    /// Read error of the approximate counter: exact, seeded:SEED or fixed:OFFSET.
    #[arg(long, default_value = "exact", value_parser = parse_perturbation)]
    perturb: Perturbation,
}

impl SolverArgs {
    fn kind(&self) -> SolverKind {
        let epsilon = self.epsilon;
        match self.solver {
            SolverName::Tree => SolverKind::Tree,
            SolverName::Counter => SolverKind::Counter,
            SolverName::Fai => SolverKind::Reduction(Reduction::Fai(FaiImpl::Object)),
            SolverName::FaiCasloop => SolverKind::Reduction(Reduction::Fai(FaiImpl::CasLoop)),
            SolverName::CounterObj => SolverKind::Reduction(Reduction::Counter),
            SolverName::ApproxCounter => {
                SolverKind::Reduction(Reduction::ApproxCounter { epsilon, perturbation: self.perturb })
            }
            SolverName::RelaxedQueue => {
                let kind = match self.kind {
                    KindName::Queue => QueueKind::Fifo,
                    KindName::Stack => QueueKind::Lifo,
                    KindName::Pq => QueueKind::MinPriority,
                };
                SolverKind::Reduction(Reduction::RelaxedDequeue { epsilon, kind, policy: self.removal })
            }
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Run an f-array instead of a solver: every processor updates its leaf, then queries.
    #[arg(long, value_enum)]
    structure: Option<StructureName>,
    #[arg(long)]
    n: usize,
    /// round-robin, random:SEED or explicit:P,P,...
    #[arg(long, default_value = "round-robin", value_parser = parse_policy)]
    policy: SchedulePolicy,
    /// Consecutive instances against one object (reductions only).
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// Write the trace here (the failing one, if a check fails).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the verdict CSV here.
    #[arg(long)]
    verdict: Option<PathBuf>,
    /// Write per-processor work CSV here.
    #[arg(long)]
    work: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("problem").required(true).args(["s", "easy", "hard", "boolean"])))]
struct CheckArgs {
    /// Trace file in the export format.
    #[arg(long)]
    trace: PathBuf,
    /// Slack vector, e.g. 1,1,1,4.
    #[arg(long)]
    s: Option<String>,
    /// Easy problem on n processors.
    #[arg(long)]
    easy: Option<usize>,
    /// Hard problem on n processors.
    #[arg(long)]
    hard: Option<usize>,
    /// Boolean problem on the trace's processors (returns 0 = false, 1 = true).
    #[arg(long)]
    boolean: bool,
    #[arg(long)]
    verdict: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Processor counts, e.g. 4,8,16.
    #[arg(long, value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    /// Number of seeded-random schedules per n.
    #[arg(long, default_value_t = DEFAULT_SEED_COUNT)]
    seeds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED_BASE)]
    seed_base: u64,
    /// Skip the round-robin schedule.
    #[arg(long)]
    no_round_robin: bool,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Where to export a failing trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExhaustArgs {
    #[command(flatten)]
    solver: SolverArgs,
    /// Check f-array linearizability instead: each processor updates, then queries.
    #[arg(long, value_enum)]
    structure: Option<StructureName>,
    #[arg(long)]
    n: usize,
    /// Stop after this many schedules.
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
    /// Events per schedule before it counts as truncated.
    #[arg(long, default_value_t = 10_000)]
    depth: u64,
    /// Merge equivalent prefixes and visit each terminal state once.
    #[arg(long)]
    memo: bool,
    /// Where to export a failing trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn parse_removal(s: &str) -> Result<RemovalPolicy, String> {
    match s.split_once(':') {
        None if s == "strict" => Ok(RemovalPolicy::StrictFirst),
        None if s == "hth" => Ok(RemovalPolicy::AlwaysHth),
        Some(("random", seed)) => seed.parse().map(RemovalPolicy::SeededRandom).map_err(|e| e.to_string()),
        Some(("fixed", rank)) => rank.parse().map(RemovalPolicy::Fixed).map_err(|e| e.to_string()),
        _ => Err(format!("expected strict, hth, random:SEED or fixed:RANK, got {s:?}")),
    }
}

fn parse_perturbation(s: &str) -> Result<Perturbation, String> {
    match s.split_once(':') {
        None if s == "exact" => Ok(Perturbation::Exact),
        Some(("seeded", seed)) => seed.parse().map(Perturbation::Seeded).map_err(|e| e.to_string()),
        Some(("fixed", off)) => off.parse().map(Perturbation::Fixed).map_err(|e| e.to_string()),
        _ => Err(format!("expected exact, seeded:SEED or fixed:OFFSET, got {s:?}")),
    }
}

fn parse_policy(s: &str) -> Result<SchedulePolicy, String> {
    match s.split_once(':') {
        None if s == "round-robin" => Ok(SchedulePolicy::RoundRobin),
        Some(("random", seed)) => seed.parse().map(SchedulePolicy::SeededRandom).map_err(|e| e.to_string()),
        Some(("explicit", list)) => list
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(SchedulePolicy::Explicit),
        _ => Err(format!("expected round-robin, random:SEED or explicit:P,P,..., got {s:?}")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn save_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_trace(trace, &mut out).and_then(|_| out.flush()).with_context(|| format!("writing {}", path.display()))
}

fn save_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Exports a failing trace and tells the user where it went.
fn export_failure(trace: &Trace, path: Option<&PathBuf>) -> Result<()> {
    let path = path.cloned().unwrap_or_else(|| PathBuf::from(FAILURE_TRACE));
    save_trace(trace, &path)?;
    eprintln!("offending trace written to {}", path.display());
    Ok(())
}

fn print_returns(trace: &Trace) {
    let mut rets: Vec<_> = trace.returns().collect();
    rets.sort_unstable();
    if rets.len() > 32 {
        let mut values: Vec<i64> = rets.iter().map(|r| r.2).collect();
        values.sort_unstable();
        println!("returns: {} processors, min {}, max {}", values.len(), values[0], values[values.len() - 1]);
        return;
    }
    let text: Vec<String> = rets.iter().map(|(p, t, v)| format!("p{p}={v}@{t}")).collect();
    println!("returns: {}", text.join(" "));
}

fn print_verdict(v: &Verdict) {
    println!("verdict: {}", if v.passed() { "PASS" } else { "FAIL" });
    if !v.passed() {
        println!("{v}");
    }
}

fn solve(args: SolveArgs) -> Result<bool> {
    if let Some(structure) = args.structure {
        return solve_structure(&args, structure.combine());
    }
    let kind = args.solver.kind();
    kind.validate(args.n)?;
    println!("solver {} n={} policy {}", kind.name(), args.n, args.policy.label());
    if args.epochs > 1 {
        let SolverKind::Reduction(r) = kind else {
            bail!("{} does not run in epochs", kind.name());
        };
        return solve_epochs(&args, &r);
    }
    let Instance { params, programs, arena } = kind.instance(args.n)?;
    println!("problem {params}");
    let out = run(programs, &args.policy, arena)?;
    let verdict = check_trace(&params, &out.trace);
    print_returns(&out.trace);
    print_verdict(&verdict);
    let r = &out.report;
    println!(
        "work: total {} per-proc max {} reads {} writes {} cas {} ({} succeeded) object ops {}",
        r.total, r.per_proc_max(), r.reads, r.writes, r.cas_attempts, r.cas_successes, r.object_applies
    );
    if let Some(p) = &args.work {
        save_text(&r.to_csv(), p)?;
    }
    if let Some(p) = &args.verdict {
        save_text(&verdict.to_csv(), p)?;
    }
    if !verdict.passed() {
        export_failure(&out.trace, args.trace.as_ref())?;
    } else if let Some(p) = &args.trace {
        save_trace(&out.trace, p)?;
    }
    Ok(verdict.passed())
}

fn solve_epochs(args: &SolveArgs, r: &Reduction) -> Result<bool> {
    println!("problem {} in each of {} epochs", r.params(args.n)?, args.epochs);
    match run_epochs(r, EpochPlan::new(args.epochs, args.n), &args.policy) {
        Ok(rep) => {
            for (e, v) in rep.verdicts.iter().enumerate() {
                println!("epoch {}: {}", e + 1, if v.passed() { "PASS" } else { "FAIL" });
            }
            println!("work: total {} object ops {}", rep.work.total, rep.object_ops);
            if let Some(p) = &args.work {
                save_text(&rep.work.to_csv(), p)?;
            }
            if let (Some(p), Some(v)) = (&args.verdict, rep.verdicts.last()) {
                save_text(&v.to_csv(), p)?;
            }
            if let (Some(p), Some(t)) = (&args.trace, rep.traces.last()) {
                save_trace(t, p)?;
            }
            Ok(true)
        }
        Err(SolverError::EpochFailed { epoch, verdict, trace }) => {
            println!("epoch {epoch}: FAIL");
            println!("{verdict}");
            if let Some(p) = &args.verdict {
                save_text(&verdict.to_csv(), p)?;
            }
            export_failure(&trace, args.trace.as_ref())?;
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

/// Leaf value written by `pid` in the structure runs.
fn update_value(pid: usize) -> u32 {
    (pid as u32).wrapping_mul(7919) % 1000
}

fn farray_scripts(n: usize) -> Vec<Vec<FArrayOp>> {
    (1..=n).map(|p| vec![FArrayOp::Update(update_value(p)), FArrayOp::Query]).collect()
}

fn solve_structure(args: &SolveArgs, combine: Combine) -> Result<bool> {
    let layout = FArrayLayout::new(args.n, combine, 0)?;
    println!("f-array {} n={} policy {}", combine.name(), args.n, args.policy.label());
    let out = run(clients(layout, &farray_scripts(args.n))?, &args.policy, layout.arena())?;
    let expected = combine.fold((1..=args.n).map(update_value));
    let root = layout.peek(out.arena.words());
    let consistent = layout.is_consistent(out.arena.words());
    let fixed_cost = (1..=args.n).all(|p| out.report.steps(p) == layout.update_steps() + layout.query_steps());
    println!(
        "steps per processor: update {} + query {}; quiescent query {root}, expected {expected}",
        layout.update_steps(),
        layout.query_steps()
    );
    let ok = root == expected && consistent && fixed_cost;
    println!("check: {}", if ok { "PASS" } else { "FAIL" });
    if let Some(p) = &args.work {
        save_text(&out.report.to_csv(), p)?;
    }
    if !ok {
        export_failure(&out.trace, args.trace.as_ref())?;
    } else if let Some(p) = &args.trace {
        save_trace(&out.trace, p)?;
    }
    Ok(ok)
}

fn check(args: CheckArgs) -> Result<bool> {
    let file = File::open(&args.trace).with_context(|| format!("cannot open {}", args.trace.display()))?;
    let trace = parse_trace(BufReader::new(file)).with_context(|| format!("reading {}", args.trace.display()))?;
    let verdict = if args.boolean {
        check_boolean_trace(trace.n(), &trace)
    } else {
        let params = match (&args.s, args.easy, args.hard) {
            (Some(s), _, _) => WakeupParams::parse(s)?,
            (_, Some(n), _) => easy_params(n),
            (_, _, Some(n)) => hard_params(n),
            _ => unreachable!("clap requires one problem"),
        };
        println!("problem {params}");
        check_trace(&params, &trace)
    };
    print_verdict(&verdict);
    if let Some(p) = &args.verdict {
        save_text(&verdict.to_csv(), p)?;
    }
    Ok(verdict.passed())
}

fn scale(args: ScaleArgs) -> Result<bool> {
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| args.seed_base.wrapping_add(i)).collect();
    let spec = ExperimentSpec {
        solver: args.solver.kind(),
        ns: args.ns.clone(),
        round_robin: !args.no_round_robin,
        seeds,
        epochs: args.epochs,
    };
    eprintln!(
        "solver {} epochs {} round-robin {} seeds {}..={} ({} schedules)",
        spec.solver.name(),
        spec.epochs,
        spec.round_robin,
        args.seed_base,
        args.seed_base.wrapping_add(args.seeds.saturating_sub(1) as u64),
        args.seeds
    );
    let rows = match run_experiment(&spec) {
        Ok(rows) => rows,
        Err(BenchError::VerdictFailed { n, policy, verdict, trace }) => {
            eprintln!("verdict failed for n={n} under {policy}\n{verdict}");
            export_failure(&trace, args.trace.as_ref())?;
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    match &args.csv {
        Some(p) => emit_csv(&rows, p)?,
        None => io::stdout().write_all(rows_to_csv(&rows).as_bytes())?,
    }
    Ok(true)
}

fn exhaust(args: ExhaustArgs) -> Result<bool> {
    if let Some(structure) = args.structure {
        return exhaust_structure(&args, structure.combine());
    }
    let kind = args.solver.kind();
    let Instance { params, programs, arena } = kind.instance(args.n)?;
    println!("solver {} n={} problem {params}", kind.name(), args.n);
    if args.memo {
        let mut failure: Option<Trace> = None;
        let mut bad = 0u64;
        let stats = explore_states(programs, arena, args.depth, |trace, _| {
            if !check_trace(&params, trace).passed() {
                bad += 1;
                failure.get_or_insert_with(|| trace.clone());
            }
        })?;
        println!(
            "{} states, {} terminal states, {} truncated, {bad} failing",
            stats.states, stats.terminals, stats.truncated
        );
        if let Some(t) = &failure {
            export_failure(t, args.trace.as_ref())?;
        }
        return Ok(failure.is_none() && stats.truncated == 0);
    }
    let (count, complete, failure) = each_schedule(programs, arena, &args, |t| check_trace(&params, t).passed())?;
    report_schedules(count, complete, failure.is_some());
    if let Some(t) = &failure {
        println!("{}", check_trace(&params, t));
        export_failure(t, args.trace.as_ref())?;
    }
    Ok(failure.is_none())
}

fn report_schedules(count: usize, complete: bool, failed: bool) {
    if failed {
        println!("schedule {count} failed; stopped");
    } else {
        println!("{count} schedules{}, all pass", if complete { " (all)" } else { " (capped)" });
    }
}

/// Runs `ok` on every schedule up to the cap and stops at the first
/// failure. Returns (schedules seen, whether all were seen, failure).
fn each_schedule(
    programs: Vec<Box<dyn Program>>,
    arena: Arena,
    args: &ExhaustArgs,
    mut ok: impl FnMut(&Trace) -> bool,
) -> Result<(usize, bool, Option<Trace>)> {
    let mut it = exhaustive_run(programs, arena, args.depth)?;
    let mut count = 0;
    for e in it.by_ref().take(args.cap) {
        let e = e?;
        count += 1;
        if !e.trace.is_complete() || !ok(&e.trace) {
            return Ok((count, false, Some(e.trace)));
        }
    }
    Ok((count, it.next().is_none(), None))
}

fn exhaust_structure(args: &ExhaustArgs, combine: Combine) -> Result<bool> {
    let layout = FArrayLayout::new(args.n, combine, 0)?;
    let scripts = farray_scripts(args.n);
    println!("f-array {} n={}: update then query per processor", combine.name(), args.n);
    let (count, complete, failure) = each_schedule(clients(layout, &scripts)?, layout.arena(), args, |t| {
        find_witness(&layout, &farray_history(&layout, &scripts, t)).is_some()
    })?;
    report_schedules(count, complete, failure.is_some());
    if let Some(t) = &failure {
        export_failure(t, args.trace.as_ref())?;
    }
    Ok(failure.is_none())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Check(a) => check(a),
        Command::Scale(a) => scale(a),
        Command::Exhaust(a) => exhaust(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
