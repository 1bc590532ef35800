use std::path::Path;
use std::process::{Command, Output};

fn wakeup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wakeup")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_exports_a_trace_that_check_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    let verdict = dir.path().join("v.csv");
    let work = dir.path().join("w.csv");
    let o = wakeup(&[
        "solve", "--solver", "tree", "--n", "4", "--policy", "random:9",
        "--trace", arg(&trace), "--verdict", arg(&verdict), "--work", arg(&work),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: PASS"));
    assert!(std::fs::read_to_string(&verdict).unwrap().starts_with("clause,ok,detail\n"));
    assert!(std::fs::read_to_string(&work).unwrap().starts_with("pid,steps\n"));

    let o = wakeup(&["check", "--trace", arg(&trace), "--easy", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn failing_check_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    // p1 runs alone and returns 1, then p2 returns 2
    let o = wakeup(&["solve", "--n", "2", "--policy", "explicit:1,1,2,2,2", "--trace", arg(&trace)]);
    assert_eq!(o.status.code(), Some(0));
    let verdict = dir.path().join("v.csv");
    let o = wakeup(&["check", "--trace", arg(&trace), "--s", "2,2", "--verdict", arg(&verdict)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("verdict: FAIL"));
    assert!(std::fs::read_to_string(&verdict).unwrap().contains("nontriviality,false"));
}

#[test]
fn boolean_check_reads_zero_one_returns() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    // n = 2 tree returns 1 and 2; as booleans the 2 is not a valid answer
    wakeup(&["solve", "--n", "2", "--policy", "explicit:1,1,2,2,2", "--trace", arg(&trace)]);
    let o = wakeup(&["check", "--trace", arg(&trace), "--boolean"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scale_is_reproducible_and_prints_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = wakeup(&["scale", "--solver", "tree", "--ns", "2,4,8", "--seeds", "4", "--csv", arg(p)]);
        assert_eq!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stderr).contains("seeds"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,total_work,per_proc_max,lower_bound,ratio_linear,ratio_nlogn");
    assert_eq!(lines.len(), 4);
    for row in &lines[1..] {
        let ratio: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!(ratio <= 6.0, "{row}");
    }
}

#[test]
fn tree_rejects_non_power_of_two() {
    let o = wakeup(&["solve", "--solver", "tree", "--n", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("power-of-two"));
    let o = wakeup(&["scale", "--solver", "tree", "--ns", "2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exhaust_counts_every_schedule() {
    let o = wakeup(&["exhaust", "--solver", "tree", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("14 schedules (all), all pass"), "{}", stdout(&o));
    let o = wakeup(&["exhaust", "--solver", "fai", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("6 schedules (all)"));
    let o = wakeup(&["exhaust", "--structure", "farray-max", "--n", "2", "--cap", "2000"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn epochs_and_relaxed_structures() {
    for kind in ["queue", "stack", "pq"] {
        let o = wakeup(&[
            "solve", "--solver", "relaxed-queue", "--kind", kind, "--epsilon", "0.5", "--n", "8",
            "--epochs", "3", "--policy", "random:4",
        ]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", stdout(&o));
        assert!(stdout(&o).contains("object ops 24"));
    }
    let o = wakeup(&["solve", "--solver", "relaxed-queue", "--removal", "fixed:7", "--n", "8"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank 7"));
}

#[test]
fn farray_structure_run() {
    let o = wakeup(&["solve", "--structure", "farray-sum", "--n", "64", "--policy", "random:1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("check: PASS"));
}
