use proptest::prelude::*;

use wakeup_lab::memsim::parallel::run_parallel;
use wakeup_lab::memsim::{run, run_with, Machine, RunOptions, SchedulePolicy, SimError};
use wakeup_lab::solvers::{counter_layout, counter_programs, tree_programs, TreeLayout};
use wakeup_lab::structures::{clients, version, Combine, FArrayLayout, FArrayOp};
use wakeup_lab::wakeup::{check_trace, easy_params, hard_params};

fn arb_scripts() -> impl Strategy<Value = (usize, Combine, Vec<Vec<FArrayOp>>)> {
    let combine = prop_oneof![Just(Combine::Sum), Just(Combine::Min), Just(Combine::Max)];
    (1usize..=6, combine).prop_flat_map(|(n, combine)| {
        let op = prop_oneof![(0u32..1000).prop_map(FArrayOp::Update), Just(FArrayOp::Query)];
        let script = proptest::collection::vec(op, 1..4);
        (Just(n), Just(combine), proptest::collection::vec(script, n))
    })
}

proptest! {
    #[test]
    fn internal_versions_never_decrease((n, combine, scripts) in arb_scripts(), seed in any::<u64>()) {
        let layout = FArrayLayout::new(n, combine, 0).unwrap();
        let internal: Vec<usize> = (1..layout.node_count()).filter(|&x| !layout.is_leaf(x)).map(|x| layout.addr(x)).collect();
        let mut last = vec![0u32; layout.word_count()];
        let r = run_with(
            clients(layout, &scripts).unwrap(),
            &SchedulePolicy::SeededRandom(seed),
            layout.arena(),
            RunOptions::default(),
            |m: &Machine| -> Result<(), SimError> {
                for &a in &internal {
                    let v = version(m.arena().words()[a]);
                    assert!(v >= last[a], "word {a} went from version {} to {v}", last[a]);
                    last[a] = v;
                }
                Ok(())
            },
        )
        .unwrap();
        prop_assert!(layout.is_consistent(r.arena.words()));
    }

    #[test]
    fn quiescent_root_is_the_fold_of_last_updates((n, combine, scripts) in arb_scripts(), seed in any::<u64>()) {
        let layout = FArrayLayout::new(n, combine, 0).unwrap();
        let r = run(clients(layout, &scripts).unwrap(), &SchedulePolicy::SeededRandom(seed), layout.arena()).unwrap();
        let leaves = scripts.iter().map(|s| {
            s.iter().rev().find_map(|op| match op { FArrayOp::Update(v) => Some(*v), FArrayOp::Query => None })
                .unwrap_or(combine.identity())
        });
        prop_assert_eq!(layout.peek(r.arena.words()), combine.fold(leaves));
    }
}

#[test]
fn parallel_backend_verdicts_pass() {
    for n in [1, 2, 3, 8, 16] {
        let l = counter_layout(n).unwrap();
        for _ in 0..20 {
            let out = run_parallel(counter_programs(l).unwrap(), l.arena(), 10_000).unwrap();
            let v = check_trace(&hard_params(n), &out.trace);
            assert!(v.passed(), "counter n={n}: {v}");
            assert!(l.is_consistent(&out.final_words));
        }
    }
    for n in [1, 2, 4, 16] {
        let l = TreeLayout::new(n).unwrap();
        for _ in 0..20 {
            let out = run_parallel(tree_programs(l), l.arena(), 10_000).unwrap();
            let v = check_trace(&easy_params(n), &out.trace);
            assert!(v.passed(), "tree n={n}: {v}");
        }
    }
}
