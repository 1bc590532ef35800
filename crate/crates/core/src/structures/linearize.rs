//! Brute-force linearizability check for f-array histories.

use crate::memsim::{Pid, Request, Trace};

use super::farray::{payload, FArrayLayout, FArrayOp};

/// A completed operation with its first and last event times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRecord {
    pub pid: Pid,
    pub op: FArrayOp,
    pub invoke: u64,
    pub respond: u64,
    /// Query result.
    pub result: Option<u32>,
}

impl OpRecord {
    fn precedes(&self, other: &OpRecord) -> bool {
        self.respond < other.invoke
    }
}

/// Splits each processor's events into its scripted operations using the
/// fixed per-operation step counts. Operations still in flight at the end
/// of the trace are omitted.
pub fn farray_history(layout: &FArrayLayout, scripts: &[Vec<FArrayOp>], trace: &Trace) -> Vec<OpRecord> {
    let mut history = Vec::new();
    for (i, ops) in scripts.iter().enumerate() {
        let pid = i + 1;
        let mut events = trace.events.iter().filter(|e| e.pid == pid);
        for &op in ops {
            let steps = match op {
                FArrayOp::Update(_) => layout.update_steps(),
                FArrayOp::Query => layout.query_steps(),
            };
            let taken: Vec<_> = events.by_ref().take(steps as usize).collect();
            if taken.len() < steps as usize {
                break;
            }
            let last = taken[taken.len() - 1];
            let result = match (op, &last.request) {
                (FArrayOp::Query, Request::Read(_)) => Some(payload(last.outcome.expect_read())),
                _ => None,
            };
            history.push(OpRecord { pid, op, invoke: taken[0].time, respond: last.time, result });
        }
    }
    history
}

/// Searches for a sequential order of `history` that respects real-time
/// precedence and in which every query returns the combine of the leaves
/// written so far. Returns indices into `history`.
pub fn find_witness(layout: &FArrayLayout, history: &[OpRecord]) -> Option<Vec<usize>> {
    assert!(history.len() <= 64, "history too long for brute-force search");
    let mut leaves = vec![layout.combine().identity(); layout.n()];
    let mut order = Vec::with_capacity(history.len());
    if search(layout, history, 0, &mut leaves, &mut order) {
        Some(order)
    } else {
        None
    }
}

fn search(layout: &FArrayLayout, history: &[OpRecord], placed: u64, leaves: &mut Vec<u32>, order: &mut Vec<usize>) -> bool {
    if order.len() == history.len() {
        return true;
    }
    for (i, op) in history.iter().enumerate() {
        if placed & (1 << i) != 0 {
            continue;
        }
        let blocked = history
            .iter()
            .enumerate()
            .any(|(j, other)| placed & (1 << j) == 0 && j != i && other.precedes(op));
        if blocked {
            continue;
        }
        match op.op {
            FArrayOp::Query => {
                if op.result != Some(layout.combine().fold(leaves.iter().copied())) {
                    continue;
                }
                order.push(i);
                if search(layout, history, placed | (1 << i), leaves, order) {
                    return true;
                }
                order.pop();
            }
            FArrayOp::Update(v) => {
                let prev = std::mem::replace(&mut leaves[op.pid - 1], v);
                order.push(i);
                if search(layout, history, placed | (1 << i), leaves, order) {
                    return true;
                }
                order.pop();
                leaves[op.pid - 1] = prev;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Combine;

    fn rec(pid: Pid, op: FArrayOp, invoke: u64, respond: u64, result: Option<u32>) -> OpRecord {
        OpRecord { pid, op, invoke, respond, result }
    }

    #[test]
    fn sequential_history_has_witness() {
        let l = FArrayLayout::new(2, Combine::Sum, 0).unwrap();
        let h = vec![
            rec(1, FArrayOp::Update(3), 1, 9, None),
            rec(2, FArrayOp::Query, 10, 10, Some(3)),
        ];
        assert_eq!(find_witness(&l, &h), Some(vec![0, 1]));
    }

    #[test]
    fn stale_query_after_update_has_none() {
        let l = FArrayLayout::new(2, Combine::Sum, 0).unwrap();
        let h = vec![
            rec(1, FArrayOp::Update(3), 1, 9, None),
            rec(2, FArrayOp::Query, 10, 10, Some(0)),
        ];
        assert_eq!(find_witness(&l, &h), None);
    }

    #[test]
    fn overlapping_query_may_see_either_state() {
        let l = FArrayLayout::new(2, Combine::Max, 0).unwrap();
        for seen in [0, 3] {
            let h = vec![
                rec(1, FArrayOp::Update(3), 1, 9, None),
                rec(2, FArrayOp::Query, 5, 5, Some(seen)),
            ];
            assert!(find_witness(&l, &h).is_some());
        }
        let h = vec![rec(1, FArrayOp::Update(3), 1, 9, None), rec(2, FArrayOp::Query, 5, 5, Some(2))];
        assert!(find_witness(&l, &h).is_none());
    }

    #[test]
    fn queries_must_agree_on_order() {
        // q1 sees the update, q2 does not, but q1 finished before q2 started
        let l = FArrayLayout::new(3, Combine::Sum, 0).unwrap();
        let h = vec![
            rec(1, FArrayOp::Update(1), 1, 20, None),
            rec(2, FArrayOp::Query, 5, 5, Some(1)),
            rec(3, FArrayOp::Query, 6, 6, Some(0)),
        ];
        assert!(find_witness(&l, &h).is_none());
    }
}
