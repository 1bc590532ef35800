//! Wake-up solvers: the tournament tree for the easy problem, the
//! f-array counter for the hard problem, and reductions from shared
//! objects.

mod counter;
mod reductions;
mod tree;

pub use counter::{counter_layout, counter_programs, counter_steps_per_proc, CounterProgram};
pub use reductions::{
    epoch_policy, run_epochs, AdapterProgram, EpochPlan, EpochReport, Epsilon, FaiImpl, Instance, Reduction,
};
pub use tree::{tree_programs, TreeLayout, TreeMonitor, TreeProgram};

use thiserror::Error;

use crate::memsim::{SimError, Trace};
use crate::structures::FArrayError;
use crate::wakeup::{easy_params, hard_params, ParamsError, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("the tree solver needs a power-of-two processor count, got {0}")]
    NotPowerOfTwo(usize),
    #[error("at least one processor is required")]
    NoProcessors,
    #[error("at least one epoch is required")]
    NoEpochs,
    #[error("epsilon: {0}")]
    Epsilon(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    FArray(#[from] FArrayError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("epoch {epoch} failed: {verdict}")]
    EpochFailed { epoch: usize, verdict: Verdict, trace: Box<Trace> },
}

/// Any solver the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Tree,
    Counter,
    Reduction(Reduction),
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Tree => "tree",
            SolverKind::Counter => "counter",
            SolverKind::Reduction(r) => r.name(),
        }
    }

    /// Builds a fresh instance on `n` processors.
    pub fn instance(&self, n: usize) -> Result<Instance, SolverError> {
        match self {
            SolverKind::Tree => {
                let layout = TreeLayout::new(n)?;
                Ok(Instance { params: easy_params(n), programs: tree_programs(layout), arena: layout.arena() })
            }
            SolverKind::Counter => {
                let layout = counter_layout(n)?;
                Ok(Instance { params: hard_params(n), programs: counter_programs(layout)?, arena: layout.arena() })
            }
            SolverKind::Reduction(r) => r.instance(n),
        }
    }

    /// Rejects `n` values the solver cannot run, without building anything.
    pub fn validate(&self, n: usize) -> Result<(), SolverError> {
        match self {
            SolverKind::Tree => TreeLayout::new(n).map(|_| ()),
            SolverKind::Counter if n == 0 => Err(SolverError::NoProcessors),
            SolverKind::Counter => Ok(()),
            SolverKind::Reduction(r) => r.params(n).map(|_| ()),
        }
    }
}
