//! Checkers for reorderings, extensions, run invariants and the
//! limitation arguments.

pub mod corpus;
mod extract;
mod invariants;
mod limits;
mod reorder;

use thiserror::Error;

use crate::error::MachineError;

pub use extract::{
    extract_absence_detection, extract_base_run, extract_rendezvous, extract_weak_broadcast, Compiled, Extraction,
};
pub use invariants::{run_invariant_checks, CheckOutcome, InvariantCheck, Probe};
pub use limits::{
    check_covering_lockstep, check_cutoff_indistinguishable, halting_splice_witness, reset_initiator_counts,
    SpliceWitness,
};
pub use reorder::{
    check_extension, check_reordering, check_weak_extension, non_silent_steps, phase_counts, phase_shape_holds,
    reorder_three_phase, ThreePhaseReordering,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("LengthMismatch: {0}")]
    LengthMismatch(String),
    #[error("NotThreePhase: node {node} skips a phase at step {step}")]
    NotThreePhase { step: usize, node: usize },
    #[error("NotInitialPhase0: node {0} does not start in phase 0")]
    NotInitialPhase0(usize),
    #[error("NotWellFormed: {0}")]
    NotWellFormed(String),
    #[error("InapplicableCheck: {0}")]
    InapplicableCheck(String),
    #[error("NotExclusive: step {0} selects several nodes")]
    NotExclusive(usize),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

impl VerifyError {
    pub fn name(&self) -> &'static str {
        match self {
            VerifyError::LengthMismatch(_) => "LengthMismatch",
            VerifyError::NotThreePhase { .. } => "NotThreePhase",
            VerifyError::NotInitialPhase0(_) => "NotInitialPhase0",
            VerifyError::NotWellFormed(_) => "NotWellFormed",
            VerifyError::InapplicableCheck(_) => "InapplicableCheck",
            VerifyError::NotExclusive(_) => "NotExclusive",
            VerifyError::Machine(e) => e.name(),
        }
    }
}

#[cfg(test)]
mod tests;
