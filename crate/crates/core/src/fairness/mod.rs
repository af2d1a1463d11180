//! Fairness evaluation: simulate every coalition, take the Shapley value of
//! the resulting wait-time game as the fair target, measure how far a
//! schedule is from it, and rank algorithms by pairwise wins.

mod coalition;
mod report;
mod shapley;
mod tournament;

pub use coalition::{coalition_sweep, format_coalition, CoalitionEntry, CoalitionTable, MAX_ORGS};
pub use report::{evaluate_sample, AlgorithmFairness, ExactValue, FairnessReport, SampleMeta};
pub use shapley::{shapley, shapley_from_values};
pub use tournament::{tournament, unfairness, Norm};

use thiserror::Error;

use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("{0} organizations exceed the exact-enumeration limit of {MAX_ORGS}; Monte-Carlo estimation is not implemented")]
    TooManyOrganizations(usize),
    #[error("missing coalition {0}")]
    MissingCoalition(String),
    #[error("coalition {0} appears more than once")]
    DuplicateCoalition(String),
    #[error("coalition entry names unknown organization {0}")]
    UnknownMember(String),
    #[error("coalition entry has no members")]
    EmptyCoalition,
    #[error("coalition {0}: wait vector does not match its members or value")]
    InconsistentWaits(String),
    #[error("coalition {0} has a negative value")]
    NegativeValue(String),
    #[error("wait vector and Shapley vector cover different organizations")]
    MismatchedIndices,
    #[error("fairness evaluation needs unitized jobs (one core, one hour); job {0} is not")]
    NotUnitized(crate::JobId),
    #[error("arithmetic overflow in exact Shapley computation")]
    Overflow,
    #[error(transparent)]
    Sim(#[from] SimError),
}
