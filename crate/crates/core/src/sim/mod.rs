//! Deterministic discrete-event simulation of the federation brokers.
//!
//! One global clock orders every broker's events by `(time, sequence)`.
//! Events scheduled up front (job submissions, departures) therefore run
//! before events created later for the same instant. Same-instant
//! resource offers created together are shuffled with the run seed.

mod coordination;
mod engine;

pub use coordination::{ClaimError, CoordinationLayer};
pub use engine::{
    run_simulation, run_simulation_with, EventKind, SimConfig, SimOutcome, Simulation,
};

use thiserror::Error;

use crate::model::{OrgId, Violation};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid setup: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSetup(Vec<Violation>),
    #[error("organization {0} is not a federation member")]
    NotAMember(OrgId),
}
