//! Fair non-monetary load balancing across federated cloud providers.
//!
//! * [`model`] holds the shared value types and their JSON form.
//! * [`workload`] reads Standard Workload Format logs, samples windows,
//!   unitizes jobs and builds the three federation scenarios.
//! * [`policies`] implements the contribution-based selection rules along
//!   with FairShare and round robin.
//! * [`sim`] is the deterministic event-driven broker simulator.
//! * [`fairness`] runs coalition sweeps and computes Shapley values,
//!   unfairness and tournament scores.
//! * [`experiment`] ties it all into reproducible runs with CSV/JSON output.

pub mod experiment;
pub mod fairness;
pub mod model;
pub mod policies;
pub mod sim;
pub mod workload;

pub use model::{
    validate_setup, CompletedRecord, FederationSetup, Job, JobId, Machine, OrgId, Organization,
    Scenario, ScheduleResult, Time, Violation,
};
pub use policies::PolicyKind;
