//! Workload ingestion: Standard Workload Format logs, 24-hour windows,
//! unitization into single-core one-hour tasks, and the three federation
//! scenarios.

mod sample;
mod scenario;
mod swf;
pub mod synth;

pub use sample::{peak_concurrent_demand, sample_window, unitize, WorkloadSample, DAY};
pub use scenario::{build_scenario, default_total_cores, ScenarioParams};
pub use swf::{parse_swf, read_swf, LogEntry, WorkloadLog};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("log contains no usable jobs")]
    EmptyLog,
    #[error("log spans {span} s, shorter than the requested {length} s window")]
    LogTooShort { span: i64, length: i64 },
    #[error("cannot give {n_orgs} organizations at least one core each from {total_cores} cores")]
    TooFewCores { n_orgs: usize, total_cores: u64 },
    #[error("a federation needs at least two organizations, got {0}")]
    TooFewOrganizations(usize),
    #[error("invalid scenario parameter: {0}")]
    BadParameter(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
