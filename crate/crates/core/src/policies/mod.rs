//! Scheduling policies.
//!
//! Three contribution-based variants rank an organization by the utility of
//! the work its machines ran for the federation minus the utility of its own
//! jobs; they differ only in the per-job utility function. FairShare and
//! round robin are the baselines.

mod select;
mod state;
mod utility;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use select::{select_org, select_task, Candidate};
pub use state::{Account, PolicyState, Priority};
pub use utility::{utility_psi, utility_psi_double_prime, utility_psi_prime};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("utility of job {job} is undefined at time {at}, before it ended at {end}")]
    BeforeCompletion {
        job: crate::JobId,
        at: i64,
        end: i64,
    },
    #[error("unknown algorithm '{0}' (valid: orig_direct, rel_direct, simpl_direct, fairshare, round_robin)")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Contribution minus utility with the start-time weighted utility.
    OrigDirect,
    /// As `OrigDirect`, with the release time offsetting late starts.
    RelDirect,
    /// Contribution minus utility measured as plain core-seconds.
    SimplDirect,
    /// Lowest consumed-to-contributed-cores ratio first.
    #[serde(rename = "fairshare")]
    FairShare,
    /// Least recently served organization first.
    RoundRobin,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::OrigDirect,
        PolicyKind::RelDirect,
        PolicyKind::SimplDirect,
        PolicyKind::FairShare,
        PolicyKind::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OrigDirect => "orig_direct",
            PolicyKind::RelDirect => "rel_direct",
            PolicyKind::SimplDirect => "simpl_direct",
            PolicyKind::FairShare => "fairshare",
            PolicyKind::RoundRobin => "round_robin",
        }
    }

    pub fn is_direct(self) -> bool {
        matches!(
            self,
            PolicyKind::OrigDirect | PolicyKind::RelDirect | PolicyKind::SimplDirect
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| PolicyError::UnknownKind(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_case_insensitively() {
        assert_eq!(
            "SIMPL_DIRECT".parse::<PolicyKind>(),
            Ok(PolicyKind::SimplDirect)
        );
        assert_eq!("FairShare".parse::<PolicyKind>(), Ok(PolicyKind::FairShare));
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>(), Ok(k));
        }
        let err = "lottery".parse::<PolicyKind>().unwrap_err();
        assert!(err.to_string().contains("round_robin"));
    }

    #[test]
    fn serde_uses_cli_names() {
        assert_eq!(
            serde_json::to_string(&PolicyKind::RoundRobin).unwrap(),
            "\"round_robin\""
        );
        assert_eq!(
            serde_json::to_string(&PolicyKind::FairShare).unwrap(),
            "\"fairshare\""
        );
    }
}
