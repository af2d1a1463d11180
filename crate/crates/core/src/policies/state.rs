use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PolicyKind;
use crate::model::{CompletedRecord, FederationSetup, OrgId, Time};

/// Running sums for one organization.
///
/// For the time-weighted utilities the value of a set of jobs at time `T`
/// is `area * T - moment / 2`, so a pair of sums replaces the whole history.
/// Moments are stored doubled to stay integral.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    /// Core-seconds executed on this organization's machines.
    pub contribution_area: i64,
    pub contribution_moment: i128,
    /// Core-seconds of this organization's own jobs, wherever they ran.
    pub utility_area: i64,
    pub utility_moment: i128,
    /// Cores contributed to the federation (FairShare share).
    pub share: u64,
    /// Start time of the most recently started job (round robin).
    pub last_start: Option<Time>,
}

/// Comparable rank of an organization; greater means served first.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum Priority {
    /// Contribution minus utility. Doubled for the two time-weighted
    /// utilities, plain core-seconds for the surface utility.
    Balance(i128),
    /// FairShare: lower consumption per contributed core ranks higher; a
    /// zero share ranks below everything.
    Usage { consumed: i64, share: u64 },
    /// Round robin: never served ranks highest, then the earliest last start.
    LastServed(Option<Time>),
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        use Priority::*;
        match (self, other) {
            (Balance(a), Balance(b)) => a.cmp(b),
            (
                Usage {
                    consumed: ca,
                    share: sa,
                },
                Usage {
                    consumed: cb,
                    share: sb,
                },
            ) => match (*sa, *sb) {
                (0, 0) => Ordering::Equal,
                (0, _) => Ordering::Less,
                (_, 0) => Ordering::Greater,
                // ca/sa < cb/sb  <=>  ca*sb < cb*sa, and smaller ratio wins
                _ => (i128::from(*cb) * i128::from(*sa)).cmp(&(i128::from(*ca) * i128::from(*sb))),
            },
            (LastServed(a), LastServed(b)) => match (a, b) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Greater,
                (Some(_), None) => Ordering::Less,
                (Some(x), Some(y)) => y.cmp(x),
            },
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Priority {
    fn rank(&self) -> u8 {
        match self {
            Priority::Balance(_) => 0,
            Priority::Usage { .. } => 1,
            Priority::LastServed(_) => 2,
        }
    }
}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

/// Per-organization accumulators for one policy, plus the completion
/// history since the last compaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyState {
    kind: PolicyKind,
    accounts: BTreeMap<OrgId, Account>,
    history: Vec<CompletedRecord>,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, shares: impl IntoIterator<Item = (OrgId, u64)>) -> Self {
        let accounts = shares
            .into_iter()
            .map(|(org, share)| {
                (
                    org,
                    Account {
                        share,
                        ..Account::default()
                    },
                )
            })
            .collect();
        PolicyState {
            kind,
            accounts,
            history: Vec::new(),
        }
    }

    pub fn for_setup(kind: PolicyKind, setup: &FederationSetup) -> Self {
        Self::new(
            kind,
            setup
                .organizations
                .iter()
                .map(|o| (o.id.clone(), o.total_cores())),
        )
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn account(&self, org: &OrgId) -> Option<&Account> {
        self.accounts.get(org)
    }

    pub fn accounts(&self) -> &BTreeMap<OrgId, Account> {
        &self.accounts
    }

    /// Completions recorded since the last compaction.
    pub fn history(&self) -> &[CompletedRecord] {
        &self.history
    }

    pub fn set_share(&mut self, org: &OrgId, cores: u64) {
        self.accounts.entry(org.clone()).or_default().share = cores;
    }

    pub fn on_start(&mut self, owner: &OrgId, at: Time) {
        if self.kind == PolicyKind::RoundRobin {
            let acc = self.accounts.entry(owner.clone()).or_default();
            acc.last_start = Some(acc.last_start.map_or(at, |t| t.max(at)));
        }
    }

    pub fn on_completion(&mut self, record: &CompletedRecord) {
        let area = record.area();
        let wide = i128::from(area);
        let Some(owner) = record.owner().cloned() else {
            return;
        };
        match self.kind {
            PolicyKind::OrigDirect | PolicyKind::RelDirect | PolicyKind::SimplDirect => {
                let moment = match self.kind {
                    PolicyKind::OrigDirect => wide * i128::from(record.start + record.end - 1),
                    PolicyKind::RelDirect => {
                        wide * i128::from(record.start + record.end - 1 - 2 * record.job.release)
                    }
                    _ => 0,
                };
                let exec = self.accounts.entry(record.executor.clone()).or_default();
                exec.contribution_area += area;
                exec.contribution_moment += moment;
                let own = self.accounts.entry(owner).or_default();
                own.utility_area += area;
                own.utility_moment += moment;
            }
            PolicyKind::FairShare => {
                self.accounts.entry(owner).or_default().utility_area += area;
            }
            PolicyKind::RoundRobin => {}
        }
        self.history.push(record.clone());
    }

    pub fn priority(&self, org: &OrgId, at: Time) -> Option<Priority> {
        let acc = self.accounts.get(org)?;
        let balance = |area: i64, moment: i128| 2 * i128::from(area) * i128::from(at) - moment;
        Some(match self.kind {
            PolicyKind::OrigDirect | PolicyKind::RelDirect => Priority::Balance(
                balance(acc.contribution_area, acc.contribution_moment)
                    - balance(acc.utility_area, acc.utility_moment),
            ),
            PolicyKind::SimplDirect => {
                Priority::Balance(i128::from(acc.contribution_area - acc.utility_area))
            }
            PolicyKind::FairShare => Priority::Usage {
                consumed: acc.utility_area,
                share: acc.share,
            },
            PolicyKind::RoundRobin => Priority::LastServed(acc.last_start),
        })
    }

    /// The same state without its history; priorities are unaffected.
    pub fn compact(&self) -> PolicyState {
        PolicyState {
            kind: self.kind,
            accounts: self.accounts.clone(),
            history: Vec::new(),
        }
    }

    pub fn compact_in_place(&mut self) {
        self.history.clear();
        self.history.shrink_to_fit();
    }
}
