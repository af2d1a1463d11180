use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FairnessError;
use crate::model::{FederationSetup, Job, OrgId, Time, SCHEMA_VERSION};
use crate::policies::PolicyKind;
use crate::sim::run_simulation;

/// Exact enumeration runs 2^N - 1 simulations; past this it is hopeless.
pub const MAX_ORGS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionEntry {
    pub members: Vec<OrgId>,
    /// Total wait of the coalition's jobs when it schedules alone.
    pub value: Time,
    /// Per-member total waits, when the entry comes from a simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waits: Option<BTreeMap<OrgId, Time>>,
}

/// Characteristic values of every nonempty coalition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionTable {
    pub schema_version: u32,
    pub organizations: Vec<OrgId>,
    pub entries: Vec<CoalitionEntry>,
}

pub fn format_coalition<'a>(members: impl IntoIterator<Item = &'a OrgId>) -> String {
    let names: Vec<&str> = members.into_iter().map(|o| o.as_str()).collect();
    format!("{{{}}}", names.join(","))
}

impl CoalitionTable {
    pub fn new(organizations: Vec<OrgId>) -> Self {
        CoalitionTable {
            schema_version: SCHEMA_VERSION,
            organizations,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn members_of(&self, mask: usize) -> Vec<OrgId> {
        self.organizations
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, o)| o.clone())
            .collect()
    }

    pub fn insert(
        &mut self,
        members: Vec<OrgId>,
        value: Time,
        waits: Option<BTreeMap<OrgId, Time>>,
    ) {
        self.entries.push(CoalitionEntry {
            members,
            value,
            waits,
        });
    }

    fn mask_of(&self, members: &[OrgId]) -> Result<usize, FairnessError> {
        let mut mask = 0usize;
        for m in members {
            let i = self
                .organizations
                .iter()
                .position(|o| o == m)
                .ok_or_else(|| FairnessError::UnknownMember(m.to_string()))?;
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Values indexed by member bitmask (bit i = `organizations[i]`), with
    /// `v(empty) = 0`. Fails on any missing, duplicated or inconsistent entry.
    pub fn characteristic(&self) -> Result<Vec<Time>, FairnessError> {
        let n = self.organizations.len();
        if n > MAX_ORGS {
            return Err(FairnessError::TooManyOrganizations(n));
        }
        let unique: BTreeSet<&OrgId> = self.organizations.iter().collect();
        if unique.len() != n {
            return Err(FairnessError::DuplicateCoalition(format_coalition(
                &self.organizations,
            )));
        }
        let mut values: Vec<Option<Time>> = vec![None; 1 << n];
        values[0] = Some(0);
        for entry in &self.entries {
            if entry.members.is_empty() {
                return Err(FairnessError::EmptyCoalition);
            }
            let mask = self.mask_of(&entry.members)?;
            let name = format_coalition(&entry.members);
            if mask.count_ones() as usize != entry.members.len() || values[mask].is_some() {
                return Err(FairnessError::DuplicateCoalition(name));
            }
            if entry.value < 0 {
                return Err(FairnessError::NegativeValue(name));
            }
            if let Some(waits) = &entry.waits {
                let keys: BTreeSet<&OrgId> = waits.keys().collect();
                let members: BTreeSet<&OrgId> = entry.members.iter().collect();
                if keys != members || waits.values().sum::<Time>() != entry.value {
                    return Err(FairnessError::InconsistentWaits(name));
                }
            }
            values[mask] = Some(entry.value);
        }
        values
            .iter()
            .enumerate()
            .map(|(mask, v)| {
                v.ok_or_else(|| {
                    FairnessError::MissingCoalition(format_coalition(&self.members_of(mask)))
                })
            })
            .collect()
    }

    pub fn entry(&self, members: &[OrgId]) -> Option<&CoalitionEntry> {
        let wanted: BTreeSet<&OrgId> = members.iter().collect();
        self.entries
            .iter()
            .find(|e| e.members.iter().collect::<BTreeSet<_>>() == wanted)
    }

    pub fn grand(&self) -> Option<&CoalitionEntry> {
        self.entry(&self.organizations)
    }
}

/// Simulate every nonempty coalition on its own machines and jobs.
///
/// Runs are independent and execute in parallel; entries come back in mask
/// order regardless of completion order.
pub fn coalition_sweep(
    setup: &FederationSetup,
    jobs: &[Job],
    kind: PolicyKind,
    seed: u64,
) -> Result<CoalitionTable, FairnessError> {
    let orgs = setup.org_ids();
    let n = orgs.len();
    if n > MAX_ORGS {
        return Err(FairnessError::TooManyOrganizations(n));
    }
    let mut table = CoalitionTable::new(orgs);
    let entries: Vec<Result<CoalitionEntry, FairnessError>> = (1usize..(1 << n))
        .into_par_iter()
        .map(|mask| {
            let members = table.members_of(mask);
            let set: BTreeSet<OrgId> = members.iter().cloned().collect();
            let sub_setup = setup.restrict(&set);
            let sub_jobs: Vec<Job> = jobs
                .iter()
                .filter(|j| j.owner.as_ref().is_some_and(|o| set.contains(o)))
                .cloned()
                .collect();
            let result = run_simulation(&sub_setup, &sub_jobs, kind, seed)?;
            Ok(CoalitionEntry {
                members,
                value: result.total_wait(),
                waits: Some(result.wait_per_org),
            })
        })
        .collect();
    for e in entries {
        table.entries.push(e?);
    }
    Ok(table)
}
