//! In-memory coordination layer: the shared queue of published jobs, claim
//! ownership and completion bookkeeping.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{CompletedRecord, Job, JobId, OrgId, Time};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClaimError {
    #[error("job {0} is not waiting")]
    NotWaiting(JobId),
    #[error("job {job} is already claimed by {by}")]
    AlreadyClaimed { job: JobId, by: OrgId },
}

#[derive(Clone, Debug, Default)]
pub struct CoordinationLayer {
    /// Waiting jobs per owner, ordered by (release, id).
    waiting: BTreeMap<OrgId, BTreeSet<(Time, JobId)>>,
    bodies: HashMap<JobId, Job>,
    claims: BTreeMap<JobId, OrgId>,
    completions: Vec<CompletedRecord>,
    members: BTreeSet<OrgId>,
}

impl CoordinationLayer {
    pub fn new(members: impl IntoIterator<Item = OrgId>) -> Self {
        CoordinationLayer {
            members: members.into_iter().collect(),
            ..Default::default()
        }
    }

    pub fn members(&self) -> &BTreeSet<OrgId> {
        &self.members
    }

    pub fn is_member(&self, org: &OrgId) -> bool {
        self.members.contains(org)
    }

    pub fn leave(&mut self, org: &OrgId) -> bool {
        self.members.remove(org)
    }

    /// Add a job to the shared queue. Jobs without an owner are ignored.
    pub fn publish(&mut self, job: Job) {
        let Some(owner) = job.owner.clone() else {
            return;
        };
        self.claims.remove(&job.id);
        self.waiting
            .entry(owner)
            .or_default()
            .insert((job.release, job.id));
        self.bodies.insert(job.id, job);
    }

    /// First claim wins; the job leaves the waiting set atomically.
    pub fn claim(&mut self, job: JobId, by: &OrgId) -> Result<Job, ClaimError> {
        if let Some(holder) = self.claims.get(&job) {
            return Err(ClaimError::AlreadyClaimed {
                job,
                by: holder.clone(),
            });
        }
        let body = self
            .bodies
            .remove(&job)
            .ok_or(ClaimError::NotWaiting(job))?;
        if let Some(owner) = &body.owner {
            if let Some(set) = self.waiting.get_mut(owner) {
                set.remove(&(body.release, job));
                if set.is_empty() {
                    self.waiting.remove(owner);
                }
            }
        }
        self.claims.insert(job, by.clone());
        Ok(body)
    }

    /// Drop the claim of a job whose executor left, so it can be republished.
    pub fn release_claim(&mut self, job: JobId) -> Option<OrgId> {
        self.claims.remove(&job)
    }

    pub fn claimant(&self, job: JobId) -> Option<&OrgId> {
        self.claims.get(&job)
    }

    /// Remove every waiting job of `owner`, returning their ids in order.
    pub fn withdraw_owner(&mut self, owner: &OrgId) -> Vec<JobId> {
        let ids: Vec<JobId> = self
            .waiting
            .remove(owner)
            .map(|set| set.into_iter().map(|(_, id)| id).collect())
            .unwrap_or_default();
        for id in &ids {
            self.bodies.remove(id);
        }
        ids
    }

    pub fn complete(&mut self, record: CompletedRecord) {
        self.completions.push(record);
    }

    pub fn completions(&self) -> &[CompletedRecord] {
        &self.completions
    }

    /// Forget completion history once it has been folded into a summary.
    pub fn compact(&mut self) {
        self.completions.clear();
    }

    pub fn has_waiting(&self, owner: &OrgId) -> bool {
        self.waiting.contains_key(owner)
    }

    pub fn waiting_len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_waiting(&self, job: JobId) -> bool {
        self.bodies.contains_key(&job)
    }

    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.bodies.get(&id)
    }

    pub fn owners(&self) -> impl Iterator<Item = &OrgId> {
        self.waiting.keys()
    }

    /// Waiting jobs of `owner` in longest-waiting-first order.
    pub fn waiting_of<'a>(&'a self, owner: &OrgId) -> impl Iterator<Item = &'a Job> + 'a {
        self.waiting
            .get(owner)
            .into_iter()
            .flatten()
            .map(move |(_, id)| &self.bodies[id])
    }

    pub fn waiting_ids(&self) -> Vec<JobId> {
        let mut ids: Vec<JobId> = self.bodies.keys().copied().collect();
        ids.sort();
        ids
    }
}
