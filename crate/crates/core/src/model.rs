//! Domain types shared by the workload, policy, simulation and fairness modules.
//!
//! Time is an integer count of seconds since the start of a simulation. All
//! types are plain values and serialize to the JSON interchange format with
//! the field names used here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Seconds since simulation start.
pub type Time = i64;

/// Opaque user identifier carried over from the source log.
pub type UserId = i64;

/// Version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Duration of a unit task produced by unitization.
pub const UNIT_DURATION: Time = 3600;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrgId(pub String);

impl OrgId {
    pub fn new(id: impl Into<String>) -> Self {
        OrgId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OrgId {
    fn from(s: &str) -> Self {
        OrgId(s.to_string())
    }
}

/// Dense job identifier assigned at ingestion, in log order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}", self.0)
    }
}

/// A unit of work. `duration` is known to the simulator but never consulted
/// by a scheduling policy before the job completes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    /// Unassigned until a scenario maps the origin user onto an organization.
    pub owner: Option<OrgId>,
    pub release: Time,
    pub cores: u32,
    pub duration: Time,
    pub origin_user: UserId,
    /// Local background traffic: runs on the owner's machines only and never
    /// enters the federation queue.
    #[serde(default)]
    pub background: bool,
}

impl Job {
    pub fn new(id: u64, release: Time, cores: u32, duration: Time, origin_user: UserId) -> Self {
        Job {
            id: JobId(id),
            owner: None,
            release,
            cores,
            duration,
            origin_user,
            background: false,
        }
    }

    pub fn owned_by(mut self, org: impl Into<OrgId>) -> Self {
        self.owner = Some(org.into());
        self
    }

    /// Core-seconds of work.
    pub fn area(&self) -> i64 {
        self.duration * i64::from(self.cores)
    }
}

impl From<String> for OrgId {
    fn from(s: String) -> Self {
        OrgId(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedRecord {
    pub job: Job,
    pub start: Time,
    pub end: Time,
    pub executor: OrgId,
}

impl CompletedRecord {
    pub fn owner(&self) -> Option<&OrgId> {
        self.job.owner.as_ref()
    }

    pub fn wait(&self) -> Time {
        self.start - self.job.release
    }

    /// `(end - start) * cores`
    pub fn area(&self) -> i64 {
        (self.end - self.start) * i64::from(self.job.cores)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub id: String,
    pub total_cores: u32,
    #[serde(default)]
    pub reserved_cores: u32,
}

impl Machine {
    pub fn new(id: impl Into<String>, total_cores: u32) -> Self {
        Machine {
            id: id.into(),
            total_cores,
            reserved_cores: 0,
        }
    }
}

pub const DEFAULT_EXPOSURE_THRESHOLD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Organization {
    pub id: OrgId,
    pub machines: Vec<Machine>,
    pub exposure_threshold: f64,
}

impl Organization {
    pub fn new(id: impl Into<OrgId>, machines: Vec<Machine>) -> Self {
        Organization {
            id: id.into(),
            machines,
            exposure_threshold: DEFAULT_EXPOSURE_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.exposure_threshold = threshold;
        self
    }

    pub fn total_cores(&self) -> u64 {
        self.machines.iter().map(|m| u64::from(m.total_cores)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Equal cores per organization, users mapped uniformly at random.
    S1,
    /// Zipf-distributed cores, users mapped uniformly at random.
    S2,
    /// Equal cores, half the users generate local background load.
    S3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S1, Scenario::S2, Scenario::S3];

    pub fn number(self) -> u8 {
        match self {
            Scenario::S1 => 1,
            Scenario::S2 => 2,
            Scenario::S3 => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.number())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "s1" => Ok(Scenario::S1),
            "2" | "s2" => Ok(Scenario::S2),
            "3" | "s3" => Ok(Scenario::S3),
            other => Err(format!("unknown scenario '{other}' (expected 1, 2 or 3)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationSetup {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub organizations: Vec<Organization>,
    pub user_map: BTreeMap<UserId, OrgId>,
    pub scenario: Scenario,
    pub seed: u64,
}

impl FederationSetup {
    pub fn new(organizations: Vec<Organization>, scenario: Scenario, seed: u64) -> Self {
        FederationSetup {
            schema_version: SCHEMA_VERSION,
            organizations,
            user_map: BTreeMap::new(),
            scenario,
            seed,
        }
    }

    pub fn org_ids(&self) -> Vec<OrgId> {
        self.organizations.iter().map(|o| o.id.clone()).collect()
    }

    pub fn org(&self, id: &OrgId) -> Option<&Organization> {
        self.organizations.iter().find(|o| &o.id == id)
    }

    pub fn total_cores(&self) -> u64 {
        self.organizations
            .iter()
            .map(Organization::total_cores)
            .sum()
    }

    /// Keep only the given organizations, their users and nothing else.
    pub fn restrict(&self, members: &BTreeSet<OrgId>) -> FederationSetup {
        FederationSetup {
            schema_version: self.schema_version,
            organizations: self
                .organizations
                .iter()
                .filter(|o| members.contains(&o.id))
                .cloned()
                .collect(),
            user_map: self
                .user_map
                .iter()
                .filter(|(_, org)| members.contains(*org))
                .map(|(u, o)| (*u, o.clone()))
                .collect(),
            scenario: self.scenario,
            seed: self.seed,
        }
    }
}

/// Outcome of one simulation.
///
/// `records` holds federation jobs only; local background jobs are kept in
/// `background_records` so that `wait_per_org` stays a pure function of
/// `records`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleResult {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub records: Vec<CompletedRecord>,
    pub wait_per_org: BTreeMap<OrgId, Time>,
    pub makespan: Time,
    #[serde(default)]
    pub background_records: Vec<CompletedRecord>,
    /// Jobs dropped because their owner left the federation.
    #[serde(default)]
    pub removed: Vec<JobId>,
    /// Jobs no remaining machine could ever fit.
    #[serde(default)]
    pub unschedulable: Vec<JobId>,
}

impl ScheduleResult {
    pub fn empty(orgs: impl IntoIterator<Item = OrgId>) -> Self {
        ScheduleResult {
            schema_version: SCHEMA_VERSION,
            records: Vec::new(),
            wait_per_org: orgs.into_iter().map(|o| (o, 0)).collect(),
            makespan: 0,
            background_records: Vec::new(),
            removed: Vec::new(),
            unschedulable: Vec::new(),
        }
    }

    pub fn total_wait(&self) -> Time {
        self.wait_per_org.values().sum()
    }
}

/// Total wait per owner, recomputed from records. Every organization in
/// `orgs` gets an entry, zero if it owns no record.
pub fn wait_per_org<'a>(
    orgs: impl IntoIterator<Item = &'a OrgId>,
    records: &[CompletedRecord],
) -> BTreeMap<OrgId, Time> {
    let mut waits: BTreeMap<OrgId, Time> = orgs.into_iter().map(|o| (o.clone(), 0)).collect();
    for rec in records {
        if let Some(owner) = rec.owner() {
            *waits.entry(owner.clone()).or_insert(0) += rec.wait();
        }
    }
    waits
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoOrganizations,
    DuplicateOrganization(OrgId),
    NoMachines(OrgId),
    BadThreshold(OrgId),
    EmptyMachine {
        org: OrgId,
        machine: String,
    },
    Overbooked {
        org: OrgId,
        machine: String,
    },
    BadCores(JobId),
    BadDuration(JobId),
    BadRelease(JobId),
    UnmappedUser {
        job: JobId,
        user: UserId,
    },
    UnknownOrganization {
        user: UserId,
        org: OrgId,
    },
    OwnerMismatch {
        job: JobId,
        owner: Option<OrgId>,
        mapped: OrgId,
    },
    DuplicateJob(JobId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoOrganizations => write!(f, "setup has no organizations"),
            Violation::DuplicateOrganization(o) => write!(f, "organization id {o} is not unique"),
            Violation::NoMachines(o) => write!(f, "organization {o} has no machines"),
            Violation::BadThreshold(o) => {
                write!(
                    f,
                    "organization {o} has an exposure threshold outside [0, 1]"
                )
            }
            Violation::EmptyMachine { org, machine } => {
                write!(f, "machine {machine} of {org} has no cores")
            }
            Violation::Overbooked { org, machine } => {
                write!(
                    f,
                    "machine {machine} of {org} reserves more cores than it has"
                )
            }
            Violation::BadCores(j) => write!(f, "job {j} requests fewer than one core"),
            Violation::BadDuration(j) => write!(f, "job {j} has a non-positive duration"),
            Violation::BadRelease(j) => write!(f, "job {j} has a negative release time"),
            Violation::UnmappedUser { job, user } => {
                write!(
                    f,
                    "job {job}: user {user} is not mapped to any organization"
                )
            }
            Violation::UnknownOrganization { user, org } => {
                write!(f, "user {user} is mapped to unknown organization {org}")
            }
            Violation::OwnerMismatch { job, owner, mapped } => write!(
                f,
                "job {job} is owned by {} but its user maps to {mapped}",
                owner.as_ref().map(|o| o.as_str()).unwrap_or("nobody")
            ),
            Violation::DuplicateJob(j) => write!(f, "job id {j} appears twice"),
        }
    }
}

/// Check every structural invariant of a setup and its job list. An empty
/// result means the pair is safe to simulate.
pub fn validate_setup(setup: &FederationSetup, jobs: &[Job]) -> Vec<Violation> {
    let mut out = Vec::new();
    if setup.organizations.is_empty() {
        out.push(Violation::NoOrganizations);
    }
    let mut seen = BTreeSet::new();
    for org in &setup.organizations {
        if !seen.insert(&org.id) {
            out.push(Violation::DuplicateOrganization(org.id.clone()));
        }
        if org.machines.is_empty() {
            out.push(Violation::NoMachines(org.id.clone()));
        }
        if !(0.0..=1.0).contains(&org.exposure_threshold) {
            out.push(Violation::BadThreshold(org.id.clone()));
        }
        for m in &org.machines {
            if m.total_cores == 0 {
                out.push(Violation::EmptyMachine {
                    org: org.id.clone(),
                    machine: m.id.clone(),
                });
            }
            if m.reserved_cores > m.total_cores {
                out.push(Violation::Overbooked {
                    org: org.id.clone(),
                    machine: m.id.clone(),
                });
            }
        }
    }
    for (user, org) in &setup.user_map {
        if !seen.contains(org) {
            out.push(Violation::UnknownOrganization {
                user: *user,
                org: org.clone(),
            });
        }
    }
    let mut ids = BTreeSet::new();
    for job in jobs {
        if !ids.insert(job.id) {
            out.push(Violation::DuplicateJob(job.id));
        }
        if job.cores == 0 {
            out.push(Violation::BadCores(job.id));
        }
        if job.duration <= 0 {
            out.push(Violation::BadDuration(job.id));
        }
        if job.release < 0 {
            out.push(Violation::BadRelease(job.id));
        }
        match setup.user_map.get(&job.origin_user) {
            None => out.push(Violation::UnmappedUser {
                job: job.id,
                user: job.origin_user,
            }),
            Some(mapped) if job.owner.as_ref() != Some(mapped) => {
                out.push(Violation::OwnerMismatch {
                    job: job.id,
                    owner: job.owner.clone(),
                    mapped: mapped.clone(),
                })
            }
            Some(_) => {}
        }
    }
    out
}
