use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CoordinationLayer, SimError};
use crate::model::{
    validate_setup, wait_per_org, CompletedRecord, FederationSetup, Job, JobId, OrgId,
    ScheduleResult, Time, SCHEMA_VERSION,
};
use crate::policies::{select_org, Candidate, PolicyKind, PolicyState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    LocalSubmit(JobId),
    FederationPublish(JobId),
    ResourceReady { org: usize, machine: usize },
    Completion { job: JobId, attempt: u32 },
    Departure(usize),
}

#[derive(Debug)]
struct Event {
    time: Time,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Scripted departures: (time, organization).
    pub departures: Vec<(Time, OrgId)>,
    pub trace: bool,
    /// Fold completion history into the policy summary every this many
    /// completions; 0 never compacts.
    pub compaction_interval: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            departures: Vec::new(),
            trace: false,
            compaction_interval: 512,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub result: ScheduleResult,
    /// One line per processed event when tracing is on.
    pub trace: Vec<String>,
    pub policy: PolicyState,
}

struct MachineState {
    org: usize,
    id: String,
    total: u32,
    free: u32,
}

struct OrgState {
    id: OrgId,
    machines: Vec<usize>,
    threshold: f64,
    total_cores: u64,
    free_cores: u64,
    /// Background jobs waiting for a local core, FIFO.
    local_queue: VecDeque<JobId>,
}

struct Running {
    machine: usize,
    start: Time,
    attempt: u32,
}

pub struct Simulation {
    now: Time,
    seq: u64,
    events: BinaryHeap<Event>,
    rng: ChaCha8Rng,
    orgs: Vec<OrgState>,
    org_index: HashMap<OrgId, usize>,
    machines: Vec<MachineState>,
    jobs: HashMap<JobId, Job>,
    attempts: HashMap<JobId, u32>,
    running: BTreeMap<JobId, Running>,
    coordination: CoordinationLayer,
    policy: PolicyState,
    records: Vec<CompletedRecord>,
    background_records: Vec<CompletedRecord>,
    removed: Vec<JobId>,
    org_ids: Vec<OrgId>,
    config: SimConfig,
    completions_since_compaction: usize,
    trace: Vec<String>,
}

impl Simulation {
    pub fn new(
        setup: &FederationSetup,
        jobs: &[Job],
        kind: PolicyKind,
        seed: u64,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let violations = validate_setup(setup, jobs);
        if !violations.is_empty() {
            return Err(SimError::InvalidSetup(violations));
        }
        let mut orgs = Vec::new();
        let mut machines = Vec::new();
        let mut org_index = HashMap::new();
        for (oi, org) in setup.organizations.iter().enumerate() {
            let mut ids = Vec::new();
            let mut free = 0;
            for m in &org.machines {
                ids.push(machines.len());
                free += u64::from(m.total_cores - m.reserved_cores);
                machines.push(MachineState {
                    org: oi,
                    id: m.id.clone(),
                    total: m.total_cores,
                    free: m.total_cores - m.reserved_cores,
                });
            }
            org_index.insert(org.id.clone(), oi);
            orgs.push(OrgState {
                id: org.id.clone(),
                machines: ids,
                threshold: org.exposure_threshold,
                total_cores: org.total_cores(),
                free_cores: free,
                local_queue: VecDeque::new(),
            });
        }
        let mut sim = Simulation {
            now: 0,
            seq: 0,
            events: BinaryHeap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            orgs,
            org_index,
            machines,
            jobs: jobs.iter().map(|j| (j.id, j.clone())).collect(),
            attempts: HashMap::new(),
            running: BTreeMap::new(),
            coordination: CoordinationLayer::new(setup.org_ids()),
            policy: PolicyState::for_setup(kind, setup),
            records: Vec::new(),
            background_records: Vec::new(),
            removed: Vec::new(),
            org_ids: setup.org_ids(),
            config,
            completions_since_compaction: 0,
            trace: Vec::new(),
        };
        for job in jobs {
            sim.push(job.release, EventKind::LocalSubmit(job.id));
        }
        let departures = sim.config.departures.clone();
        for (at, org) in departures {
            let idx = *sim
                .org_index
                .get(&org)
                .ok_or_else(|| SimError::NotAMember(org.clone()))?;
            sim.push(at, EventKind::Departure(idx));
        }
        Ok(sim)
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    pub fn coordination(&self) -> &CoordinationLayer {
        &self.coordination
    }

    pub fn records(&self) -> &[CompletedRecord] {
        &self.records
    }

    /// Jobs currently executing, with the organization running them.
    pub fn running(&self) -> Vec<(JobId, OrgId)> {
        self.running
            .iter()
            .map(|(id, r)| (*id, self.orgs[self.machines[r.machine].org].id.clone()))
            .collect()
    }

    fn push(&mut self, time: Time, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.events.push(Event { time, seq, kind });
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if self.config.trace {
            let text = line();
            self.trace.push(format!("{} {}", self.now, text));
        }
    }

    fn owner_index(&self, job: &Job) -> usize {
        // validate_setup guarantees every owner is a known organization
        self.org_index[job.owner.as_ref().expect("validated owner")]
    }

    fn is_member(&self, org: usize) -> bool {
        self.coordination.is_member(&self.orgs[org].id)
    }

    /// An organization offers capacity to foreign jobs only while enough of
    /// it is unreserved and some core is free.
    pub fn exposure_check(&self, org: &OrgId) -> bool {
        self.org_index.get(org).is_some_and(|&i| self.exposed(i))
    }

    fn exposed(&self, org: usize) -> bool {
        let o = &self.orgs[org];
        if o.total_cores == 0 || o.free_cores == 0 {
            return false;
        }
        o.free_cores as f64 / o.total_cores as f64 >= o.threshold
    }

    fn fitting_machine(&self, org: usize, cores: u32) -> Option<usize> {
        self.orgs[org]
            .machines
            .iter()
            .copied()
            .find(|&m| self.machines[m].free >= cores)
    }

    fn start(&mut self, job: Job, machine: usize) {
        let m = &mut self.machines[machine];
        debug_assert!(m.free >= job.cores, "overbooking {}", m.id);
        m.free -= job.cores;
        let org = m.org;
        self.orgs[org].free_cores -= u64::from(job.cores);
        let attempt = {
            let a = self.attempts.entry(job.id).or_insert(0);
            *a += 1;
            *a
        };
        self.running.insert(
            job.id,
            Running {
                machine,
                start: self.now,
                attempt,
            },
        );
        if !job.background {
            let owner = job.owner.clone().expect("validated owner");
            self.policy.on_start(&owner, self.now);
        }
        let mid = self.machines[machine].id.clone();
        self.log(|| format!("start {} {}", job.id, mid));
        self.push(
            self.now + job.duration,
            EventKind::Completion {
                job: job.id,
                attempt,
            },
        );
    }

    fn remove(&mut self, job: JobId) {
        self.log(|| format!("remove {job}"));
        self.removed.push(job);
    }

    fn handle_local_submit(&mut self, id: JobId) {
        let job = self.jobs[&id].clone();
        let org = self.owner_index(&job);
        let org_id = self.orgs[org].id.clone();
        self.log(|| format!("submit {id} {org_id}"));
        if !self.is_member(org) {
            self.remove(id);
            return;
        }
        if job.background {
            match self.fitting_machine(org, job.cores) {
                Some(m) if self.orgs[org].local_queue.is_empty() => self.start(job, m),
                _ => self.orgs[org].local_queue.push_back(id),
            }
            return;
        }
        let nothing_waiting =
            self.orgs[org].local_queue.is_empty() && !self.coordination.has_waiting(&org_id);
        match self.fitting_machine(org, job.cores) {
            Some(m) if nothing_waiting => self.start(job, m),
            _ => self.push(self.now, EventKind::FederationPublish(id)),
        }
    }

    fn handle_publish(&mut self, id: JobId) {
        let job = self.jobs[&id].clone();
        let owner = self.owner_index(&job);
        self.log(|| format!("publish {id}"));
        if !self.is_member(owner) {
            self.remove(id);
            return;
        }
        self.coordination.publish(job.clone());
        let mut offers = Vec::new();
        for (oi, org) in self.orgs.iter().enumerate() {
            if !self.coordination.is_member(&org.id) || (oi != owner && !self.exposed(oi)) {
                continue;
            }
            for &m in &org.machines {
                if self.machines[m].free >= job.cores {
                    offers.push((oi, m));
                }
            }
        }
        offers.shuffle(&mut self.rng);
        for (org, machine) in offers {
            self.push(self.now, EventKind::ResourceReady { org, machine });
        }
    }

    fn handle_resource_ready(&mut self, org: usize, machine: usize) {
        if !self.is_member(org) || self.machines[machine].free == 0 {
            return;
        }
        let free = self.machines[machine].free;
        let mid = self.machines[machine].id.clone();
        self.log(|| format!("ready {mid} free={free}"));

        // Local background work never left the site and goes first.
        if let Some(&head) = self.orgs[org].local_queue.front() {
            if self.jobs[&head].cores <= free {
                self.orgs[org].local_queue.pop_front();
                let job = self.jobs[&head].clone();
                self.start(job, machine);
                self.reoffer(org, machine);
                return;
            }
        }

        let exposed = self.exposed(org);
        let me = self.orgs[org].id.clone();
        loop {
            let mut heads: Vec<(Candidate, JobId)> = Vec::new();
            for owner in self.coordination.owners() {
                if owner != &me && !exposed {
                    continue;
                }
                // waiting_of yields jobs in select_task order
                if let Some(job) = self
                    .coordination
                    .waiting_of(owner)
                    .find(|j| j.cores <= free)
                {
                    heads.push((
                        Candidate {
                            org: owner.clone(),
                            head_release: job.release,
                        },
                        job.id,
                    ));
                }
            }
            if heads.is_empty() {
                return;
            }
            let candidates: Vec<Candidate> = heads.iter().map(|(c, _)| c.clone()).collect();
            let chosen = select_org(&self.policy, &candidates, self.now).expect("nonempty");
            let job_id = heads
                .iter()
                .find(|(c, _)| c.org == chosen)
                .map(|(_, id)| *id)
                .expect("chosen among candidates");
            match self.coordination.claim(job_id, &me) {
                Ok(job) => {
                    self.log(|| format!("claim {job_id} {me}"));
                    self.start(job, machine);
                    self.reoffer(org, machine);
                    return;
                }
                Err(e) => {
                    self.log(|| format!("claim-lost {job_id} {e}"));
                    continue;
                }
            }
        }
    }

    fn reoffer(&mut self, org: usize, machine: usize) {
        if self.machines[machine].free > 0 {
            self.push(self.now, EventKind::ResourceReady { org, machine });
        }
    }

    fn handle_completion(&mut self, id: JobId, attempt: u32) {
        match self.running.get(&id) {
            Some(r) if r.attempt == attempt => {}
            // cancelled by a departure
            _ => return,
        }
        let run = self.running.remove(&id).expect("checked above");
        let job = self.jobs[&id].clone();
        let machine = run.machine;
        self.machines[machine].free += job.cores;
        debug_assert!(self.machines[machine].free <= self.machines[machine].total);
        let org = self.machines[machine].org;
        self.orgs[org].free_cores += u64::from(job.cores);
        let record = CompletedRecord {
            job,
            start: run.start,
            end: self.now,
            executor: self.orgs[org].id.clone(),
        };
        self.log(|| format!("complete {id} {}", record.executor));
        if record.job.background {
            self.background_records.push(record);
        } else {
            self.policy.on_completion(&record);
            self.coordination.complete(record.clone());
            self.records.push(record);
            self.completions_since_compaction += 1;
            if self.config.compaction_interval > 0
                && self.completions_since_compaction >= self.config.compaction_interval
            {
                self.policy.compact_in_place();
                self.coordination.compact();
                self.completions_since_compaction = 0;
            }
        }
        if self.is_member(org) {
            self.push(self.now, EventKind::ResourceReady { org, machine });
        }
    }

    fn handle_departure(&mut self, org: usize) -> Result<(), SimError> {
        let org_id = self.orgs[org].id.clone();
        if !self.coordination.leave(&org_id) {
            return Err(SimError::NotAMember(org_id));
        }
        self.log(|| format!("depart {org_id}"));
        let queued: Vec<JobId> = self.orgs[org].local_queue.drain(..).collect();
        for id in queued {
            self.remove(id);
        }
        for id in self.coordination.withdraw_owner(&org_id) {
            self.remove(id);
        }
        // Foreign work running here goes back to the shared queue; the
        // departed site's own jobs keep running wherever they are.
        let cancelled: Vec<JobId> = self
            .running
            .iter()
            .filter(|(id, r)| {
                self.machines[r.machine].org == org
                    && self.jobs[*id].owner.as_ref() != Some(&org_id)
                    && !self.jobs[*id].background
            })
            .map(|(id, _)| *id)
            .collect();
        for id in cancelled {
            let run = self.running.remove(&id).expect("listed as running");
            let cores = self.jobs[&id].cores;
            self.machines[run.machine].free += cores;
            self.orgs[org].free_cores += u64::from(cores);
            self.coordination.release_claim(id);
            self.log(|| format!("requeue {id}"));
            self.push(self.now, EventKind::FederationPublish(id));
        }
        self.policy.set_share(&org_id, 0);
        Ok(())
    }

    /// Process the next event. Returns `Ok(false)` once the queue is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(event) = self.events.pop() else {
            return Ok(false);
        };
        debug_assert!(event.time >= self.now, "time went backwards");
        self.now = event.time;
        match event.kind {
            EventKind::LocalSubmit(id) => self.handle_local_submit(id),
            EventKind::FederationPublish(id) => self.handle_publish(id),
            EventKind::ResourceReady { org, machine } => self.handle_resource_ready(org, machine),
            EventKind::Completion { job, attempt } => self.handle_completion(job, attempt),
            EventKind::Departure(org) => self.handle_departure(org)?,
        }
        Ok(true)
    }

    /// Run to quiescence and assemble the result.
    pub fn run(mut self) -> Result<SimOutcome, SimError> {
        while self.step()? {}
        let mut unschedulable = self.coordination.waiting_ids();
        for org in &self.orgs {
            unschedulable.extend(org.local_queue.iter().copied());
        }
        unschedulable.sort();
        let mut removed = self.removed;
        removed.sort();
        let makespan = self
            .records
            .iter()
            .chain(&self.background_records)
            .map(|r| r.end)
            .max()
            .unwrap_or(0);
        let result = ScheduleResult {
            schema_version: SCHEMA_VERSION,
            wait_per_org: wait_per_org(&self.org_ids, &self.records),
            records: self.records,
            makespan,
            background_records: self.background_records,
            removed,
            unschedulable,
        };
        Ok(SimOutcome {
            result,
            trace: self.trace,
            policy: self.policy,
        })
    }
}

pub fn run_simulation(
    setup: &FederationSetup,
    jobs: &[Job],
    kind: PolicyKind,
    seed: u64,
) -> Result<ScheduleResult, SimError> {
    Ok(run_simulation_with(setup, jobs, kind, seed, SimConfig::default())?.result)
}

pub fn run_simulation_with(
    setup: &FederationSetup,
    jobs: &[Job],
    kind: PolicyKind,
    seed: u64,
    config: SimConfig,
) -> Result<SimOutcome, SimError> {
    Simulation::new(setup, jobs, kind, seed, config)?.run()
}
