#![allow(dead_code)]

use fedshare::model::{FederationSetup, Job, Machine, Organization, Scenario, Time};

/// Builds a setup from `(name, cores, threshold)` triples. Organization `i`
/// owns user `i + 1`.
pub fn setup(orgs: &[(&str, u32, f64)]) -> FederationSetup {
    let organizations = orgs
        .iter()
        .map(|(name, cores, threshold)| {
            Organization::new(*name, vec![Machine::new(format!("{name}-m0"), *cores)])
                .with_threshold(*threshold)
        })
        .collect();
    let mut s = FederationSetup::new(organizations, Scenario::S1, 0);
    for (i, (name, _, _)) in orgs.iter().enumerate() {
        s.user_map.insert(i as i64 + 1, (*name).into());
    }
    s
}

pub struct JobList {
    jobs: Vec<Job>,
    setup: FederationSetup,
}

impl JobList {
    pub fn new(setup: &FederationSetup) -> Self {
        JobList {
            jobs: Vec::new(),
            setup: setup.clone(),
        }
    }

    pub fn add(mut self, owner: &str, release: Time, cores: u32, duration: Time) -> Self {
        let user = *self
            .setup
            .user_map
            .iter()
            .find(|(_, o)| o.as_str() == owner)
            .expect("known owner")
            .0;
        let id = self.jobs.len() as u64;
        self.jobs
            .push(Job::new(id, release, cores, duration, user).owned_by(owner));
        self
    }

    pub fn background(mut self) -> Self {
        self.jobs.last_mut().unwrap().background = true;
        self
    }

    pub fn build(self) -> Vec<Job> {
        self.jobs
    }
}
