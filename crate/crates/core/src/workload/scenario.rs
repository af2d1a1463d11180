use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{peak_concurrent_demand, WorkloadError, WorkloadSample};
use crate::model::{
    FederationSetup, Job, Machine, OrgId, Organization, Scenario, UserId,
    DEFAULT_EXPOSURE_THRESHOLD,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_orgs: usize,
    pub total_cores: u64,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    #[serde(default = "default_background")]
    pub background_fraction: f64,
    /// Overrides the per-scenario default (0 without background load, 0.3 with).
    #[serde(default)]
    pub exposure_threshold: Option<f64>,
    /// Split each organization into machines of at most this many cores;
    /// `None` gives every organization a single machine.
    #[serde(default)]
    pub machine_cores: Option<u32>,
}

fn default_zipf() -> f64 {
    1.0
}

fn default_background() -> f64 {
    0.5
}

impl ScenarioParams {
    pub fn new(n_orgs: usize, total_cores: u64) -> Self {
        ScenarioParams {
            n_orgs,
            total_cores,
            zipf_exponent: default_zipf(),
            background_fraction: default_background(),
            exposure_threshold: None,
            machine_cores: None,
        }
    }
}

/// Default cluster size: `ceil(1.4 * peak)` of the concurrent core demand
/// the jobs would have if each started at release, and never fewer than
/// one core per organization.
pub fn default_total_cores(jobs: &[Job], n_orgs: usize) -> u64 {
    let peak = peak_concurrent_demand(jobs);
    (peak * 14).div_ceil(10).max(n_orgs as u64)
}

pub fn org_name(index: usize) -> OrgId {
    OrgId(format!("csp{:02}", index + 1))
}

fn equal_split(total: u64, n: usize) -> Vec<u64> {
    let base = total / n as u64;
    let rem = (total % n as u64) as usize;
    (0..n).map(|i| base + u64::from(i < rem)).collect()
}

/// Largest-remainder apportionment of `total` cores over weights 1/k^s,
/// k = 1..n, with every share at least one core. Index 0 is the largest.
pub(crate) fn zipf_split(total: u64, n: usize, exponent: f64) -> Result<Vec<u64>, WorkloadError> {
    if total < n as u64 {
        return Err(WorkloadError::TooFewCores {
            n_orgs: n,
            total_cores: total,
        });
    }
    let weights: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-exponent)).collect();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut shares: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = shares.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        shares[i] += 1;
    }
    // Lift empty shares to one core, paid for by the largest share.
    for i in 0..n {
        if shares[i] == 0 {
            let donor = (0..n)
                .max_by_key(|&j| (shares[j], std::cmp::Reverse(j)))
                .unwrap();
            shares[donor] -= 1;
            shares[i] = 1;
        }
    }
    Ok(shares)
}

fn machines_for(org: &OrgId, cores: u64, chunk: Option<u32>) -> Vec<Machine> {
    let chunk = chunk.map(u64::from).unwrap_or(cores).max(1);
    let mut out = Vec::new();
    let mut left = cores;
    while left > 0 {
        let take = left.min(chunk);
        out.push(Machine::new(format!("{org}-m{}", out.len()), take as u32));
        left -= take;
    }
    out
}

/// Build one of the three federation scenarios over a sample.
///
/// Only `owner` and `background` of the jobs change. Every random choice
/// comes from `seed`.
pub fn build_scenario(
    sample: &WorkloadSample,
    scenario: Scenario,
    params: &ScenarioParams,
    seed: u64,
) -> Result<(FederationSetup, Vec<Job>), WorkloadError> {
    let n = params.n_orgs;
    if n < 2 {
        return Err(WorkloadError::TooFewOrganizations(n));
    }
    if params.total_cores < n as u64 {
        return Err(WorkloadError::TooFewCores {
            n_orgs: n,
            total_cores: params.total_cores,
        });
    }
    if !(0.0..=1.0).contains(&params.background_fraction) {
        return Err(WorkloadError::BadParameter(format!(
            "background fraction {} outside [0, 1]",
            params.background_fraction
        )));
    }
    if !(params.zipf_exponent.is_finite() && params.zipf_exponent >= 0.0) {
        return Err(WorkloadError::BadParameter(format!(
            "zipf exponent {} must be a nonnegative number",
            params.zipf_exponent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let cores = match scenario {
        Scenario::S1 | Scenario::S3 => equal_split(params.total_cores, n),
        Scenario::S2 => {
            let ranked = zipf_split(params.total_cores, n, params.zipf_exponent)?;
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut cores = vec![0; n];
            for (rank, &org) in perm.iter().enumerate() {
                cores[org] = ranked[rank];
            }
            cores
        }
    };
    let threshold = params.exposure_threshold.unwrap_or(match scenario {
        Scenario::S3 => DEFAULT_EXPOSURE_THRESHOLD,
        _ => 0.0,
    });
    let organizations: Vec<Organization> = cores
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let id = org_name(i);
            let machines = machines_for(&id, c, params.machine_cores);
            Organization::new(id, machines).with_threshold(threshold)
        })
        .collect();

    let users: BTreeSet<UserId> = sample.jobs.iter().map(|j| j.origin_user).collect();
    let mut setup = FederationSetup::new(organizations, scenario, seed);
    for &user in &users {
        setup
            .user_map
            .insert(user, org_name(rng.random_range(0..n)));
    }
    let background: BTreeSet<UserId> = if scenario == Scenario::S3 {
        users
            .iter()
            .copied()
            .filter(|_| rng.random_bool(params.background_fraction))
            .collect()
    } else {
        BTreeSet::new()
    };

    let jobs = sample
        .jobs
        .iter()
        .map(|j| Job {
            owner: Some(setup.user_map[&j.origin_user].clone()),
            background: background.contains(&j.origin_user),
            ..j.clone()
        })
        .collect();
    Ok((setup, jobs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_setup, SCHEMA_VERSION};
    use crate::workload::DAY;

    fn sample(users: i64, jobs: usize) -> WorkloadSample {
        WorkloadSample {
            schema_version: SCHEMA_VERSION,
            source: "t".into(),
            jobs: (0..jobs)
                .map(|i| Job::new(i as u64, i as i64 * 60, 1, 3600, i as i64 % users))
                .collect(),
            window_start: 0,
            window_length: DAY,
        }
    }

    fn cores_of(setup: &FederationSetup) -> Vec<u64> {
        setup
            .organizations
            .iter()
            .map(|o| o.total_cores())
            .collect()
    }

    #[test]
    fn scenario_one_splits_equally() {
        let (setup, jobs) = build_scenario(
            &sample(10, 40),
            Scenario::S1,
            &ScenarioParams::new(5, 100),
            3,
        )
        .unwrap();
        assert_eq!(cores_of(&setup), vec![20; 5]);
        assert!(validate_setup(&setup, &jobs).is_empty());
        assert!(setup
            .organizations
            .iter()
            .all(|o| o.exposure_threshold == 0.0));
    }

    #[test]
    fn remainder_goes_to_lowest_indices() {
        assert_eq!(equal_split(17, 5), vec![4, 4, 3, 3, 3]);
    }

    #[test]
    fn zipf_two_orgs_thirty_cores() {
        assert_eq!(zipf_split(30, 2, 1.0).unwrap(), vec![20, 10]);
    }

    #[test]
    fn zipf_gives_everyone_a_core() {
        let shares = zipf_split(5, 5, 3.0).unwrap();
        assert_eq!(shares.iter().sum::<u64>(), 5);
        assert!(shares.iter().all(|&c| c >= 1));
        assert!(matches!(
            zipf_split(4, 5, 1.0),
            Err(WorkloadError::TooFewCores { .. })
        ));
    }

    #[test]
    fn scenario_two_permutes_zipf_shares() {
        let params = ScenarioParams::new(2, 30);
        let mut seen = BTreeSet::new();
        for seed in 0..32 {
            let (setup, _) = build_scenario(&sample(4, 8), Scenario::S2, &params, seed).unwrap();
            let c = cores_of(&setup);
            let mut sorted = c.clone();
            sorted.sort();
            assert_eq!(sorted, vec![10, 20]);
            seen.insert(c);
        }
        assert_eq!(seen.len(), 2, "both orders should occur");
    }

    #[test]
    fn scenario_three_flags_background_reproducibly() {
        let params = ScenarioParams::new(3, 30);
        let s = sample(40, 200);
        let a = build_scenario(&s, Scenario::S3, &params, 11).unwrap();
        let b = build_scenario(&s, Scenario::S3, &params, 11).unwrap();
        assert_eq!(a, b);
        let flagged = a.1.iter().filter(|j| j.background).count();
        assert!(flagged > 0 && flagged < 200);
        assert!(a
            .0
            .organizations
            .iter()
            .all(|o| o.exposure_threshold == 0.3));
        // one flag per user, not per job
        for j in &a.1 {
            let twin = a.1.iter().find(|k| k.origin_user == j.origin_user).unwrap();
            assert_eq!(twin.background, j.background);
        }
    }

    #[test]
    fn only_owner_and_background_change() {
        let s = sample(7, 30);
        for scenario in Scenario::ALL {
            let (setup, jobs) =
                build_scenario(&s, scenario, &ScenarioParams::new(4, 13), 5).unwrap();
            assert_eq!(cores_of(&setup).iter().sum::<u64>(), 13);
            for (before, after) in s.jobs.iter().zip(&jobs) {
                let mut stripped = after.clone();
                stripped.owner = None;
                stripped.background = false;
                assert_eq!(&stripped, before);
            }
        }
    }

    #[test]
    fn machine_chunks() {
        let mut p = ScenarioParams::new(2, 40);
        p.machine_cores = Some(16);
        let (setup, _) = build_scenario(&sample(2, 2), Scenario::S1, &p, 0).unwrap();
        let sizes: Vec<u32> = setup.organizations[0]
            .machines
            .iter()
            .map(|m| m.total_cores)
            .collect();
        assert_eq!(sizes, vec![16, 4]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = sample(2, 2);
        assert!(build_scenario(&s, Scenario::S1, &ScenarioParams::new(1, 10), 0).is_err());
        assert!(build_scenario(&s, Scenario::S1, &ScenarioParams::new(5, 4), 0).is_err());
    }
}
