use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coalition_sweep, shapley, unfairness, CoalitionTable, FairnessError, Norm};
use crate::model::{FederationSetup, Job, OrgId, Scenario, Time, SCHEMA_VERSION, UNIT_DURATION};
use crate::policies::PolicyKind;
use crate::sim::run_simulation;

/// An exact rational with a float rendering for readers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub numer: i128,
    pub denom: i128,
    pub approx: f64,
}

impl From<Ratio<i128>> for ExactValue {
    fn from(r: Ratio<i128>) -> Self {
        ExactValue {
            numer: *r.numer(),
            denom: *r.denom(),
            approx: r.to_f64().unwrap_or(f64::NAN),
        }
    }
}

impl ExactValue {
    pub fn ratio(&self) -> Ratio<i128> {
        Ratio::new(self.numer, self.denom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub log: String,
    pub sample: usize,
    pub scenario: Scenario,
    pub window_start: Time,
    pub window_length: Time,
    pub jobs: usize,
    pub total_cores: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmFairness {
    pub grand_waits: BTreeMap<OrgId, Time>,
    pub grand_value: Time,
    pub shapley: BTreeMap<OrgId, ExactValue>,
    pub unfairness: f64,
    /// True when the coalition values came from the shared reference sweep.
    pub shared_characteristic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<SampleMeta>,
    pub norm: Norm,
    pub algorithms: BTreeMap<PolicyKind, AlgorithmFairness>,
    /// Number of simulations the evaluation ran.
    pub simulations: usize,
}

impl FairnessReport {
    pub fn unfairness(&self) -> BTreeMap<PolicyKind, f64> {
        self.algorithms
            .iter()
            .map(|(k, a)| (*k, a.unfairness))
            .collect()
    }
}

fn assess(
    table: &CoalitionTable,
    grand_waits: BTreeMap<OrgId, Time>,
    norm: Norm,
    shared: bool,
) -> Result<AlgorithmFairness, FairnessError> {
    let phi = shapley(table)?;
    let total: Ratio<i128> = phi.values().sum();
    let v_n = table.grand().map(|e| e.value).unwrap_or(0);
    debug_assert_eq!(total, Ratio::from_integer(i128::from(v_n)));
    let score = unfairness(&grand_waits, &phi, norm)?;
    Ok(AlgorithmFairness {
        grand_value: grand_waits.values().sum(),
        grand_waits,
        shapley: phi.into_iter().map(|(o, r)| (o, r.into())).collect(),
        unfairness: score,
        shared_characteristic: shared,
    })
}

type Waits = BTreeMap<OrgId, Time>;

/// Fairness of each algorithm on one federation and unitized workload.
///
/// When the workload has no background jobs and every exposure threshold is
/// zero, coalition values do not depend on the policy, so one sweep (under
/// the first algorithm) serves all algorithms whose grand-coalition total
/// matches it. Any algorithm that fails that check gets its own sweep.
pub fn evaluate_sample(
    setup: &FederationSetup,
    jobs: &[Job],
    algorithms: &[PolicyKind],
    seed: u64,
    norm: Norm,
) -> Result<FairnessReport, FairnessError> {
    if let Some(j) = jobs
        .iter()
        .find(|j| j.cores != 1 || j.duration != UNIT_DURATION)
    {
        return Err(FairnessError::NotUnitized(j.id));
    }
    let coalitions = (1usize << setup.organizations.len()) - 1;
    let invariant = jobs.iter().all(|j| !j.background)
        && setup
            .organizations
            .iter()
            .all(|o| o.exposure_threshold == 0.0);

    let mut algorithms_out = BTreeMap::new();
    let mut simulations = 0;
    let mut pending: Vec<PolicyKind> = algorithms.to_vec();

    if invariant && !algorithms.is_empty() {
        let reference = coalition_sweep(setup, jobs, algorithms[0], seed)?;
        simulations += coalitions;
        let v_n = reference.grand().map(|e| e.value).unwrap_or(0);
        let grands: Vec<(PolicyKind, Result<Waits, FairnessError>)> = algorithms[1..]
            .par_iter()
            .map(|&k| {
                (
                    k,
                    run_simulation(setup, jobs, k, seed)
                        .map(|r| r.wait_per_org)
                        .map_err(Into::into),
                )
            })
            .collect();
        simulations += grands.len();
        pending.clear();
        let first_waits = reference
            .grand()
            .and_then(|e| e.waits.clone())
            .unwrap_or_default();
        algorithms_out.insert(algorithms[0], assess(&reference, first_waits, norm, true)?);
        for (k, waits) in grands {
            let waits = waits?;
            if waits.values().sum::<Time>() == v_n {
                algorithms_out.insert(k, assess(&reference, waits, norm, true)?);
            } else {
                log::warn!("{k}: grand total differs from the shared characteristic value; running its own sweep");
                pending.push(k);
            }
        }
    }

    let own: Vec<(PolicyKind, Result<CoalitionTable, FairnessError>)> = pending
        .par_iter()
        .map(|&k| (k, coalition_sweep(setup, jobs, k, seed)))
        .collect();
    for (k, table) in own {
        let table = table?;
        simulations += coalitions;
        let waits = table
            .grand()
            .and_then(|e| e.waits.clone())
            .unwrap_or_default();
        algorithms_out.insert(k, assess(&table, waits, norm, false)?);
    }

    Ok(FairnessReport {
        schema_version: SCHEMA_VERSION,
        meta: None,
        norm,
        algorithms: algorithms_out,
        simulations,
    })
}
