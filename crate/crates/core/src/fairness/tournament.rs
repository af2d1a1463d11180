use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::FairnessError;
use crate::model::{OrgId, Time};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        })
    }
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(format!("unknown norm '{s}' (expected l1 or l2)")),
        }
    }
}

fn to_f64(r: &Ratio<i128>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Distance between the grand-coalition waits and the Shapley vector.
///
/// Deviations are summed exactly; only the final square root is inexact.
pub fn unfairness(
    waits: &BTreeMap<OrgId, Time>,
    phi: &BTreeMap<OrgId, Ratio<i128>>,
    norm: Norm,
) -> Result<f64, FairnessError> {
    if waits.len() != phi.len() || waits.keys().zip(phi.keys()).any(|(a, b)| a != b) {
        return Err(FairnessError::MismatchedIndices);
    }
    let mut exact = Some(Ratio::from_integer(0i128));
    let mut approx = 0.0f64;
    for (w, p) in waits.values().zip(phi.values()) {
        let d = Ratio::from_integer(i128::from(*w)) - p;
        let term = match norm {
            Norm::L1 => Some(d.abs()),
            Norm::L2 => num_traits::CheckedMul::checked_mul(&d, &d),
        };
        let df = to_f64(&d);
        approx += match norm {
            Norm::L1 => df.abs(),
            Norm::L2 => df * df,
        };
        exact = exact
            .zip(term)
            .and_then(|(acc, t)| num_traits::CheckedAdd::checked_add(&acc, &t));
    }
    let sum = exact.map(|e| to_f64(&e)).unwrap_or(approx);
    Ok(match norm {
        Norm::L1 => sum,
        Norm::L2 => sum.sqrt(),
    })
}

/// Pairwise tournament: on each sample, an algorithm gains one point for
/// every other algorithm it is strictly fairer than. Ties score nothing.
pub fn tournament<S: Ord, A: Ord + Clone>(
    per_sample: &BTreeMap<S, BTreeMap<A, f64>>,
) -> BTreeMap<A, u64> {
    let mut scores: BTreeMap<A, u64> = BTreeMap::new();
    for values in per_sample.values() {
        for (a, ua) in values {
            let wins = values.values().filter(|ub| ua < ub).count() as u64;
            *scores.entry(a.clone()).or_insert(0) += wins;
        }
    }
    scores
}
