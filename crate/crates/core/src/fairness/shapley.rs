use std::collections::BTreeMap;

use num_rational::Ratio;

use super::{CoalitionTable, FairnessError, MAX_ORGS};
use crate::model::{OrgId, Time};

fn factorials(n: usize) -> Vec<i128> {
    let mut f = vec![1i128; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as i128;
    }
    f
}

/// Shapley value of the game given by mask-indexed `values` (bit i is player
/// i, `values[0]` must be 0).
///
/// Each player's numerator is accumulated over the common denominator n!
/// and reduced once at the end, so the result is exact.
pub fn shapley_from_values(n: usize, values: &[Time]) -> Result<Vec<Ratio<i128>>, FairnessError> {
    if n > MAX_ORGS {
        return Err(FairnessError::TooManyOrganizations(n));
    }
    assert_eq!(values.len(), 1 << n, "value table must have 2^n entries");
    assert_eq!(values[0], 0, "empty coalition must have value 0");
    let fact = factorials(n);
    let mut phi = Vec::with_capacity(n);
    for player in 0..n {
        let bit = 1usize << player;
        let mut numer: i128 = 0;
        for mask in 0..(1usize << n) {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let weight = fact[size] * fact[n - size - 1];
            let marginal = i128::from(values[mask | bit]) - i128::from(values[mask]);
            let term = weight
                .checked_mul(marginal)
                .ok_or(FairnessError::Overflow)?;
            numer = numer.checked_add(term).ok_or(FairnessError::Overflow)?;
        }
        phi.push(Ratio::new(numer, fact[n]));
    }
    Ok(phi)
}

/// Exact Shapley value of every organization in a complete table.
pub fn shapley(table: &CoalitionTable) -> Result<BTreeMap<OrgId, Ratio<i128>>, FairnessError> {
    let values = table.characteristic()?;
    let phi = shapley_from_values(table.organizations.len(), &values)?;
    Ok(table.organizations.iter().cloned().zip(phi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Ratio<i128> {
        Ratio::new(n, d)
    }

    #[test]
    fn two_player_game() {
        assert_eq!(
            shapley_from_values(2, &[0, 1, 3, 6]).unwrap(),
            vec![r(2, 1), r(4, 1)]
        );
    }

    #[test]
    fn glove_style_game() {
        // v = 1 iff S contains {1,2} or {1,3}
        let v: Vec<Time> = (0..8)
            .map(|m| i64::from(m & 1 != 0 && m & 6 != 0))
            .collect();
        assert_eq!(
            shapley_from_values(3, &v).unwrap(),
            vec![r(2, 3), r(1, 6), r(1, 6)]
        );
    }

    #[test]
    fn additive_game_returns_weights() {
        let w = [7i64, 0, 13, 2];
        let v: Vec<Time> = (0..16usize)
            .map(|m| (0..4).filter(|i| m & (1 << i) != 0).map(|i| w[i]).sum())
            .collect();
        let phi = shapley_from_values(4, &v).unwrap();
        assert_eq!(phi, w.iter().map(|&x| r(x as i128, 1)).collect::<Vec<_>>());
    }

    #[test]
    fn largest_supported_game_stays_in_range() {
        let n = MAX_ORGS;
        let v: Vec<Time> = (0..(1usize << n))
            .map(|m| (m.count_ones() as i64).pow(2) * 1_000_000)
            .collect();
        let phi = shapley_from_values(n, &v).unwrap();
        let total: Ratio<i128> = phi.iter().sum();
        assert_eq!(total, r(v[(1 << n) - 1] as i128, 1));
    }

    #[test]
    fn over_limit_is_rejected() {
        let err = shapley_from_values(MAX_ORGS + 1, &[]).unwrap_err();
        assert!(err.to_string().contains("Monte-Carlo"));
    }
}
