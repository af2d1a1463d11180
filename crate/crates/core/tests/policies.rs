use std::collections::BTreeMap;

use fedshare::model::{CompletedRecord, Job, OrgId, Time};
use fedshare::policies::{
    select_org, utility_psi, utility_psi_double_prime, utility_psi_prime, Candidate, PolicyState,
    Priority,
};
use fedshare::PolicyKind;
use num_rational::Ratio;
use proptest::prelude::*;

const ORGS: [&str; 3] = ["a", "b", "c"];

fn arb_history() -> impl Strategy<Value = Vec<CompletedRecord>> {
    prop::collection::vec(
        (
            0usize..3,
            0usize..3,
            0i64..500,
            0i64..300,
            1i64..200,
            1u32..8,
        ),
        0..40,
    )
    .prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(
                |(i, (owner, exec, release, delay, duration, cores))| CompletedRecord {
                    job: Job::new(i as u64, release, cores, duration, 1).owned_by(ORGS[owner]),
                    start: release + delay,
                    end: release + delay + duration,
                    executor: ORGS[exec].into(),
                },
            )
            .collect()
    })
}

/// Contribution minus utility recomputed from scratch, as an exact rational.
fn balance_from_history(
    kind: PolicyKind,
    history: &[CompletedRecord],
    org: &str,
    at: Time,
) -> Ratio<i128> {
    let value = |r: &CompletedRecord| match kind {
        PolicyKind::OrigDirect => utility_psi(r, at).unwrap(),
        PolicyKind::RelDirect => utility_psi_prime(r, at).unwrap(),
        _ => utility_psi_double_prime(r),
    };
    let contribution: Ratio<i128> = history
        .iter()
        .filter(|r| r.executor.as_str() == org)
        .map(value)
        .sum();
    let utility: Ratio<i128> = history
        .iter()
        .filter(|r| r.owner().is_some_and(|o| o.as_str() == org))
        .map(value)
        .sum();
    contribution - utility
}

fn shares() -> Vec<(OrgId, u64)> {
    vec![("a".into(), 4), ("b".into(), 2), ("c".into(), 1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn compacted_priorities_match_full_history(history in arb_history(), offsets in prop::collection::vec(0i64..10_000, 20)) {
        let horizon = history.iter().map(|r| r.end).max().unwrap_or(0);
        for kind in [PolicyKind::OrigDirect, PolicyKind::RelDirect, PolicyKind::SimplDirect] {
            let mut state = PolicyState::new(kind, shares());
            for r in &history {
                state.on_completion(r);
            }
            let compact = state.compact();
            prop_assert!(compact.history().is_empty());
            for &dt in &offsets {
                let at = horizon + dt;
                for org in ORGS {
                    let expected = balance_from_history(kind, &history, org, at);
                    let Some(Priority::Balance(got)) = compact.priority(&org.into(), at) else {
                        panic!("direct policy must report a balance");
                    };
                    let scale = if kind == PolicyKind::SimplDirect { 1 } else { 2 };
                    prop_assert_eq!(Ratio::from_integer(got), expected * scale);
                }
            }
        }
    }

    #[test]
    fn compaction_midway_matches_uncompacted(history in arb_history(), cut in 0usize..40, at in 0i64..5000) {
        let cut = cut.min(history.len());
        for kind in PolicyKind::ALL {
            let mut full = PolicyState::new(kind, shares());
            let mut folded = PolicyState::new(kind, shares());
            for (i, r) in history.iter().enumerate() {
                full.on_completion(r);
                folded.on_completion(r);
                if i + 1 == cut {
                    folded.compact_in_place();
                }
            }
            let horizon = history.iter().map(|r| r.end).max().unwrap_or(0) + at;
            for org in ORGS {
                prop_assert_eq!(full.priority(&org.into(), horizon), folded.priority(&org.into(), horizon));
            }
        }
    }

    #[test]
    fn fairshare_ranks_by_usage_per_share(history in arb_history()) {
        let mut state = PolicyState::new(PolicyKind::FairShare, shares());
        for r in &history {
            state.on_completion(r);
        }
        let used: BTreeMap<&str, i64> = ORGS
            .iter()
            .map(|o| (*o, history.iter().filter(|r| r.owner().unwrap().as_str() == *o).map(|r| r.area()).sum()))
            .collect();
        let share = |o: &str| shares().into_iter().find(|(x, _)| x.as_str() == o).unwrap().1 as i64;
        for x in ORGS {
            for y in ORGS {
                let px = state.priority(&x.into(), 0).unwrap();
                let py = state.priority(&y.into(), 0).unwrap();
                let rx = Ratio::new(used[x], share(x));
                let ry = Ratio::new(used[y], share(y));
                prop_assert_eq!(px.cmp(&py), ry.cmp(&rx));
            }
        }
    }
}

#[test]
fn fairshare_prefers_lower_usage_ratio() {
    let mut st = PolicyState::new(
        PolicyKind::FairShare,
        vec![("x".into(), 2), ("y".into(), 1)],
    );
    let done = |owner: &str, area: i64| CompletedRecord {
        job: Job::new(0, 0, 1, area, 1).owned_by(owner),
        start: 0,
        end: area,
        executor: owner.into(),
    };
    st.on_completion(&done("x", 10));
    st.on_completion(&done("y", 4));
    // 10/2 = 5 against 4/1 = 4
    let candidates = [
        Candidate {
            org: "x".into(),
            head_release: 0,
        },
        Candidate {
            org: "y".into(),
            head_release: 0,
        },
    ];
    assert_eq!(select_org(&st, &candidates, 100), Some("y".into()));
}

#[test]
fn zero_share_ranks_last() {
    let st = PolicyState::new(
        PolicyKind::FairShare,
        vec![("x".into(), 0), ("y".into(), 1)],
    );
    let candidates = [
        Candidate {
            org: "x".into(),
            head_release: 0,
        },
        Candidate {
            org: "y".into(),
            head_release: 5,
        },
    ];
    assert_eq!(select_org(&st, &candidates, 0), Some("y".into()));
}
