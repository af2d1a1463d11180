use std::cmp::Reverse;

use super::PolicyState;
use crate::model::{Job, OrgId, Time};

/// An organization with at least one waiting job that fits the offer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub org: OrgId,
    /// Release time of its longest-waiting fitting job.
    pub head_release: Time,
}

/// Pick the organization to serve next: highest priority, then the one
/// whose head job has waited longest, then the lowest id.
pub fn select_org(state: &PolicyState, candidates: &[Candidate], at: Time) -> Option<OrgId> {
    candidates
        .iter()
        .max_by_key(|c| {
            (
                state.priority(&c.org, at),
                Reverse(c.head_release),
                Reverse(&c.org),
            )
        })
        .map(|c| c.org.clone())
}

/// The longest-waiting job: earliest release, then lowest id.
pub fn select_task<'a>(queue: impl IntoIterator<Item = &'a Job>) -> Option<&'a Job> {
    queue.into_iter().min_by_key(|j| (j.release, j.id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CompletedRecord;
    use crate::policies::PolicyKind;

    fn cand(org: &str, head_release: Time) -> Candidate {
        Candidate {
            org: org.into(),
            head_release,
        }
    }

    fn done(owner: &str, exec: &str, s: Time, e: Time) -> CompletedRecord {
        CompletedRecord {
            job: Job::new(0, s, 1, e - s, 1).owned_by(owner),
            start: s,
            end: e,
            executor: exec.into(),
        }
    }

    #[test]
    fn single_candidate_is_chosen() {
        let st = PolicyState::new(PolicyKind::SimplDirect, [("a".into(), 1)]);
        assert_eq!(select_org(&st, &[cand("a", 3)], 10), Some("a".into()));
        assert_eq!(select_org(&st, &[], 10), None);
    }

    #[test]
    fn ties_go_to_the_longest_waiting_head() {
        // priorities 3, 7, 7 (surface utility); the two 7s waited 10 s and 20 s
        let mut st = PolicyState::new(
            PolicyKind::SimplDirect,
            [
                ("a".into(), 1),
                ("b".into(), 1),
                ("c".into(), 1),
                ("x".into(), 1),
            ],
        );
        st.on_completion(&done("x", "a", 0, 3));
        st.on_completion(&done("x", "b", 0, 7));
        st.on_completion(&done("x", "c", 0, 7));
        let now = 100;
        let picked = select_org(
            &st,
            &[cand("a", 0), cand("b", now - 10), cand("c", now - 20)],
            now,
        );
        assert_eq!(picked, Some("c".into()));
    }

    #[test]
    fn full_ties_go_to_the_lowest_id() {
        let st = PolicyState::new(PolicyKind::OrigDirect, [("b".into(), 1), ("a".into(), 1)]);
        assert_eq!(
            select_org(&st, &[cand("b", 4), cand("a", 4)], 4),
            Some("a".into())
        );
    }

    #[test]
    fn round_robin_prefers_never_served() {
        let mut st = PolicyState::new(
            PolicyKind::RoundRobin,
            [("o1".into(), 1), ("o2".into(), 1), ("o3".into(), 1)],
        );
        st.on_start(&"o1".into(), 5);
        st.on_start(&"o3".into(), 3);
        let all = [cand("o1", 0), cand("o2", 0), cand("o3", 0)];
        assert_eq!(select_org(&st, &all, 10), Some("o2".into()));
        st.on_start(&"o2".into(), 10);
        assert_eq!(select_org(&st, &all, 10), Some("o3".into()));
    }

    #[test]
    fn task_selection_is_fifo_by_release_then_id() {
        let jobs = [
            Job::new(0, 5, 1, 1, 1),
            Job::new(1, 3, 1, 1, 1),
            Job::new(2, 9, 1, 1, 1),
        ];
        assert_eq!(select_task(&jobs).unwrap().id.0, 1);
        let tied = [Job::new(7, 4, 1, 1, 1), Job::new(2, 4, 1, 1, 1)];
        assert_eq!(select_task(&tied).unwrap().id.0, 2);
        assert_eq!(select_task(&jobs[..1]).unwrap().id.0, 0);
        assert!(select_task(&[]).is_none());
    }
}
