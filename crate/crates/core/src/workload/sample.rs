use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{WorkloadError, WorkloadLog};
use crate::model::{Job, Time, SCHEMA_VERSION, UNIT_DURATION};

pub const DAY: Time = 86_400;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSample {
    pub schema_version: u32,
    pub source: String,
    /// Release times are relative to `window_start`; owners are unassigned.
    pub jobs: Vec<Job>,
    pub window_start: Time,
    pub window_length: Time,
}

impl WorkloadSample {
    pub fn is_unitized(&self) -> bool {
        self.jobs
            .iter()
            .all(|j| j.cores == 1 && j.duration == UNIT_DURATION)
    }
}

/// Draw a uniformly random window of `length` seconds and keep the jobs
/// submitted in `[start, start + length)`, rebased so the window opens at 0.
pub fn sample_window(
    log: &WorkloadLog,
    length: Time,
    seed: u64,
) -> Result<WorkloadSample, WorkloadError> {
    if log.entries.is_empty() {
        return Err(WorkloadError::EmptyLog);
    }
    if length <= 0 || log.span() < length {
        return Err(WorkloadError::LogTooShort {
            span: log.span(),
            length,
        });
    }
    let first = log.first_submit();
    let latest_start = log.last_submit() + 1 - length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(first..=latest_start);
    let end = start + length;

    let jobs = log
        .entries
        .iter()
        .filter(|e| e.submit >= start && e.submit < end)
        .enumerate()
        .map(|(i, e)| Job::new(i as u64, e.submit - start, e.processors, e.runtime, e.user))
        .collect();
    Ok(WorkloadSample {
        schema_version: SCHEMA_VERSION,
        source: log.source.clone(),
        jobs,
        window_start: start,
        window_length: length,
    })
}

/// Split every q-core job lasting p hours into q * ceil(p) single-core jobs
/// of exactly one hour, all released with the original job. Ids are
/// reassigned densely in input order.
pub fn unitize(sample: &WorkloadSample) -> WorkloadSample {
    let mut jobs = Vec::new();
    for job in &sample.jobs {
        let hours = (job.duration + UNIT_DURATION - 1) / UNIT_DURATION;
        let pieces = u64::from(job.cores) * hours as u64;
        for _ in 0..pieces {
            let mut unit = job.clone();
            unit.id = crate::model::JobId(jobs.len() as u64);
            unit.cores = 1;
            unit.duration = UNIT_DURATION;
            jobs.push(unit);
        }
    }
    WorkloadSample {
        jobs,
        ..sample.clone()
    }
}

/// Largest number of cores in use at once if every job started at its
/// release time.
pub fn peak_concurrent_demand(jobs: &[Job]) -> u64 {
    let mut deltas: Vec<(Time, i64)> = Vec::with_capacity(jobs.len() * 2);
    for j in jobs {
        deltas.push((j.release, i64::from(j.cores)));
        deltas.push((j.release + j.duration, -i64::from(j.cores)));
    }
    // ends before starts at equal times: intervals are half-open
    deltas.sort();
    let mut current = 0i64;
    let mut peak = 0i64;
    for (_, d) in deltas {
        current += d;
        peak = peak.max(current);
    }
    peak as u64
}
