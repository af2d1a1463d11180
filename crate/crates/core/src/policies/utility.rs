//! Per-job utility functions. All three are exact: the half-integers that
//! appear in the first two are carried as rationals.

use num_rational::Ratio;

use super::PolicyError;
use crate::model::{CompletedRecord, Time};

fn check_complete(record: &CompletedRecord, at: Time) -> Result<(), PolicyError> {
    if at < record.end {
        return Err(PolicyError::BeforeCompletion {
            job: record.job.id,
            at,
            end: record.end,
        });
    }
    Ok(())
}

/// `(e - s) * cpu * (T - (s + e - 1) / 2)`: rewards finishing work early.
pub fn utility_psi(record: &CompletedRecord, at: Time) -> Result<Ratio<i128>, PolicyError> {
    check_complete(record, at)?;
    let area = i128::from(record.area());
    let twice_age = 2 * i128::from(at) - i128::from(record.start + record.end - 1);
    Ok(Ratio::new(area * twice_age, 2))
}

/// `(e - s) * cpu * (T + r - (e + s - 1) / 2)`: like [`utility_psi`] but
/// measured from the job's release, so late starts are not penalised
/// forever.
pub fn utility_psi_prime(record: &CompletedRecord, at: Time) -> Result<Ratio<i128>, PolicyError> {
    check_complete(record, at)?;
    let area = i128::from(record.area());
    let twice = 2 * i128::from(at + record.job.release) - i128::from(record.end + record.start - 1);
    Ok(Ratio::new(area * twice, 2))
}

/// `(e - s) * cpu`: the surface of the executed job.
pub fn utility_psi_double_prime(record: &CompletedRecord) -> Ratio<i128> {
    Ratio::from_integer(i128::from(record.area()))
}
