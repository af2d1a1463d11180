use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::model::{Time, UserId};

const MIN_FIELDS: usize = 18;

/// One usable record of a Standard Workload Format log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub job_number: i64,
    pub submit: Time,
    pub runtime: Time,
    pub processors: u32,
    pub user: UserId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadLog {
    pub source: String,
    /// Sorted by submit time; ties keep file order.
    pub entries: Vec<LogEntry>,
    /// Records dropped for a non-positive run time or processor count.
    pub skipped: usize,
}

impl WorkloadLog {
    pub fn first_submit(&self) -> Time {
        self.entries.first().map(|e| e.submit).unwrap_or(0)
    }

    pub fn last_submit(&self) -> Time {
        self.entries.last().map(|e| e.submit).unwrap_or(0)
    }

    /// Inclusive span of submit times, in seconds.
    pub fn span(&self) -> Time {
        if self.entries.is_empty() {
            0
        } else {
            self.last_submit() - self.first_submit() + 1
        }
    }
}

fn field(fields: &[&str], idx: usize, line: usize) -> Result<i64, WorkloadError> {
    let raw = fields[idx - 1];
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(v);
    }
    // Some archive logs carry fractional seconds or "-1.0".
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(|v| v.round() as i64)
        .ok_or_else(|| WorkloadError::Malformed {
            line,
            reason: format!("field {idx} is not numeric: '{raw}'"),
        })
}

/// Parse a Standard Workload Format log.
///
/// Field numbers are 1-based as in the format definition: 2 submit time,
/// 4 run time, 5 allocated processors (8, requested processors, when 5 is
/// -1), 12 user id. Lines starting with `;` are header comments.
pub fn parse_swf(source: &str, text: &str) -> Result<WorkloadLog, WorkloadError> {
    let mut entries = Vec::new();
    let mut skipped = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < MIN_FIELDS {
            return Err(WorkloadError::Malformed {
                line,
                reason: format!(
                    "expected at least {MIN_FIELDS} fields, found {}",
                    fields.len()
                ),
            });
        }
        let job_number = field(&fields, 1, line)?;
        let submit = field(&fields, 2, line)?;
        let runtime = field(&fields, 4, line)?;
        let allocated = field(&fields, 5, line)?;
        let requested = field(&fields, 8, line)?;
        let user = field(&fields, 12, line)?;
        let processors = if allocated == -1 {
            requested
        } else {
            allocated
        };
        if runtime <= 0 || processors <= 0 || submit < 0 {
            skipped += 1;
            continue;
        }
        let processors = u32::try_from(processors).map_err(|_| WorkloadError::Malformed {
            line,
            reason: format!("processor count {processors} out of range"),
        })?;
        entries.push(LogEntry {
            job_number,
            submit,
            runtime,
            processors,
            user,
        });
    }
    if entries.is_empty() {
        return Err(WorkloadError::EmptyLog);
    }
    entries.sort_by_key(|e| e.submit);
    Ok(WorkloadLog {
        source: source.to_string(),
        entries,
        skipped,
    })
}

pub fn read_swf(path: &Path) -> Result<WorkloadLog, WorkloadError> {
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_swf(&name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(job: i64, submit: i64, run: i64, alloc: i64, req: i64, user: i64) -> String {
        format!("{job} {submit} 5 {run} {alloc} -1 -1 {req} 7200 -1 1 {user} 3 -1 1 -1 -1 -1")
    }

    #[test]
    fn extracts_submit_runtime_procs_user() {
        let log = parse_swf("t", &line(1, 100, 3600, 4, 8, 7)).unwrap();
        assert_eq!(
            log.entries,
            vec![LogEntry {
                job_number: 1,
                submit: 100,
                runtime: 3600,
                processors: 4,
                user: 7
            }]
        );
    }

    #[test]
    fn comment_lines_are_ignored() {
        let text = format!("; Version: 2.2\n;\n{}\n", line(1, 0, 10, 1, 1, 1));
        assert_eq!(parse_swf("t", &text).unwrap().entries.len(), 1);
    }

    #[test]
    fn zero_runtime_is_skipped_and_counted() {
        let text = [line(1, 0, 10, 1, 1, 1), line(2, 5, 0, 2, 2, 1)].join("\n");
        let log = parse_swf("t", &text).unwrap();
        assert_eq!(log.entries.len(), 1);
        assert_eq!(log.skipped, 1);
    }

    #[test]
    fn falls_back_to_requested_processors() {
        let log = parse_swf("t", &line(1, 0, 10, -1, 16, 1)).unwrap();
        assert_eq!(log.entries[0].processors, 16);
        let err = parse_swf("t", &line(1, 0, 10, -1, -1, 1)).unwrap_err();
        assert!(matches!(err, WorkloadError::EmptyLog));
    }

    #[test]
    fn short_line_reports_line_number() {
        let text = format!("; hdr\n{}\n1 2 3\n", line(1, 0, 10, 1, 1, 1));
        match parse_swf("t", &text) {
            Err(WorkloadError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_is_an_error() {
        let text = line(1, 0, 10, 1, 1, 1).replace("10 1 -1 -1 1", "1x 1 -1 -1 1");
        assert!(matches!(
            parse_swf("t", &text),
            Err(WorkloadError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(
            parse_swf("t", "; only a header\n"),
            Err(WorkloadError::EmptyLog)
        ));
    }

    #[test]
    fn entries_are_sorted_by_submit() {
        let text = [line(1, 50, 10, 1, 1, 1), line(2, 5, 10, 1, 1, 2)].join("\n");
        let log = parse_swf("t", &text).unwrap();
        assert_eq!(log.entries[0].submit, 5);
        assert_eq!(log.span(), 46);
    }
}
