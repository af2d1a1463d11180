//! Reproducible tournament experiments over sampled log windows.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fairness::{evaluate_sample, tournament, FairnessReport, Norm, SampleMeta};
use crate::model::{Scenario, Time, SCHEMA_VERSION};
use crate::policies::PolicyKind;
use crate::workload::{
    build_scenario, peak_concurrent_demand, read_swf, sample_window, unitize, ScenarioParams,
    WorkloadLog, WorkloadSample, DAY,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("every sample failed; first error: {0}")]
    AllFailed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// How many cores the whole federation gets for a (unitized) sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CoreRule {
    Fixed {
        cores: u64,
    },
    /// `ceil(factor * peak)` of the demand if every job started at release.
    PeakFactor {
        factor: f64,
    },
    /// Enough cores that the window's work would fill them to `target`.
    Utilization {
        target: f64,
    },
}

impl Default for CoreRule {
    fn default() -> Self {
        CoreRule::Utilization { target: 0.9 }
    }
}

impl CoreRule {
    pub fn total_cores(&self, sample: &WorkloadSample, n_orgs: usize) -> u64 {
        let cores = match *self {
            CoreRule::Fixed { cores } => cores,
            CoreRule::PeakFactor { factor } => {
                (peak_concurrent_demand(&sample.jobs) as f64 * factor).ceil() as u64
            }
            CoreRule::Utilization { target } => {
                let work: i64 = sample.jobs.iter().map(|j| j.area()).sum();
                (work as f64 / (target * sample.window_length as f64)).ceil() as u64
            }
        };
        cores.max(n_orgs as u64)
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            CoreRule::Fixed { cores: 0 } => Err("fixed core count must be positive".into()),
            CoreRule::PeakFactor { factor } if !factor.is_finite() || factor <= 0.0 => {
                Err("peak factor must be positive".into())
            }
            CoreRule::Utilization { target } if !target.is_finite() || target <= 0.0 => {
                Err("utilization target must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for CoreRule {
    type Err = String;

    /// `40`, `peak:1.4` or `util:0.9`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rule = match s.split_once(':') {
            None => CoreRule::Fixed {
                cores: s.parse().map_err(|_| format!("bad core count '{s}'"))?,
            },
            Some(("peak", f)) => CoreRule::PeakFactor {
                factor: f.parse().map_err(|_| format!("bad peak factor '{f}'"))?,
            },
            Some(("util", t)) => CoreRule::Utilization {
                target: t
                    .parse()
                    .map_err(|_| format!("bad utilization target '{t}'"))?,
            },
            Some(_) => {
                return Err(format!(
                    "unknown core rule '{s}' (expected N, peak:F or util:F)"
                ))
            }
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub logs: Vec<PathBuf>,
    pub samples: usize,
    pub window: Time,
    pub scenarios: Vec<Scenario>,
    pub n_orgs: usize,
    pub total_cores: CoreRule,
    pub algorithms: Vec<PolicyKind>,
    pub norm: Norm,
    pub seed: u64,
    pub background_fraction: f64,
    pub exposure_threshold: Option<f64>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            logs: Vec::new(),
            samples: 20,
            window: DAY,
            scenarios: Scenario::ALL.to_vec(),
            n_orgs: 5,
            total_cores: CoreRule::default(),
            algorithms: PolicyKind::ALL.to_vec(),
            norm: Norm::L2,
            seed: 0,
            background_fraction: 0.5,
            exposure_threshold: None,
            jobs: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.logs.is_empty() {
            return bad("no logs given");
        }
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        if self.window <= 0 {
            return bad("window must be positive");
        }
        if self.scenarios.is_empty() || self.algorithms.is_empty() {
            return bad("scenario and algorithm sets must be nonempty");
        }
        if self.n_orgs < 2 || self.n_orgs > crate::fairness::MAX_ORGS {
            return bad("organization count must be between 2 and 20");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive");
        }
        self.total_cores.validate().map_err(ExperimentError::Config)
    }
}

/// Label used for a log in seeds and outputs: its file name.
pub fn log_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Seed for one sample. The window seed omits the scenario so that every
/// scenario sees the same window; the scenario seed adds it.
pub fn derive_seed(master: u64, log: &str, sample: usize, scenario: Option<Scenario>) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((log.len() as u64).to_le_bytes());
    h.update(log.as_bytes());
    h.update((sample as u64).to_le_bytes());
    if let Some(s) = scenario {
        h.update([s.number()]);
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub log: String,
    pub sample: usize,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FairnessReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub algorithm: PolicyKind,
    pub scenario: Scenario,
    pub log: String,
    pub score: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub runs: Vec<SampleRun>,
    pub scores: Vec<ScoreRow>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &SampleRun> {
        self.runs.iter().filter(|r| r.error.is_some())
    }

    /// Scores summed over logs, per scenario.
    pub fn table(&self) -> BTreeMap<Scenario, BTreeMap<PolicyKind, u64>> {
        let mut t: BTreeMap<Scenario, BTreeMap<PolicyKind, u64>> = BTreeMap::new();
        for s in &self.config.scenarios {
            t.entry(*s)
                .or_default()
                .extend(self.config.algorithms.iter().map(|a| (*a, 0)));
        }
        for row in &self.scores {
            *t.entry(row.scenario)
                .or_default()
                .entry(row.algorithm)
                .or_insert(0) += row.score;
        }
        t
    }

    /// Write scores.csv, table.csv, detail.csv, reports.json and
    /// manifest.json into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.into(),
            source,
        })?;

        let path = dir.join("scores.csv");
        write_csv(&path, |w| {
            w.write_record(["algorithm", "scenario", "log", "score"])?;
            for r in &self.scores {
                w.write_record([
                    r.algorithm.name(),
                    &r.scenario.to_string(),
                    &r.log,
                    &r.score.to_string(),
                ])?;
            }
            Ok(())
        })?;

        let path = dir.join("table.csv");
        let table = self.table();
        write_csv(&path, |w| {
            let mut header = vec!["algorithm".to_string()];
            header.extend(self.config.scenarios.iter().map(|s| s.to_string()));
            w.write_record(&header)?;
            for a in &self.config.algorithms {
                let mut row = vec![a.name().to_string()];
                row.extend(
                    self.config
                        .scenarios
                        .iter()
                        .map(|s| table[s][a].to_string()),
                );
                w.write_record(&row)?;
            }
            Ok(())
        })?;

        let path = dir.join("detail.csv");
        write_csv(&path, |w| {
            w.write_record([
                "log",
                "sample",
                "scenario",
                "algorithm",
                "unfairness",
                "grand_total_wait",
                "jobs",
                "total_cores",
                "window_start",
            ])?;
            for run in &self.runs {
                let Some(report) = &run.report else { continue };
                let meta = report.meta.as_ref();
                for (kind, a) in &report.algorithms {
                    w.write_record([
                        run.log.clone(),
                        run.sample.to_string(),
                        run.scenario.to_string(),
                        kind.name().to_string(),
                        a.unfairness.to_string(),
                        a.grand_value.to_string(),
                        meta.map(|m| m.jobs.to_string()).unwrap_or_default(),
                        meta.map(|m| m.total_cores.to_string()).unwrap_or_default(),
                        meta.map(|m| m.window_start.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
            Ok(())
        })?;

        let reports: Vec<&FairnessReport> =
            self.runs.iter().filter_map(|r| r.report.as_ref()).collect();
        write_json(&dir.join("reports.json"), &reports)?;

        #[derive(Serialize)]
        struct Manifest<'a> {
            schema_version: u32,
            config: &'a ExperimentConfig,
            runs: usize,
            failures: Vec<&'a SampleRun>,
            table: BTreeMap<Scenario, BTreeMap<PolicyKind, u64>>,
        }
        // where the files go and how many threads ran do not affect them
        let config = ExperimentConfig {
            jobs: None,
            out: None,
            ..self.config.clone()
        };
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            config: &config,
            runs: self.runs.len(),
            failures: self.failures().collect(),
            table,
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> Result<(), csv::Error>,
) -> Result<(), ExperimentError> {
    let err = |source| ExperimentError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    body(&mut w).map_err(err)?;
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.into(),
        source,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.into(),
        source,
    })
}

fn run_sample(
    config: &ExperimentConfig,
    label: &str,
    log: &Result<WorkloadLog, String>,
    index: usize,
) -> Vec<SampleRun> {
    let fail = |e: String| {
        config
            .scenarios
            .iter()
            .map(|&scenario| SampleRun {
                log: label.to_string(),
                sample: index,
                scenario,
                report: None,
                error: Some(e.clone()),
            })
            .collect()
    };
    let log = match log {
        Ok(l) => l,
        Err(e) => return fail(e.clone()),
    };
    let window_seed = derive_seed(config.seed, label, index, None);
    let sample = match sample_window(log, config.window, window_seed) {
        Ok(s) => unitize(&s),
        Err(e) => return fail(e.to_string()),
    };
    let total_cores = config.total_cores.total_cores(&sample, config.n_orgs);
    config
        .scenarios
        .par_iter()
        .map(|&scenario| {
            let seed = derive_seed(config.seed, label, index, Some(scenario));
            let mut params = ScenarioParams::new(config.n_orgs, total_cores);
            params.background_fraction = config.background_fraction;
            params.exposure_threshold = config.exposure_threshold;
            let outcome = build_scenario(&sample, scenario, &params, seed)
                .map_err(|e| e.to_string())
                .and_then(|(setup, jobs)| {
                    evaluate_sample(&setup, &jobs, &config.algorithms, seed, config.norm)
                        .map_err(|e| e.to_string())
                });
            let (report, error) = match outcome {
                Ok(mut r) => {
                    r.meta = Some(SampleMeta {
                        log: label.to_string(),
                        sample: index,
                        scenario,
                        window_start: sample.window_start,
                        window_length: sample.window_length,
                        jobs: sample.jobs.len(),
                        total_cores,
                        seed,
                    });
                    (Some(r), None)
                }
                Err(e) => {
                    log::warn!("{label} sample {index} {scenario}: {e}");
                    (None, Some(e))
                }
            };
            SampleRun {
                log: label.to_string(),
                sample: index,
                scenario,
                report,
                error,
            }
        })
        .collect()
}

type PerSample = BTreeMap<usize, BTreeMap<PolicyKind, f64>>;

fn score(config: &ExperimentConfig, runs: &[SampleRun]) -> Vec<ScoreRow> {
    let mut per: BTreeMap<(&str, Scenario), PerSample> = BTreeMap::new();
    for run in runs {
        if let Some(report) = &run.report {
            per.entry((run.log.as_str(), run.scenario))
                .or_default()
                .insert(run.sample, report.unfairness());
        }
    }
    let mut rows = Vec::new();
    let mut labels: Vec<&str> = runs.iter().map(|r| r.log.as_str()).collect();
    labels.dedup();
    for label in labels {
        for &scenario in &config.scenarios {
            let scores = per
                .get(&(label, scenario))
                .map(tournament)
                .unwrap_or_default();
            for &algorithm in &config.algorithms {
                rows.push(ScoreRow {
                    algorithm,
                    scenario,
                    log: label.to_string(),
                    score: scores.get(&algorithm).copied().unwrap_or(0),
                });
            }
        }
    }
    rows
}

/// Run every log × sample × scenario, score each (log, scenario) group with
/// a tournament, and return everything. Failures are recorded per sample;
/// the run fails only when nothing succeeded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config.validate()?;
    let body = || {
        let logs: Vec<(String, Result<WorkloadLog, String>)> = config
            .logs
            .iter()
            .map(|p| (log_label(p), read_swf(p).map_err(|e| e.to_string())))
            .collect();
        let tasks: Vec<(usize, usize)> = (0..logs.len())
            .flat_map(|l| (0..config.samples).map(move |s| (l, s)))
            .collect();
        let runs: Vec<SampleRun> = tasks
            .par_iter()
            .flat_map_iter(|&(l, s)| run_sample(config, &logs[l].0, &logs[l].1, s))
            .collect();
        runs
    };
    let runs = match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?
            .install(body),
        None => body(),
    };
    if runs.iter().all(|r| r.error.is_some()) {
        let first = runs
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(ExperimentError::AllFailed(first));
    }
    let scores = score(config, &runs);
    Ok(ExperimentOutcome {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        runs,
        scores,
    })
}
