//! Seeded synthetic workload in Standard Workload Format.
//!
//! Users have Zipf-distributed activity and submit in bursty sessions whose
//! arrival rate follows a daily cycle. Each user has a habitual job width
//! (serial or a power of two) and a habitual log-normal runtime. The output
//! is an ordinary SWF text, so it goes through the same parser as archive
//! logs.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::model::Time;
use crate::workload::DAY;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: u32,
    pub users: u32,
    /// Mean number of sessions started per day.
    pub sessions_per_day: f64,
    /// Mean number of jobs in a session.
    pub jobs_per_session: f64,
    /// Mean gap between jobs of one session, in seconds.
    pub session_gap: f64,
    pub max_width: u32,
    /// Share of users who only run single-core jobs.
    pub serial_fraction: f64,
    /// Median runtime of a typical user, in seconds.
    pub median_runtime: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 30,
            users: 60,
            sessions_per_day: 40.0,
            jobs_per_session: 4.0,
            session_gap: 300.0,
            max_width: 32,
            serial_fraction: 0.3,
            median_runtime: 1800.0,
            seed: 1,
        }
    }
}

/// Named profiles loosely shaped after well-known archive logs: a national
/// HPC centre, a research cluster with short parallel jobs, a grid site
/// running only serial jobs, and a mixed national grid.
pub const PRESETS: [&str; 4] = ["hpc", "research", "grid", "mixed"];

impl SynthConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let base = SynthConfig::default();
        Some(match name {
            "default" => base,
            "hpc" => SynthConfig {
                users: 250,
                sessions_per_day: 120.0,
                jobs_per_session: 3.5,
                max_width: 64,
                serial_fraction: 0.4,
                ..base
            },
            "research" => SynthConfig {
                users: 100,
                sessions_per_day: 150.0,
                max_width: 64,
                serial_fraction: 0.1,
                median_runtime: 300.0,
                ..base
            },
            "grid" => SynthConfig {
                users: 50,
                sessions_per_day: 250.0,
                max_width: 1,
                serial_fraction: 1.0,
                ..base
            },
            "mixed" => SynthConfig {
                users: 150,
                sessions_per_day: 100.0,
                jobs_per_session: 5.0,
                max_width: 16,
                serial_fraction: 0.6,
                median_runtime: 3600.0,
                ..base
            },
            _ => return None,
        })
    }
}

struct UserProfile {
    width: u32,
    runtime: LogNormal<f64>,
}

/// Relative session rate over the day: quiet at night, peaking mid-afternoon.
fn daily_rate(t: Time) -> f64 {
    let hour = (t % DAY) as f64 / 3600.0;
    let phase = (hour - 14.0) / 24.0 * std::f64::consts::TAU;
    0.55 + 0.45 * phase.cos()
}

pub fn generate_swf(config: &SynthConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let users = config.users.max(1) as usize;

    let weights: Vec<f64> = (1..=users).map(|r| 1.0 / r as f64).collect();
    let pick_user = WeightedIndex::new(&weights).expect("positive weights");
    let max_exp = 31 - config.max_width.max(1).leading_zeros();
    let profiles: Vec<UserProfile> = (0..users)
        .map(|_| {
            let width = if rng.random_bool(config.serial_fraction.clamp(0.0, 1.0)) {
                1
            } else {
                1 << rng.random_range(1..=max_exp.max(1))
            };
            let width = width.min(config.max_width.max(1));
            let median = config.median_runtime * (rng.random::<f64>() * 2.0 - 1.0).exp2().powi(2);
            UserProfile {
                width,
                runtime: LogNormal::new(median.ln(), 1.1).expect("valid log-normal"),
            }
        })
        .collect();

    let horizon = Time::from(config.days) * DAY;
    // Thinning against the peak rate gives the daily cycle.
    let peak_rate = config.sessions_per_day / DAY as f64 / 0.55;
    let session_gap = Exp::new(peak_rate).expect("positive rate");
    let job_gap = Exp::new(1.0 / config.session_gap.max(1.0)).expect("positive rate");
    let stop = 1.0 / config.jobs_per_session.max(1.0);

    let mut jobs: Vec<(Time, Time, u32, usize)> = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += session_gap.sample(&mut rng);
        if t >= horizon as f64 {
            break;
        }
        if !rng.random_bool(daily_rate(t as Time).min(1.0)) {
            continue;
        }
        let user = pick_user.sample(&mut rng);
        let profile = &profiles[user];
        let mut submit = t;
        loop {
            let runtime = profile
                .runtime
                .sample(&mut rng)
                .clamp(1.0, 2.0 * DAY as f64);
            let width = if rng.random_bool(0.8) {
                profile.width
            } else {
                (profile.width / 2).max(1)
            };
            if submit < horizon as f64 {
                jobs.push((submit as Time, runtime.ceil() as Time, width, user));
            }
            if rng.random_bool(stop) {
                break;
            }
            submit += job_gap.sample(&mut rng);
        }
    }
    jobs.sort_by_key(|j| j.0);

    let mut out = String::new();
    let _ = writeln!(out, "; Version: 2.2");
    let _ = writeln!(out, "; Computer: synthetic federation workload");
    let _ = writeln!(out, "; Note: generated, seed {}", config.seed);
    let _ = writeln!(out, "; MaxJobs: {}", jobs.len());
    let _ = writeln!(out, "; MaxProcs: {}", config.max_width);
    let _ = writeln!(out, "; MaxNodes: {}", config.max_width);
    let _ = writeln!(out, "; UnixStartTime: 0");
    for (i, (submit, runtime, width, user)) in jobs.iter().enumerate() {
        let requested_time = runtime * 2;
        let _ = writeln!(
            out,
            "{} {} -1 {} {} -1 -1 {} {} -1 1 {} 1 -1 1 -1 -1 -1",
            i + 1,
            submit,
            runtime,
            width,
            width,
            requested_time,
            user + 1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::parse_swf;

    #[test]
    fn output_parses_and_spans_the_horizon() {
        let config = SynthConfig {
            days: 3,
            ..SynthConfig::default()
        };
        let text = generate_swf(&config);
        let log = parse_swf("synth", &text).unwrap();
        assert_eq!(log.skipped, 0);
        assert!(log.entries.len() > 100);
        assert!(log.span() > 2 * DAY);
        assert!(log.entries.iter().all(|e| e.processors <= config.max_width));
    }

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig {
            days: 2,
            ..SynthConfig::default()
        };
        assert_eq!(generate_swf(&config), generate_swf(&config));
        let other = SynthConfig { seed: 2, ..config };
        assert_ne!(
            generate_swf(&other),
            generate_swf(&SynthConfig {
                days: 2,
                ..SynthConfig::default()
            })
        );
    }
}
