//! Multi-participant experiments: paired sessions across conditions, run in
//! parallel and merged in a fixed order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::human::HumanParams;
use crate::log::SessionLog;
use crate::metrics::{compute_metrics, SessionMetrics};
use crate::pedal::Condition;
use crate::scenario::{mix_seed, run_session};
use crate::stats::{discordant_counts, mcnemar, paired_t, StatResult};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub participants: usize,
    pub conditions: Vec<Condition>,
    pub base_seed: u64,
    pub base_config: ScenarioConfig,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Participants whose full logs are kept in the results.
    pub keep_logs_for: Vec<usize>,
}

impl CohortSpec {
    pub fn new(participants: usize, base_seed: u64) -> Self {
        Self {
            participants,
            conditions: Condition::ALL.to_vec(),
            base_seed,
            base_config: ScenarioConfig::default(),
            workers: None,
            keep_logs_for: Vec::new(),
        }
    }

    pub fn participant_seed(&self, participant: usize) -> u64 {
        mix_seed(self.base_seed, participant as u64)
    }

    /// Traits of one participant; identical in every condition.
    pub fn participant_params(&self, participant: usize) -> HumanParams {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.participant_seed(participant), 10));
        self.base_config.human.sample_participant(&mut rng)
    }

    /// Config of one session. The traffic seed is shared across conditions;
    /// the driver noise seed is not.
    pub fn session_config(&self, participant: usize, condition: Condition) -> ScenarioConfig {
        let ps = self.participant_seed(participant);
        let tag = Condition::ALL.iter().position(|c| *c == condition).unwrap_or(0) as u64;
        let mut cfg = self.base_config.clone().with_condition(condition);
        cfg.seed = mix_seed(ps, 100 + tag);
        cfg.traffic_seed = Some(ps);
        cfg.human = self.participant_params(participant);
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub participant: usize,
    pub condition: Condition,
    pub seed: u64,
    pub metrics: SessionMetrics,
    pub log: Option<SessionLog>,
}

/// Runs every (participant, condition) session. Results are ordered by
/// participant, then by the order of `spec.conditions`.
pub fn run_cohort(spec: &CohortSpec) -> Result<Vec<SessionResult>> {
    if spec.participants == 0 || spec.conditions.is_empty() {
        return Err(Error::InvalidConfig("cohort needs participants and conditions".into()));
    }
    spec.base_config.validate()?;
    let jobs: Vec<(usize, Condition)> = (0..spec.participants)
        .flat_map(|p| spec.conditions.iter().map(move |&c| (p, c)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(p, c)| {
                let cfg = spec.session_config(p, c);
                let seed = cfg.seed;
                let log = run_session(&cfg)?;
                let metrics = compute_metrics(&log)?;
                Ok(SessionResult {
                    participant: p,
                    condition: c,
                    seed,
                    metrics,
                    log: spec.keep_logs_for.contains(&p).then_some(log),
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Continuous metrics compared pairwise across conditions.
pub const CONTINUOUS_METRICS: [&str; 5] = [
    "ego_speed_std",
    "platoon_speed_std",
    "braking_instances",
    "jam_lifetime",
    "throughput",
];

pub fn metric_value(m: &SessionMetrics, name: &str) -> Option<f64> {
    Some(match name {
        "ego_speed_std" => m.ego_speed_std,
        "platoon_speed_std" => m.platoon_speed_std,
        "braking_instances" => m.braking_instances as f64,
        "jam_lifetime" => m.jam_lifetime,
        "throughput" => m.throughput,
        "min_gap_after_failure" => m.min_gap_after_failure?,
        "late_mean_gap" => m.late_mean_gap,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub a: Condition,
    pub b: Condition,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `None` when the test is undefined (e.g. fewer than two pairs).
    pub result: Option<StatResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub participants: usize,
    pub comparisons: Vec<Comparison>,
}

/// Per-participant values of one metric in one condition.
pub fn series(results: &[SessionResult], condition: Condition, metric: &str) -> Vec<(usize, f64)> {
    results
        .iter()
        .filter(|r| r.condition == condition)
        .filter_map(|r| metric_value(&r.metrics, metric).map(|v| (r.participant, v)))
        .collect()
}

/// Values of participants with a finite metric in both conditions.
pub fn paired_series(results: &[SessionResult], a: Condition, b: Condition, metric: &str) -> (Vec<f64>, Vec<f64>) {
    let sb = series(results, b, metric);
    series(results, a, metric)
        .into_iter()
        .filter_map(|(p, x)| {
            let y = sb.iter().find(|(q, _)| *q == p)?.1;
            (x.is_finite() && y.is_finite()).then_some((x, y))
        })
        .unzip()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Paired t-tests for every continuous metric and condition pair, the
/// failure-window minimum gap, and McNemar on collisions.
pub fn analyze(results: &[SessionResult], conditions: &[Condition]) -> StatsReport {
    let participants = results.iter().map(|r| r.participant + 1).max().unwrap_or(0);
    let mut comparisons = Vec::new();
    let pairs: Vec<(Condition, Condition)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| conditions[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    for metric in CONTINUOUS_METRICS {
        for &(a, b) in &pairs {
            let (xa, xb) = paired_series(results, a, b, metric);
            comparisons.push(Comparison {
                metric: metric.into(),
                a,
                b,
                mean_a: mean(&xa),
                mean_b: mean(&xb),
                result: paired_t(&xa, &xb).ok(),
            });
        }
    }
    let failing: Vec<Condition> = conditions.iter().copied().filter(|c| c.has_failure()).collect();
    for (i, &a) in failing.iter().enumerate() {
        for &b in &failing[i + 1..] {
            let (xa, xb) = paired_series(results, a, b, "min_gap_after_failure");
            comparisons.push(Comparison {
                metric: "min_gap_after_failure".into(),
                a,
                b,
                mean_a: mean(&xa),
                mean_b: mean(&xb),
                result: paired_t(&xa, &xb).ok(),
            });
            let ca: Vec<bool> = results.iter().filter(|r| r.condition == a).map(|r| r.metrics.collision).collect();
            let cb: Vec<bool> = results.iter().filter(|r| r.condition == b).map(|r| r.metrics.collision).collect();
            let (nb, nc) = discordant_counts(&ca, &cb);
            let rate = |v: &[bool]| v.iter().filter(|&&x| x).count() as f64 / v.len().max(1) as f64;
            comparisons.push(Comparison {
                metric: "collision".into(),
                a,
                b,
                mean_a: rate(&ca),
                mean_b: rate(&cb),
                result: mcnemar(nb, nc).ok(),
            });
        }
    }
    StatsReport {
        schema_version: METRICS_SCHEMA_VERSION,
        participants,
        comparisons,
    }
}

pub const METRICS_CSV_HEADER: &str = "schema_version,participant,condition,seed,ego_speed_std,platoon_speed_std,\
braking_instances,jam_lifetime,jam_dissipated,throughput,min_gap_after_failure,collision,late_mean_gap";

/// One CSV line per session; an absent failure-window gap is left empty.
pub fn metrics_csv(results: &[SessionResult]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in results {
        let m = &r.metrics;
        let gap = m.min_gap_after_failure.map(|g| g.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            METRICS_SCHEMA_VERSION,
            r.participant,
            r.condition,
            r.seed,
            m.ego_speed_std,
            m.platoon_speed_std,
            m.braking_instances,
            m.jam_lifetime,
            m.jam_dissipated,
            m.throughput,
            gap,
            m.collision,
            m.late_mean_gap,
        ));
    }
    out
}
