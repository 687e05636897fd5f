//! Golden baselines for the reference scenarios.
//!
//! A baseline stores, per scenario, the five metrics and a digest of the full
//! trace. Checking reruns every scenario and demands bit-identical metrics,
//! an identical digest and exact streaming/post-hoc parity.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{reference_scenarios, scenario_by_name, BenchmarkParams, ScenarioCase};
use crate::engine::{simulate, ParityReport};
use crate::error::{Error, Result};
use crate::io::{config_hash, trace_digest, write_json};
use crate::metrics::{compute_all, MissionMetrics};

pub const GOLDEN_SCHEMA: &str = "silentwatch-golden/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub scenario: String,
    pub seed: u64,
    pub metrics: MissionMetrics,
    pub trace_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub schema: String,
    pub config_hash: String,
    pub records: Vec<GoldenRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub scenario: String,
    pub field: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressReport {
    pub config_hash_expected: String,
    pub config_hash_actual: String,
    pub diffs: Vec<FieldDiff>,
    pub parity: Vec<ParityReport>,
}

impl RegressReport {
    pub fn parity_ok(&self) -> bool {
        self.parity.iter().all(|r| r.max_diff() == 0.0)
    }

    pub fn passed(&self) -> bool {
        self.diffs.is_empty() && self.parity_ok()
    }
}

struct Evaluated {
    record: GoldenRecord,
    parity: ParityReport,
}

fn evaluate(case: &ScenarioCase, p: &BenchmarkParams) -> Result<Evaluated> {
    let out = simulate(case, p)?;
    let post_hoc = compute_all(&out.trace, case, p);
    let parity = ParityReport::new(case.name(), out.streaming, post_hoc.clone());
    Ok(Evaluated {
        record: GoldenRecord {
            scenario: case.name(),
            seed: case.seed,
            metrics: post_hoc,
            trace_digest: trace_digest(&out.trace),
        },
        parity,
    })
}

/// Runs every case concurrently; results come back ordered by scenario name.
fn evaluate_all(cases: &[ScenarioCase], p: &BenchmarkParams) -> Result<Vec<Evaluated>> {
    let mut out = cases
        .par_iter()
        .map(|c| evaluate(c, p))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.record.scenario.cmp(&b.record.scenario));
    Ok(out)
}

pub fn build_golden(p: &BenchmarkParams, seed: u64) -> Result<GoldenFile> {
    let cases = with_seed(p, seed);
    Ok(GoldenFile {
        schema: GOLDEN_SCHEMA.to_string(),
        config_hash: config_hash(p),
        records: evaluate_all(&cases, p)?
            .into_iter()
            .map(|e| e.record)
            .collect(),
    })
}

fn with_seed(p: &BenchmarkParams, seed: u64) -> Vec<ScenarioCase> {
    reference_scenarios(p)
        .into_iter()
        .map(|c| ScenarioCase { seed, ..c })
        .collect()
}

pub fn record(p: &BenchmarkParams, seed: u64, path: &Path) -> Result<GoldenFile> {
    let golden = build_golden(p, seed)?;
    write_json(path, &golden)?;
    Ok(golden)
}

pub fn load_golden(path: &Path) -> Result<GoldenFile> {
    if !path.exists() {
        return Err(Error::NoBaseline(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reruns the baseline's scenarios (with their recorded seeds) and diffs.
pub fn check(p: &BenchmarkParams, path: &Path) -> Result<RegressReport> {
    let golden = load_golden(path)?;
    let mut diffs = Vec::new();
    let mut cases = Vec::new();
    for r in &golden.records {
        match scenario_by_name(p, &r.scenario) {
            Some(c) => cases.push(ScenarioCase { seed: r.seed, ..c }),
            None => diffs.push(FieldDiff {
                scenario: r.scenario.clone(),
                field: "scenario".into(),
                expected: r.scenario.clone(),
                actual: "unknown".into(),
            }),
        }
    }
    let current = evaluate_all(&cases, p)?;
    for r in &golden.records {
        if let Some(now) = current.iter().find(|e| e.record.scenario == r.scenario) {
            diffs.extend(diff_records(r, &now.record));
        }
    }
    let actual_hash = config_hash(p);
    if actual_hash != golden.config_hash {
        diffs.push(FieldDiff {
            scenario: "*".into(),
            field: "config_hash".into(),
            expected: golden.config_hash.clone(),
            actual: actual_hash.clone(),
        });
    }
    Ok(RegressReport {
        config_hash_expected: golden.config_hash,
        config_hash_actual: actual_hash,
        diffs,
        parity: current.into_iter().map(|e| e.parity).collect(),
    })
}

fn show(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v}"),
        None => "inf".into(),
    }
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    a.map(f64::to_bits) == b.map(f64::to_bits)
}

pub fn diff_records(expected: &GoldenRecord, actual: &GoldenRecord) -> Vec<FieldDiff> {
    let (e, a) = (&expected.metrics, &actual.metrics);
    let fields = [
        (
            "endurance_min",
            Some(e.endurance_min),
            Some(a.endurance_min),
        ),
        (
            "crit_served_ratio",
            Some(e.crit_served_ratio),
            Some(a.crit_served_ratio),
        ),
        ("j_lol", Some(e.j_lol), Some(a.j_lol)),
        (
            "unsafe_duration_s",
            Some(e.unsafe_duration_s),
            Some(a.unsafe_duration_s),
        ),
        (
            "time_to_detection_s",
            e.time_to_detection_s,
            a.time_to_detection_s,
        ),
    ];
    let mut out: Vec<FieldDiff> = fields
        .into_iter()
        .filter(|(_, x, y)| !same(*x, *y))
        .map(|(f, x, y)| FieldDiff {
            scenario: expected.scenario.clone(),
            field: f.into(),
            expected: show(x),
            actual: show(y),
        })
        .collect();
    if expected.trace_digest != actual.trace_digest {
        out.push(FieldDiff {
            scenario: expected.scenario.clone(),
            field: "trace_digest".into(),
            expected: expected.trace_digest.clone(),
            actual: actual.trace_digest.clone(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(j: f64, det: Option<f64>) -> GoldenRecord {
        GoldenRecord {
            scenario: "x".into(),
            seed: 1,
            metrics: MissionMetrics {
                endurance_min: 45.0,
                crit_served_ratio: 1.0,
                j_lol: j,
                unsafe_duration_s: 0.0,
                time_to_detection_s: det,
            },
            trace_digest: "d".into(),
        }
    }

    #[test]
    fn identical_records_have_no_diff() {
        assert!(diff_records(&rec(0.02, None), &rec(0.02, None)).is_empty());
    }

    #[test]
    fn one_ulp_is_a_diff() {
        let a = rec(0.02, Some(5.0));
        let b = rec(f64::from_bits(0.02f64.to_bits() + 1), Some(5.0));
        let d = diff_records(&a, &b);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "j_lol");
    }

    #[test]
    fn detection_appearing_is_a_diff() {
        let d = diff_records(&rec(0.02, None), &rec(0.02, Some(5.0)));
        assert_eq!(d[0].field, "time_to_detection_s");
        assert_eq!(d[0].expected, "inf");
    }

    #[test]
    fn missing_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let err = check(&crate::default_params(), &dir.path().join("none.json")).unwrap_err();
        assert!(matches!(err, Error::NoBaseline(_)));
    }
}
