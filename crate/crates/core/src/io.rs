//! Result persistence: trace, metric and sweep files, the run manifest and
//! the digests that make outputs self-describing.
//!
//! Every CSV starts with one `#` line naming the schema and config hash,
//! followed by a header row. Floats use Rust's shortest round-trip format.
//! An infinite detection time is an empty CSV field and `null` in JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{
    BiasSweepPoint, DeficitCheck, DeficitModel, DepthSweep, HeatmapResult, RegimeReport,
};
use crate::config::BenchmarkParams;
use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::metrics::MissionMetrics;

pub const TRACE_SCHEMA: &str = "silentwatch-trace/1";
pub const METRICS_SCHEMA: &str = "silentwatch-metrics/1";
pub const BIAS_SWEEP_SCHEMA: &str = "silentwatch-bias-sweep/1";
pub const DEPTH_SWEEP_SCHEMA: &str = "silentwatch-depth-sweep/1";
pub const HEATMAP_SCHEMA: &str = "silentwatch-heatmap/1";

/// Trace CSV column order.
pub const TRACE_COLUMNS: [&str; 14] = [
    "t",
    "s",
    "v",
    "s_m",
    "s_hat",
    "residual",
    "u_shed",
    "pc_req",
    "pc_srv",
    "ph_req",
    "ph_srv",
    "p_bat",
    "attack_active",
    "alarm_latched",
];

/// SHA-256 of the canonical JSON of the fully resolved parameters.
pub fn config_hash(p: &BenchmarkParams) -> String {
    let canonical = serde_json::to_string(p).expect("params serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// SHA-256 over the raw bits of every trace column, in column order.
pub fn trace_digest(trace: &Trace) -> String {
    let mut h = Sha256::new();
    h.update((trace.len() as u64).to_le_bytes());
    h.update(trace.dt.to_bits().to_le_bytes());
    let floats = [
        &trace.t,
        &trace.s,
        &trace.v,
        &trace.s_m,
        &trace.s_hat,
        &trace.residual,
        &trace.u_shed,
        &trace.pc_req,
        &trace.pc_srv,
        &trace.ph_req,
        &trace.ph_srv,
        &trace.p_bat,
    ];
    for col in floats {
        for x in col {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    for col in [&trace.attack_active, &trace.alarm_latched] {
        let bytes: Vec<u8> = col.iter().map(|&b| b as u8).collect();
        h.update(&bytes);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub scenario: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_with_banner(path: &Path, schema: &str, hash: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    writeln!(w, "# schema={schema} config_hash={hash}").map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn bit(b: bool) -> String {
    (b as u8).to_string()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, trace: &Trace, hash: &str) -> Result<()> {
    let mut w = csv_with_banner(path, TRACE_SCHEMA, hash)?;
    w.write_record(TRACE_COLUMNS)?;
    for k in 0..trace.len() {
        w.write_record([
            num(trace.t[k]),
            num(trace.s[k]),
            num(trace.v[k]),
            num(trace.s_m[k]),
            num(trace.s_hat[k]),
            num(trace.residual[k]),
            num(trace.u_shed[k]),
            num(trace.pc_req[k]),
            num(trace.pc_srv[k]),
            num(trace.ph_req[k]),
            num(trace.ph_srv[k]),
            num(trace.p_bat[k]),
            bit(trace.attack_active[k]),
            bit(trace.alarm_latched[k]),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_json(path: &Path, trace: &Trace, hash: &str) -> Result<()> {
    let value = json!({
        "schema": TRACE_SCHEMA,
        "config_hash": hash,
        "digest": trace_digest(trace),
        "summary": trace.summary,
        "dt": trace.dt,
        "columns": {
            "t": trace.t,
            "s": trace.s,
            "v": trace.v,
            "s_m": trace.s_m,
            "s_hat": trace.s_hat,
            "residual": trace.residual,
            "u_shed": trace.u_shed,
            "pc_req": trace.pc_req,
            "pc_srv": trace.pc_srv,
            "ph_req": trace.ph_req,
            "ph_srv": trace.ph_srv,
            "p_bat": trace.p_bat,
            "attack_active": trace.attack_active,
            "alarm_latched": trace.alarm_latched,
        },
    });
    write_json(path, &value)
}

/// Run summary. Deterministic: contains no timestamps.
pub fn metrics_document(
    scenario: &str,
    seed: u64,
    metrics: &MissionMetrics,
    trace_digest: &str,
    hash: &str,
) -> serde_json::Value {
    json!({
        "schema": METRICS_SCHEMA,
        "config_hash": hash,
        "scenario": scenario,
        "seed": seed,
        "trace_digest": trace_digest,
        "metrics": metrics,
    })
}

pub fn write_bias_sweep_csv(path: &Path, sweep: &[BiasSweepPoint], hash: &str) -> Result<()> {
    let mut w = csv_with_banner(path, BIAS_SWEEP_SCHEMA, hash)?;
    let mut header = vec!["bias".to_string(), "regime".to_string()];
    for case in ["nominal", "attacked", "defended"] {
        for m in [
            "endurance_min",
            "crit_ratio",
            "j_lol",
            "unsafe_s",
            "detection_s",
        ] {
            header.push(format!("{case}_{m}"));
        }
    }
    w.write_record(&header)?;
    for pt in sweep {
        let mut row = vec![num(pt.bias), pt.regime.as_str().to_string()];
        for m in [&pt.nominal, &pt.attacked, &pt.defended] {
            row.extend(metric_fields(m));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn metric_fields(m: &MissionMetrics) -> [String; 5] {
    [
        num(m.endurance_min),
        num(m.crit_served_ratio),
        num(m.j_lol),
        num(m.unsafe_duration_s),
        opt(m.time_to_detection_s),
    ]
}

pub fn bias_sweep_summary(
    sweep: &[BiasSweepPoint],
    regimes: &RegimeReport,
    model: Option<&DeficitModel>,
    checks: &[DeficitCheck],
    hash: &str,
) -> serde_json::Value {
    json!({
        "schema": BIAS_SWEEP_SCHEMA,
        "config_hash": hash,
        "points": sweep.len(),
        "regimes": regimes,
        "deficit_model": model,
        "deficit_checks": checks,
    })
}

pub fn write_depth_csv(path: &Path, sweep: &DepthSweep, hash: &str) -> Result<()> {
    let mut w = csv_with_banner(path, DEPTH_SWEEP_SCHEMA, hash)?;
    w.write_record([
        "fraction",
        "endurance_min",
        "crit_ratio",
        "j_lol",
        "unsafe_s",
        "detection_s",
    ])?;
    for r in &sweep.rows {
        let mut row = vec![num(r.fraction)];
        row.extend(metric_fields(&r.defended));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_heatmap_csv(path: &Path, hm: &HeatmapResult, hash: &str) -> Result<()> {
    let mut w = csv_with_banner(path, HEATMAP_SCHEMA, hash)?;
    w.write_record([
        "bias",
        "fraction",
        "endurance_min",
        "crit_ratio",
        "j_lol",
        "unsafe_s",
        "detection_s",
        "attacked_j_lol",
    ])?;
    for (i, b) in hm.biases.iter().enumerate() {
        for (j, f) in hm.fractions.iter().enumerate() {
            let mut row = vec![num(*b), num(*f)];
            row.extend(metric_fields(&hm.cells[i][j]));
            row.push(num(hm.attacked[i].j_lol));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn heatmap_summary(hm: &HeatmapResult, hash: &str) -> serde_json::Value {
    json!({
        "schema": HEATMAP_SCHEMA,
        "config_hash": hash,
        "biases": hm.biases,
        "fractions": hm.fractions,
        "completion_boundary": hm.completion_boundary,
        "parity_boundary": hm.parity_boundary,
    })
}

/// Reads a CSV written by this module, skipping the banner line.
pub fn read_csv(path: &Path) -> Result<(String, Vec<csv::StringRecord>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (banner, body) = text.split_once('\n').unwrap_or((&text, ""));
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((banner.to_string(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_params, ScenarioCase, Variant};
    use crate::engine::run;

    #[test]
    fn hash_tracks_resolved_params() {
        let p = default_params();
        assert_eq!(config_hash(&p), config_hash(&default_params()));
        let q = BenchmarkParams { tau_d: 0.09, ..p };
        assert_ne!(config_hash(&p), config_hash(&q));
    }

    #[test]
    fn digest_is_bit_sensitive() {
        let p = default_params();
        let tr = run(&ScenarioCase::nominal(5), &p).unwrap();
        let d = trace_digest(&tr);
        assert_eq!(d, trace_digest(&tr.clone()));
        let mut bumped = tr.clone();
        bumped.v[100] = f64::from_bits(bumped.v[100].to_bits() + 1);
        assert_ne!(d, trace_digest(&bumped));
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let p = default_params();
        let tr = run(&ScenarioCase::defended(Variant::Single, 0.5, 0.8, 1), &p).unwrap();
        write_trace_csv(&path, &tr, "abc").unwrap();
        let (banner, rows) = read_csv(&path).unwrap();
        assert_eq!(banner, format!("# schema={TRACE_SCHEMA} config_hash=abc"));
        assert_eq!(rows.len(), tr.len());
        // full-precision floats read back bit-exact
        let s: f64 = rows[1234][1].parse().unwrap();
        assert_eq!(s.to_bits(), tr.s[1234].to_bits());
        assert_eq!(&rows[6100][12], "1");
    }

    #[test]
    fn infinite_detection_encodings() {
        let m = MissionMetrics {
            endurance_min: 45.0,
            crit_served_ratio: 1.0,
            j_lol: 0.02,
            unsafe_duration_s: 0.0,
            time_to_detection_s: None,
        };
        let doc = metrics_document("nominal", 1, &m, "d", "h");
        assert!(doc["metrics"]["time_to_detection_s"].is_null());
        assert_eq!(metric_fields(&m)[4], "");
    }
}
