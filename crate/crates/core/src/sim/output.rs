//! Result files of a run.
//!
//! A run directory holds:
//!
//! - `config.toml`: the scenario as run,
//! - `slots.csv`: one row per vehicle per slot, columns [`CSV_COLUMNS`],
//! - `summary.json`: a flat map of run averages and tracking errors,
//! - `design.jsonl`: per optimized slot, the beams, channel estimates and
//!   targets needed to re-check outage probabilities.
//!
//! Floating-point CSV fields carry nine significant digits; fields that do
//! not apply to a row are empty.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::config::{Role, Scenario};
use super::harness::{DesignRecord, RunResult, SlotRecord};
use crate::error::{Error, Result};

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 32] = [
    "slot",
    "time_s",
    "vehicle",
    "role",
    "status",
    "theta_true_rad",
    "theta_pred_rad",
    "theta_post_rad",
    "distance_true_m",
    "distance_pred_m",
    "distance_post_m",
    "velocity_true_mps",
    "velocity_pred_mps",
    "velocity_post_mps",
    "pcrb_theta_rad2",
    "sinr",
    "conventional_rate",
    "semantic_rate",
    "ssr",
    "sinr_true",
    "conventional_rate_true",
    "semantic_rate_true",
    "ssr_true",
    "rho",
    "lambda",
    "varrho",
    "power_comm_sense_w",
    "power_computing_w",
    "ao_iterations",
    "ao_converged",
    "randomization_margin",
    "outage_rate",
];

pub const CONFIG_FILE: &str = "config.toml";
pub const CSV_FILE: &str = "slots.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DESIGN_FILE: &str = "design.jsonl";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub designs: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            config: dir.join(CONFIG_FILE),
            csv: dir.join(CSV_FILE),
            summary: dir.join(SUMMARY_FILE),
            designs: dir.join(DESIGN_FILE),
        }
    }
}

/// Nine significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn role_name(r: Role) -> &'static str {
    match r {
        Role::Intended => "intended",
        Role::Unintended => "unintended",
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

/// Rows of one slot, newline-terminated.
pub fn csv_rows(rec: &SlotRecord) -> String {
    let mut out = String::new();
    for (i, v) in rec.vehicles.iter().enumerate() {
        let fields = [
            rec.slot.to_string(),
            format_float(rec.time),
            i.to_string(),
            role_name(v.role).to_string(),
            rec.status.name().to_string(),
            format_float(v.truth.theta),
            format_float(v.predicted.theta),
            format_float(v.posterior.theta),
            format_float(v.truth.distance),
            format_float(v.predicted.distance),
            format_float(v.posterior.distance),
            format_float(v.truth.velocity),
            format_float(v.predicted.velocity),
            format_float(v.posterior.velocity),
            format_float(v.pcrb_theta),
            format_float(v.predicted_link.sinr),
            format_float(v.predicted_link.conventional_rate),
            format_float(v.predicted_link.semantic_rate),
            opt(v.predicted_link.ssr),
            format_float(v.true_link.sinr),
            format_float(v.true_link.conventional_rate),
            format_float(v.true_link.semantic_rate),
            opt(v.true_link.ssr),
            opt(v.rho),
            opt(rec.lambda),
            opt(rec.varrho),
            format_float(rec.power_comm_sense),
            format_float(rec.power_computing),
            rec.ao_iterations.to_string(),
            u8::from(rec.ao_converged).to_string(),
            opt(rec.randomization_margin),
            opt(v.outage),
        ];
        debug_assert_eq!(fields.len(), CSV_COLUMNS.len());
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn render_csv(records: &[SlotRecord]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in records {
        out.push_str(&csv_rows(r));
    }
    out
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn rmse(errors: impl Iterator<Item = f64>) -> Option<f64> {
    mean(errors.map(|e| e * e)).map(f64::sqrt)
}

fn num(v: Option<f64>) -> Value {
    v.and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::Null)
}

/// Flat map of run-level scalars.
///
/// Tracking errors cover every vehicle and slot. Rates, SSR and `ρ` average
/// the intended vehicles over feasible slots.
pub fn summarize(result: &RunResult, scenario: &Scenario) -> Map<String, Value> {
    let recs = &result.records;
    let all = || recs.iter().flat_map(|r| r.vehicles.iter());
    let feasible_intended = || {
        recs.iter()
            .filter(|r| r.status.is_feasible())
            .flat_map(|r| r.vehicles.iter())
            .filter(|v| v.role == Role::Intended)
    };
    let mut m = Map::new();
    let cfg = &scenario.config;
    m.insert("schema_version".into(), Value::from(CSV_SCHEMA_VERSION));
    m.insert("filter".into(), Value::from(cfg.simulation.filter.name()));
    m.insert("seed".into(), Value::from(cfg.simulation.seed));
    m.insert("semantic".into(), Value::from(cfg.semantic.enabled));
    m.insert("perfect_csi".into(), Value::from(cfg.channel.perfect_csi));
    m.insert("slots".into(), Value::from(recs.len()));
    m.insert("feasible_slots".into(), Value::from(result.feasible_slots()));
    m.insert("angle_rmse_rad".into(), num(rmse(all().map(|v| v.posterior.theta - v.truth.theta))));
    m.insert("distance_rmse_m".into(), num(rmse(all().map(|v| v.posterior.distance - v.truth.distance))));
    m.insert("angle_rmse_pred_rad".into(), num(rmse(all().map(|v| v.predicted.theta - v.truth.theta))));
    m.insert("distance_rmse_pred_m".into(), num(rmse(all().map(|v| v.predicted.distance - v.truth.distance))));
    m.insert("mean_pcrb_theta_rad2".into(), num(mean(all().map(|v| v.pcrb_theta))));
    m.insert("mean_sinr".into(), num(mean(feasible_intended().map(|v| v.predicted_link.sinr))));
    m.insert(
        "mean_conventional_rate".into(),
        num(mean(feasible_intended().map(|v| v.predicted_link.conventional_rate))),
    );
    m.insert("mean_semantic_rate".into(), num(mean(feasible_intended().map(|v| v.predicted_link.semantic_rate))));
    m.insert("mean_ssr".into(), num(mean(feasible_intended().filter_map(|v| v.predicted_link.ssr))));
    m.insert(
        "mean_semantic_rate_true".into(),
        num(mean(feasible_intended().map(|v| v.true_link.semantic_rate))),
    );
    m.insert("mean_ssr_true".into(), num(mean(feasible_intended().filter_map(|v| v.true_link.ssr))));
    m.insert("mean_rho".into(), num(mean(feasible_intended().filter_map(|v| v.rho))));
    m.insert("mean_ao_iterations".into(), num(mean(recs.iter().map(|r| r.ao_iterations as f64))));
    m.insert(
        "mean_power_total_w".into(),
        num(mean(recs.iter().map(|r| r.power_comm_sense + r.power_computing))),
    );
    m.insert(
        "stopped_early".into(),
        result.stopped_early.clone().map(Value::from).unwrap_or(Value::Null),
    );
    m
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_outputs(result: &RunResult, scenario: &Scenario, dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let art = RunArtifacts::in_dir(dir);
    write_file(&art.config, scenario.config.to_toml()?.as_bytes())?;
    write_file(&art.csv, render_csv(&result.records).as_bytes())?;
    let summary = serde_json::to_string_pretty(&Value::Object(summarize(result, scenario)))
        .map_err(|e| Error::NumericalFailure(format!("summary serialization: {e}")))?;
    write_file(&art.summary, summary.as_bytes())?;
    write_designs(&result.designs, &art.designs)?;
    Ok(art)
}

pub fn write_designs(designs: &[DesignRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for d in designs {
        let line = serde_json::to_string(d).map_err(|e| Error::NumericalFailure(format!("design serialization: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_designs(path: &Path) -> Result<Vec<DesignRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d = serde_json::from_str(&line).map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)),
            )
        })?;
        out.push(d);
    }
    Ok(out)
}
