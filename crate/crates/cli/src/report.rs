//! Self-describing reports and their JSON and CSV renderings.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use thermocert::{SolverSettings, ThermalContext, Verdict};

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InputDigest {
    pub role: String,
    pub sha256: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Units {
    pub energy: &'static str,
    pub kbt_ln2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boltzmann: Option<f64>,
}

impl Units {
    pub fn new(ctx: &ThermalContext) -> Self {
        let label = ctx.label();
        Self {
            energy: ctx.unit(),
            kbt_ln2: ctx.kbt_ln2(),
            temperature: label.map(|l| l.temperature),
            boltzmann: label.map(|l| l.boltzmann),
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverInfo {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub free_max: f64,
    pub resource_min: f64,
}

impl SolverInfo {
    pub fn new(s: &SolverSettings) -> Self {
        Self {
            gap_tol: s.gap_tol,
            feas_tol: s.feas_tol,
            max_iter: s.max_iter,
            free_max: thermocert::verdict::FREE_MAX,
            resource_min: thermocert::verdict::RESOURCE_MIN,
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub units: Units,
    pub solver: SolverInfo,
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub conclusion: Option<String>,
    pub result: Value,
}

/// Headline numbers of a command, in column order.
pub type Summary = Vec<(&'static str, Value)>;

/// Scientific notation with 12 significant digits.
pub fn csv_number(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".into();
    }
    format!("{x:.11e}")
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(csv_number).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<Value>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(csv_field))?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_json(report: &Report) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn render_summary_csv(summary: &Summary) -> anyhow::Result<Vec<u8>> {
    let header: Vec<&str> = summary.iter().map(|(k, _)| *k).collect();
    let row: Vec<Value> = summary.iter().map(|(_, v)| v.clone()).collect();
    let mut bytes = Vec::new();
    write_csv(&mut bytes, &header, &[row])?;
    Ok(bytes)
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
