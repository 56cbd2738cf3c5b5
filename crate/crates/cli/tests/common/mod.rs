#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::Serialize;
use serde_json::{json, Value};
use thermocert::families::{pauli_measurements, werner};
use thermocert::{DensityMatrix, HermitianOperator, MeasurementAssemblage};

pub const BIN: &str = env!("CARGO_BIN_EXE_thermocert");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

pub fn write_scenario(dir: &Path, name: &str, kind: &str, payload: impl Serialize) -> PathBuf {
    let path = dir.join(name);
    let doc = json!({ "kind": kind, "payload": payload });
    std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    path
}

pub fn state_payload(rho: &DensityMatrix, h: Option<&HermitianOperator>) -> Value {
    let mut v = json!({ "rho": rho });
    if let Some(h) = h {
        v["hamiltonian"] = serde_json::to_value(h).unwrap();
    }
    v
}

pub fn werner_file(dir: &Path, p: f64) -> PathBuf {
    write_scenario(dir, &format!("werner-{p}.json"), "state", state_payload(&werner(p).unwrap(), None))
}

pub fn measurements_file(dir: &Path, name: &str, m: &MeasurementAssemblage) -> PathBuf {
    write_scenario(dir, name, "measurements", m)
}

pub fn xz_file(dir: &Path) -> PathBuf {
    measurements_file(dir, "xz.json", &pauli_measurements("XZ").unwrap())
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
