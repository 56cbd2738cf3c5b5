//! Parameter sweeps over named families with threshold bisection.

use std::str::FromStr;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thermocert::families::{fourier_mubs, isotropic, noisy_mubs, pauli_measurements, werner};
use thermocert::incompat::{incompat_via_energy, joint_measurability};
use thermocert::linalg::max_entangled;
use thermocert::steering::{anomalous_energy, assemble, certify_steering, lhs_membership};
use thermocert::{MeasurementAssemblage, SolverSettings, StateAssemblage, ThermalContext, Verdict};

use crate::commands::conclusion;

/// Bisection stops once the bracket is this narrow.
pub const BISECTION_WIDTH: f64 = 1e-4;
/// Offset from the located threshold at which the membership oracle is asked.
pub const ORACLE_OFFSET: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Werner,
    NoisyMub,
    Isotropic,
}

impl FromStr for Family {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "werner" => Ok(Family::Werner),
            "noisy-mub" => Ok(Family::NoisyMub),
            "isotropic" => Ok(Family::Isotropic),
            other => bail!("unknown family '{other}'; supported families: werner, noisy-mub, isotropic"),
        }
    }
}

impl Family {
    fn labels(self) -> (&'static str, &'static str) {
        match self {
            Family::NoisyMub => ("compatible", "incompatible"),
            _ => ("unsteerable", "steerable"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    #[serde(rename = "sr")]
    Sr,
    #[serde(rename = "E")]
    E,
    #[serde(rename = "gap")]
    Gap,
    #[serde(rename = "verdict")]
    Verdict,
}

impl FromStr for Quantity {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        serde_json::from_value(Value::String(s.into()))
            .with_context(|| format!("unknown output '{s}'; expected sr, E, gap or verdict"))
    }
}

pub const ALL_QUANTITIES: [Quantity; 4] = [Quantity::Sr, Quantity::E, Quantity::Gap, Quantity::Verdict];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: Family,
    /// `[min, max, steps]`.
    pub grid: (f64, f64, usize),
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Quantity>,
}

fn default_dim() -> usize {
    2
}

fn default_outputs() -> Vec<Quantity> {
    ALL_QUANTITIES.to_vec()
}

impl SweepSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        let (min, max, steps) = self.grid;
        if steps < 2 {
            bail!("grid needs at least 2 steps, got {steps}");
        }
        if !(min < max) {
            bail!("grid needs min < max, got [{min}, {max}]");
        }
        if min < 0.0 || max > 1.0 {
            bail!("family parameters live in [0, 1], got [{min}, {max}]");
        }
        if self.outputs.is_empty() {
            bail!("no outputs requested");
        }
        match (self.family, self.dim) {
            (Family::Werner, d) if d != 2 => bail!("werner is a two-qubit family, got dim {d}"),
            (_, d) if !(2..=4).contains(&d) => bail!("dim must be in 2..=4, got {d}"),
            _ => Ok(()),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let (min, max, steps) = self.grid;
        (0..steps)
            .map(|k| if k + 1 == steps { max } else { min + (max - min) * k as f64 / (steps - 1) as f64 })
            .collect()
    }

    fn wants(&self, q: Quantity) -> bool {
        self.outputs.contains(&q)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Row {
    pub parameter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sr: Option<f64>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub verdict: Verdict,
    pub conclusion: String,
}

fn measurements(family: Family, dim: usize, v: f64) -> anyhow::Result<MeasurementAssemblage> {
    Ok(match family {
        Family::NoisyMub => noisy_mubs(dim, 2, v)?,
        _ if dim == 2 => pauli_measurements("XZ")?,
        _ => fourier_mubs(dim, 2)?,
    })
}

fn assemblage(family: Family, dim: usize, p: f64) -> anyhow::Result<StateAssemblage> {
    let m = measurements(family, dim, p)?;
    let state = match family {
        Family::Werner => werner(p)?,
        Family::Isotropic => isotropic(dim, p)?,
        Family::NoisyMub => max_entangled(dim)?,
    };
    Ok(assemble(&state, &m)?)
}

/// The family's decision at `p`: the certification gap for steering
/// families, the energy criterion (cross-checked) for measurements.
fn decide(spec: &SweepSpec, p: f64, ctx: &ThermalContext, s: &SolverSettings) -> anyhow::Result<Verdict> {
    Ok(match spec.family {
        Family::NoisyMub => incompat_via_energy(&measurements(spec.family, spec.dim, p)?, ctx, s)?.verdict,
        _ => certify_steering(&assemblage(spec.family, spec.dim, p)?, ctx, s)?.verdict,
    })
}

fn row(spec: &SweepSpec, p: f64, ctx: &ThermalContext, s: &SolverSettings) -> anyhow::Result<Row> {
    let sigma = assemblage(spec.family, spec.dim, p)?;
    let need_cert = spec.wants(Quantity::Sr) || spec.wants(Quantity::Gap) || spec.family != Family::NoisyMub;
    let cert = if need_cert { Some(certify_steering(&sigma, ctx, s)?) } else { None };
    let (e, verdict) = match spec.family {
        Family::NoisyMub => {
            let r = incompat_via_energy(&measurements(spec.family, spec.dim, p)?, ctx, s)?;
            (Some(r.e), r.verdict)
        }
        _ => {
            let e = if spec.wants(Quantity::E) { Some(anomalous_energy(&sigma, ctx, s)?.e) } else { None };
            (e, cert.as_ref().map(|c| c.verdict).unwrap_or(Verdict::Inconclusive))
        }
    };
    let (free, resource) = spec.family.labels();
    Ok(Row {
        parameter: p,
        sr: cert.as_ref().filter(|_| spec.wants(Quantity::Sr)).map(|c| c.robustness.sr),
        e: e.filter(|_| spec.wants(Quantity::E)),
        gap: cert.as_ref().filter(|_| spec.wants(Quantity::Gap)).map(|c| c.gap),
        verdict,
        conclusion: conclusion(verdict, free, resource).into(),
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleCheck {
    pub parameter: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Transition {
    /// Adjacent grid points between which the decision flips.
    pub grid_bracket: (f64, f64),
    /// Bracket after bisection.
    pub bracket: (f64, f64),
    pub threshold: f64,
    pub bisection_steps: usize,
    /// Membership oracle (LHS feasibility or joint measurability) just
    /// below and just above the threshold.
    pub oracle_below: OracleCheck,
    pub oracle_above: OracleCheck,
    pub confirmed: bool,
}

fn oracle(spec: &SweepSpec, p: f64, s: &SolverSettings) -> anyhow::Result<Verdict> {
    Ok(match spec.family {
        Family::NoisyMub => joint_measurability(&measurements(spec.family, spec.dim, p)?, s)?.verdict(),
        _ => lhs_membership(&assemblage(spec.family, spec.dim, p)?, s)?.verdict(),
    })
}

fn locate(spec: &SweepSpec, rows: &[Row], ctx: &ThermalContext, s: &SolverSettings) -> anyhow::Result<Option<Transition>> {
    let Some(k) = rows
        .windows(2)
        .position(|w| w[0].verdict != Verdict::Resource && w[1].verdict == Verdict::Resource)
    else {
        return Ok(None);
    };
    let grid_bracket = (rows[k].parameter, rows[k + 1].parameter);
    let (mut lo, mut hi) = grid_bracket;
    let mut steps = 0;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if decide(spec, mid, ctx, s)? == Verdict::Resource {
            hi = mid;
        } else {
            lo = mid;
        }
        steps += 1;
    }
    let threshold = 0.5 * (lo + hi);
    let (min, max, _) = spec.grid;
    let below = (threshold - ORACLE_OFFSET).max(min);
    let above = (threshold + ORACLE_OFFSET).min(max);
    let oracle_below = OracleCheck {
        parameter: below,
        verdict: oracle(spec, below, s)?,
    };
    let oracle_above = OracleCheck {
        parameter: above,
        verdict: oracle(spec, above, s)?,
    };
    let confirmed = oracle_below.verdict == Verdict::Free && oracle_above.verdict == Verdict::Resource;
    Ok(Some(Transition {
        grid_bracket,
        bracket: (lo, hi),
        threshold,
        bisection_steps: steps,
        oracle_below,
        oracle_above,
        confirmed,
    }))
}

pub struct SweepOutput {
    pub rows: Vec<Row>,
    pub transition: Option<Transition>,
}

pub fn run(spec: &SweepSpec, ctx: &ThermalContext, s: &SolverSettings) -> anyhow::Result<SweepOutput> {
    spec.validate()?;
    let rows = spec
        .points()
        .into_par_iter()
        .map(|p| row(spec, p, ctx, s).with_context(|| format!("grid point {p}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let transition = locate(spec, &rows, ctx, s)?;
    Ok(SweepOutput { rows, transition })
}

impl SweepOutput {
    pub fn csv_table(&self, spec: &SweepSpec) -> (Vec<&'static str>, Vec<Vec<Value>>) {
        let mut header = vec!["parameter"];
        for q in ALL_QUANTITIES {
            if spec.wants(q) {
                header.push(match q {
                    Quantity::Sr => "sr",
                    Quantity::E => "E",
                    Quantity::Gap => "gap",
                    Quantity::Verdict => "verdict",
                });
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![json!(r.parameter)];
                for q in ALL_QUANTITIES {
                    if spec.wants(q) {
                        v.push(match q {
                            Quantity::Sr => json!(r.sr),
                            Quantity::E => json!(r.e),
                            Quantity::Gap => json!(r.gap),
                            Quantity::Verdict => json!(r.conclusion),
                        });
                    }
                }
                v
            })
            .collect();
        (header, rows)
    }
}
