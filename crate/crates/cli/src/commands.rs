//! One function per subcommand; each returns an [`Outcome`] for rendering.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail};
use serde::Serialize;
use serde_json::{json, Value};
use thermocert::incompat::{
    broadcast_compatibility, certify_channel_ensemble, discrimination_payoff, incompat_via_energy,
    joint_measurability, ChannelEnsemble,
};
use thermocert::steering::{anomalous_energy, assemble, certify_steering, lhs_membership, steering_robustness};
use thermocert::thermo::{deficit_identity, work_deficit};
use thermocert::{HermitianOperator, SolverSettings, StateAssemblage, ThermalContext, Verdict};

use crate::report::{InputDigest, Summary};
use crate::scenario::{Kind, Payload, Scenario, Source, ThermalSpec};

/// Flags shared by every command.
pub struct Options {
    pub input: Option<PathBuf>,
    pub kbt_ln2: Option<f64>,
    pub temp: Option<f64>,
    pub settings: SolverSettings,
    pub seed: u64,
}

impl Options {
    /// Command-line flags take precedence over the scenario's `thermal` block.
    pub fn thermal(&self, file: Option<&ThermalSpec>) -> anyhow::Result<ThermalContext> {
        if self.kbt_ln2.is_some() || self.temp.is_some() {
            let spec = ThermalSpec {
                kbt_ln2: self.kbt_ln2,
                temperature: self.temp,
                boltzmann: None,
            };
            return spec.context();
        }
        file.cloned().unwrap_or_default().context()
    }

    fn input(&self) -> anyhow::Result<&Path> {
        self.input.as_deref().ok_or_else(|| anyhow!("--input is required"))
    }
}

pub struct Outcome {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub thermal: ThermalContext,
    pub verdict: Option<Verdict>,
    pub conclusion: Option<String>,
    pub result: Value,
    pub summary: Summary,
}

impl Outcome {
    fn new(command: &str, inputs: Vec<InputDigest>, thermal: ThermalContext, result: impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            command: command.into(),
            inputs,
            thermal,
            verdict: None,
            conclusion: None,
            result: serde_json::to_value(result)?,
            summary: Vec::new(),
        })
    }

    fn judged(mut self, verdict: Verdict, free: &str, resource: &str) -> Self {
        self.verdict = Some(verdict);
        self.conclusion = Some(conclusion(verdict, free, resource).into());
        self
    }

    fn with_summary(mut self, summary: Summary) -> Self {
        if let Some(c) = &self.conclusion {
            let mut s = summary;
            s.push(("verdict", Value::String(c.clone())));
            self.summary = s;
        } else {
            self.summary = summary;
        }
        self
    }
}

pub fn conclusion<'a>(v: Verdict, free: &'a str, resource: &'a str) -> &'a str {
    match v {
        Verdict::Free => free,
        Verdict::Resource => resource,
        Verdict::Inconclusive => "inconclusive",
    }
}

fn digest(role: &str, source: &Source) -> InputDigest {
    InputDigest {
        role: role.into(),
        sha256: source.sha256.clone(),
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

pub fn work_eval(opts: &Options, hamiltonian: Option<&Path>) -> anyhow::Result<Outcome> {
    let scenario = Scenario::load(opts.input()?)?;
    let ctx = opts.thermal(scenario.thermal.as_ref())?;
    let mut inputs = vec![digest("input", &scenario.source)];
    let Payload::State(state) = &scenario.payload else {
        return Err(scenario.wrong_kind(&[Kind::State]));
    };
    let h = match (hamiltonian, &state.hamiltonian) {
        (Some(_), Some(_)) => bail!("Hamiltonian given both in the scenario and with --hamiltonian"),
        (Some(path), None) => {
            let src = Source::read(path)?;
            let h: HermitianOperator = src.parse()?;
            inputs.push(digest("hamiltonian", &src));
            h
        }
        (None, Some(h)) => h.clone(),
        (None, None) => bail!("work eval needs a Hamiltonian: payload.hamiltonian or --hamiltonian"),
    };
    let report = work_deficit(&state.rho, &h, &ctx)?;
    let (lhs, rhs) = deficit_identity(&state.rho, &h, &ctx)?;
    let result = json!({
        "w": report.w,
        "wInf": report.w_inf,
        "delta": report.delta,
        "identity": { "definitional": lhs, "closedForm": rhs, "residual": (lhs - rhs).abs() },
    });
    let summary = vec![
        ("w", num(report.w)),
        ("wInf", num(report.w_inf)),
        ("delta", num(report.delta)),
        ("identityResidual", num((lhs - rhs).abs())),
    ];
    Ok(Outcome::new("work eval", inputs, ctx, result)?.with_summary(summary))
}

/// The assemblage of a steering command: given directly, or assembled from a
/// bipartite state and a measurement file.
fn steering_input(opts: &Options, measurements: Option<&Path>) -> anyhow::Result<(StateAssemblage, Vec<InputDigest>, ThermalContext)> {
    let scenario = Scenario::load(opts.input()?)?;
    let ctx = opts.thermal(scenario.thermal.as_ref())?;
    let mut inputs = vec![digest("input", &scenario.source)];
    let sigma = match (&scenario.payload, measurements) {
        (Payload::Assemblage(a), None) => a.clone(),
        (Payload::Assemblage(_), Some(_)) => bail!("--measurements only applies to a state scenario"),
        (Payload::State(s), Some(path)) => {
            let m = Scenario::load(path)?;
            inputs.push(digest("measurements", &m.source));
            let Payload::Measurements(meas) = &m.payload else {
                return Err(m.wrong_kind(&[Kind::Measurements]));
            };
            assemble(&s.rho, meas)?
        }
        (Payload::State(_), None) => bail!("a state scenario needs --measurements to form an assemblage"),
        _ => return Err(scenario.wrong_kind(&[Kind::Assemblage, Kind::State])),
    };
    Ok((sigma, inputs, ctx))
}

const UNSTEERABLE: &str = "unsteerable";
const STEERABLE: &str = "steerable";

pub fn steering(opts: &Options, sub: &str, measurements: Option<&Path>) -> anyhow::Result<Outcome> {
    let (sigma, inputs, ctx) = steering_input(opts, measurements)?;
    let s = &opts.settings;
    let command = format!("steering {sub}");
    Ok(match sub {
        "assemble" => {
            let result = json!({ "kind": "assemblage", "payload": sigma });
            let summary = vec![
                ("nSettings", json!(sigma.n_settings())),
                ("nOutcomes", json!(sigma.n_outcomes())),
                ("dimB", json!(sigma.dim())),
            ];
            Outcome::new(&command, inputs, ctx, result)?.with_summary(summary)
        }
        "check-lhs" => {
            let m = lhs_membership(&sigma, s)?;
            let v = m.verdict();
            Outcome::new(&command, inputs, ctx, &m)?
                .judged(v, UNSTEERABLE, STEERABLE)
                .with_summary(vec![])
        }
        "robustness" => {
            let r = steering_robustness(&sigma, s)?;
            let summary = vec![
                ("sr", num(r.sr)),
                ("srDual", num(r.sr_dual)),
                ("dualityGap", num((r.sr - r.sr_dual).abs())),
            ];
            Outcome::new(&command, inputs, ctx, &r)?
                .judged(Verdict::from_value(r.sr), UNSTEERABLE, STEERABLE)
                .with_summary(summary)
        }
        "certify" => {
            let c = certify_steering(&sigma, &ctx, s)?;
            let summary = vec![
                ("sr", num(c.robustness.sr)),
                ("deficit", num(c.deficit)),
                ("lhsMaxDeficit", num(c.lhs_max_deficit)),
                ("gap", num(c.gap)),
            ];
            Outcome::new(&command, inputs, ctx, &c)?
                .judged(c.verdict, UNSTEERABLE, STEERABLE)
                .with_summary(summary)
        }
        "energy" => {
            let e = anomalous_energy(&sigma, &ctx, s)?;
            let summary = vec![("E", num(e.e))];
            Outcome::new(&command, inputs, ctx, &e)?
                .judged(e.verdict, UNSTEERABLE, STEERABLE)
                .with_summary(summary)
        }
        other => bail!("unknown steering subcommand '{other}'"),
    })
}

pub fn incompat(opts: &Options, sub: &str) -> anyhow::Result<Outcome> {
    let scenario = Scenario::load(opts.input()?)?;
    let ctx = opts.thermal(scenario.thermal.as_ref())?;
    let inputs = vec![digest("input", &scenario.source)];
    let Payload::Measurements(m) = &scenario.payload else {
        return Err(scenario.wrong_kind(&[Kind::Measurements]));
    };
    let command = format!("incompat {sub}");
    Ok(match sub {
        "check" => {
            let jm = joint_measurability(m, &opts.settings)?;
            let v = jm.verdict();
            Outcome::new(&command, inputs, ctx, &jm)?
                .judged(v, "compatible", "incompatible")
                .with_summary(vec![])
        }
        "certify-energy" => {
            let r = incompat_via_energy(m, &ctx, &opts.settings)?;
            let summary = vec![
                ("E", num(r.e)),
                ("jointMeasurability", json!(conclusion(r.joint_measurability, "compatible", "incompatible"))),
            ];
            Outcome::new(&command, inputs, ctx, &r)?
                .judged(r.verdict, "compatible", "incompatible")
                .with_summary(summary)
        }
        other => bail!("unknown incompat subcommand '{other}'"),
    })
}

fn channels_input(opts: &Options) -> anyhow::Result<(ChannelEnsemble, Vec<InputDigest>, ThermalContext)> {
    let scenario = Scenario::load(opts.input()?)?;
    let ctx = opts.thermal(scenario.thermal.as_ref())?;
    let inputs = vec![digest("input", &scenario.source)];
    match scenario.payload {
        Payload::Channels(ens) => Ok((ens, inputs, ctx)),
        _ => Err(scenario.wrong_kind(&[Kind::Channels])),
    }
}

const BROADCASTABLE: &str = "broadcast-compatible";
const NOT_BROADCASTABLE: &str = "broadcast-incompatible";

pub fn channels(opts: &Options, sub: &str) -> anyhow::Result<Outcome> {
    let command = format!("channels {sub}");
    Ok(match sub {
        "broadcast-check" => {
            let (ens, inputs, ctx) = channels_input(opts)?;
            let b = broadcast_compatibility(&ens, &opts.settings)?;
            let v = b.verdict();
            Outcome::new(&command, inputs, ctx, &b)?
                .judged(v, BROADCASTABLE, NOT_BROADCASTABLE)
                .with_summary(vec![])
        }
        "certify" => {
            let (ens, inputs, ctx) = channels_input(opts)?;
            let c = certify_channel_ensemble(&ens, &ctx, &opts.settings)?;
            let summary = vec![
                ("robustness", num(c.robustness.robustness)),
                ("robustnessDual", num(c.robustness.robustness_dual)),
                ("deficit", num(c.deficit)),
                ("freeMaxDeficit", num(c.free_max_deficit)),
                ("gap", num(c.gap)),
                ("payoffGap", num(c.payoff_gap)),
                ("offsetResidual", num(c.offset_residual)),
                ("positivized", json!(c.positivized)),
            ];
            Outcome::new(&command, inputs, ctx, &c)?
                .judged(c.verdict, BROADCASTABLE, NOT_BROADCASTABLE)
                .with_summary(summary)
        }
        other => bail!("unknown channels subcommand '{other}'"),
    })
}

/// Payoff of a discrimination task (`--input`) on an ensemble (`--channels`).
pub fn channels_payoff(opts: &Options, channels: &Path) -> anyhow::Result<Outcome> {
    let scenario = Scenario::load(opts.input()?)?;
    let ctx = opts.thermal(scenario.thermal.as_ref())?;
    let Payload::DiscriminationTask(task) = &scenario.payload else {
        return Err(scenario.wrong_kind(&[Kind::DiscriminationTask]));
    };
    let ens_file = Scenario::load(channels)?;
    let Payload::Channels(ens) = &ens_file.payload else {
        return Err(ens_file.wrong_kind(&[Kind::Channels]));
    };
    let inputs = vec![digest("input", &scenario.source), digest("channels", &ens_file.source)];
    let payoff = discrimination_payoff(task, ens)?;
    let positive = task.is_positive(thermocert::incompat::TASK_EPSILON)?;
    let result = json!({ "payoff": payoff, "positive": positive });
    let summary = vec![("payoff", num(payoff)), ("positive", json!(positive))];
    Ok(Outcome::new("channels payoff", inputs, ctx, result)?.with_summary(summary))
}
