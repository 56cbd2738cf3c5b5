//! Scenario files: a `kind` tag, a typed `payload` and optional thermal data.

use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use thermocert::incompat::{ChannelEnsemble, DiscriminationTask};
use thermocert::thermo::BOLTZMANN;
use thermocert::{DensityMatrix, HermitianOperator, MeasurementAssemblage, StateAssemblage, ThermalContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    State,
    Assemblage,
    Measurements,
    Channels,
    DiscriminationTask,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::State => "state",
            Kind::Assemblage => "assemblage",
            Kind::Measurements => "measurements",
            Kind::Channels => "channels",
            Kind::DiscriminationTask => "discrimination-task",
        })
    }
}

/// `{"kBT_ln2": x}` or `{"T": t, "kB": k}` (`kB` defaults to SI).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    #[serde(rename = "kBT_ln2")]
    pub kbt_ln2: Option<f64>,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    #[serde(rename = "kB")]
    pub boltzmann: Option<f64>,
}

impl ThermalSpec {
    pub fn context(&self) -> anyhow::Result<ThermalContext> {
        match (self.kbt_ln2, self.temperature) {
            (Some(_), Some(_)) => bail!("thermal: give either kBT_ln2 or T, not both"),
            (Some(s), None) => {
                if self.boltzmann.is_some() {
                    bail!("thermal: kB only applies together with T");
                }
                Ok(ThermalContext::new(s)?)
            }
            (None, Some(t)) => Ok(ThermalContext::from_temperature(t, self.boltzmann.unwrap_or(BOLTZMANN))?),
            (None, None) => Ok(ThermalContext::default()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    kind: Kind,
    payload: Box<RawValue>,
    #[serde(default)]
    thermal: Option<ThermalSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePayload {
    pub rho: DensityMatrix,
    /// Hamiltonian for `work eval`.
    #[serde(default)]
    pub hamiltonian: Option<HermitianOperator>,
}

#[derive(Debug)]
pub enum Payload {
    State(StatePayload),
    Assemblage(StateAssemblage),
    Measurements(MeasurementAssemblage),
    Channels(ChannelEnsemble),
    DiscriminationTask(DiscriminationTask),
}

/// Raw bytes of an input file with their digest.
pub struct Source {
    pub path: String,
    pub text: String,
    pub sha256: String,
}

impl Source {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        Ok(Self {
            path: path.display().to_string(),
            text,
            sha256,
        })
    }

    /// Parses `self.text` (or the substring starting at byte `offset`) and
    /// reports errors as `path:line:column`.
    fn parse_at<T: DeserializeOwned>(&self, offset: usize, fragment: &str) -> anyhow::Result<T> {
        serde_json::from_str(fragment).map_err(|e| {
            let before = &self.text[..offset];
            let base_line = before.matches('\n').count() + 1;
            let base_col = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            let (line, col) = if e.line() <= 1 {
                (base_line, base_col + e.column().saturating_sub(1))
            } else {
                (base_line + e.line() - 1, e.column())
            };
            anyhow!("{}:{line}:{col}: {}", self.path, strip_position(&e.to_string()))
        })
    }

    pub fn parse<T: DeserializeOwned>(&self) -> anyhow::Result<T> {
        self.parse_at(0, &self.text)
    }
}

fn strip_position(msg: &str) -> &str {
    msg.rfind(" at line ").map_or(msg, |p| &msg[..p])
}

pub struct Scenario {
    pub source: Source,
    pub payload: Payload,
    pub thermal: Option<ThermalSpec>,
}

impl Scenario {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let source = Source::read(path)?;
        let env: Envelope = source.parse()?;
        let raw = env.payload.get();
        let offset = source.text.find(raw).unwrap_or(0);
        let payload = match env.kind {
            Kind::State => Payload::State(source.parse_at(offset, raw)?),
            Kind::Assemblage => Payload::Assemblage(source.parse_at(offset, raw)?),
            Kind::Measurements => Payload::Measurements(source.parse_at(offset, raw)?),
            Kind::Channels => Payload::Channels(source.parse_at(offset, raw)?),
            Kind::DiscriminationTask => Payload::DiscriminationTask(source.parse_at(offset, raw)?),
        };
        Ok(Self {
            source,
            payload,
            thermal: env.thermal,
        })
    }

    pub fn kind(&self) -> Kind {
        match self.payload {
            Payload::State(_) => Kind::State,
            Payload::Assemblage(_) => Kind::Assemblage,
            Payload::Measurements(_) => Kind::Measurements,
            Payload::Channels(_) => Kind::Channels,
            Payload::DiscriminationTask(_) => Kind::DiscriminationTask,
        }
    }

    pub fn wrong_kind(&self, expected: &[Kind]) -> anyhow::Error {
        let list: Vec<String> = expected.iter().map(|k| k.to_string()).collect();
        anyhow!(
            "{}: scenario kind '{}' not accepted here (expected {})",
            self.source.path,
            self.kind(),
            list.join(" or ")
        )
    }
}
