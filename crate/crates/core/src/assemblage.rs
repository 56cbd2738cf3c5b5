//! Indexed operator families `{X_{a|x}}`: state assemblages, Hamiltonian
//! assemblages, measurement assemblages, and the deterministic response
//! functions that parameterize local hidden-state models.
//!
//! Elements are stored setting-major: `(a, x)` lives at `x * n_outcomes + a`.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, HermitianOperator, PSD_TOL};

/// Tolerance on no-signalling, normalization and POVM completeness.
pub const ASSEMBLAGE_TOL: f64 = 1e-9;
/// Outcomes with `P(a|x)` below this have no conditional state.
pub const NEGLIGIBLE_PROB: f64 = 1e-12;
/// Largest supported number of deterministic strategies `o^m`.
pub const MAX_STRATEGIES: usize = 4096;

fn check_probability_vector(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::Probability(format!(
            "{what} has {} entries, expected {n}",
            p.len()
        )));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Probability(format!("{what} has entry {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > ASSEMBLAGE_TOL {
        return Err(Error::Probability(format!("{what} sums to {total}")));
    }
    Ok(())
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_grid(
    n_settings: usize,
    n_outcomes: usize,
    elements: &[Vec<HermitianOperator>],
) -> Result<usize> {
    if n_settings == 0 || n_outcomes == 0 {
        return Err(Error::Assemblage("need at least one setting and one outcome".into()));
    }
    if elements.len() != n_settings {
        return Err(Error::Shape(format!(
            "{} settings given, expected {n_settings}",
            elements.len()
        )));
    }
    let dim = elements[0].first().map(|e| e.dim()).unwrap_or(0);
    for (x, row) in elements.iter().enumerate() {
        if row.len() != n_outcomes {
            return Err(Error::Shape(format!(
                "setting {x} has {} outcomes, expected {n_outcomes}",
                row.len()
            )));
        }
        if let Some(e) = row.iter().find(|e| e.dim() != dim) {
            return Err(Error::Shape(format!(
                "element of dim {} in setting {x}, expected {dim}",
                e.dim()
            )));
        }
    }
    Ok(dim)
}

fn check_psd(elements: &[HermitianOperator], n_outcomes: usize, tol: f64) -> Result<()> {
    for (k, e) in elements.iter().enumerate() {
        let min = e.min_eigenvalue()?;
        if min < -tol {
            return Err(Error::Assemblage(format!(
                "element {}|{} has eigenvalue {min:e}",
                k % n_outcomes,
                k / n_outcomes
            )));
        }
    }
    Ok(())
}

/// Subnormalized conditional states `𝒜_{a|x}` on Bob's side together with
/// the setting distribution `P(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateAssemblage {
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
    p_x: Vec<f64>,
    elements: Vec<HermitianOperator>,
}

impl StateAssemblage {
    /// Validates positivity, normalization and no-signalling. `elements` is
    /// indexed `[x][a]`; `p_x` defaults to uniform.
    pub fn new(
        n_settings: usize,
        n_outcomes: usize,
        elements: Vec<Vec<HermitianOperator>>,
        p_x: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = check_grid(n_settings, n_outcomes, &elements)?;
        let p_x = p_x.unwrap_or_else(|| uniform(n_settings));
        check_probability_vector(&p_x, n_settings, "pX")?;
        let elements: Vec<HermitianOperator> = elements.into_iter().flatten().collect();
        check_psd(&elements, n_outcomes, PSD_TOL)?;
        let s = Self {
            n_settings,
            n_outcomes,
            dim,
            p_x,
            elements,
        };
        let rho_b = s.marginal(0);
        let tr = rho_b.trace();
        if (tr - 1.0).abs() > ASSEMBLAGE_TOL {
            return Err(Error::Assemblage(format!("total trace {tr} is not 1")));
        }
        for x in 1..n_settings {
            let dev = s.marginal(x).max_abs_diff(&rho_b);
            if dev > ASSEMBLAGE_TOL {
                return Err(Error::Assemblage(format!(
                    "setting {x} violates no-signalling by {dev:e}"
                )));
            }
        }
        Ok(s)
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    /// Replaces the setting distribution.
    pub fn with_p_x(mut self, p_x: Vec<f64>) -> Result<Self> {
        check_probability_vector(&p_x, self.n_settings, "pX")?;
        self.p_x = p_x;
        Ok(self)
    }

    pub fn element(&self, a: usize, x: usize) -> &HermitianOperator {
        &self.elements[x * self.n_outcomes + a]
    }

    /// All elements, setting-major.
    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    /// `P(a|x) = tr 𝒜_{a|x}`.
    pub fn probability(&self, a: usize, x: usize) -> f64 {
        self.element(a, x).trace()
    }

    /// `η_{a|x} = 𝒜_{a|x} / P(a|x)`, or `None` when the outcome is negligible.
    pub fn conditional(&self, a: usize, x: usize) -> Result<Option<DensityMatrix>> {
        let p = self.probability(a, x);
        if p < NEGLIGIBLE_PROB {
            return Ok(None);
        }
        DensityMatrix::normalized(self.element(a, x).clone()).map(Some)
    }

    /// `Σ_a 𝒜_{a|x}`.
    pub fn marginal(&self, x: usize) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(self.dim);
        for a in 0..self.n_outcomes {
            acc += self.element(a, x);
        }
        acc
    }

    /// Bob's reduced state `ρ_B`, averaged over settings.
    pub fn reduced_state(&self) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(self.dim);
        for x in 0..self.n_settings {
            acc += &self.marginal(x);
        }
        acc.scale(1.0 / self.n_settings as f64)
    }

    pub(crate) fn same_shape(&self, n_settings: usize, n_outcomes: usize, dim: usize) -> bool {
        self.n_settings == n_settings && self.n_outcomes == n_outcomes && self.dim == dim
    }
}

/// Local Hamiltonians `H_{a|x} ⪰ 0`, one per outcome and setting.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianAssemblage {
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
    elements: Vec<HermitianOperator>,
}

impl HamiltonianAssemblage {
    /// `elements` is indexed `[x][a]`; every element must be PSD within
    /// [`PSD_TOL`].
    pub fn new(
        n_settings: usize,
        n_outcomes: usize,
        elements: Vec<Vec<HermitianOperator>>,
    ) -> Result<Self> {
        let dim = check_grid(n_settings, n_outcomes, &elements)?;
        let elements: Vec<HermitianOperator> = elements.into_iter().flatten().collect();
        check_psd(&elements, n_outcomes, PSD_TOL)?;
        Ok(Self {
            n_settings,
            n_outcomes,
            dim,
            elements,
        })
    }

    /// Builds from a setting-major flat list.
    pub fn from_flat(
        n_settings: usize,
        n_outcomes: usize,
        elements: Vec<HermitianOperator>,
    ) -> Result<Self> {
        if elements.len() != n_settings * n_outcomes {
            return Err(Error::Shape(format!(
                "{} elements for {n_settings} settings and {n_outcomes} outcomes",
                elements.len()
            )));
        }
        let grid = elements
            .chunks(n_outcomes.max(1))
            .map(|c| c.to_vec())
            .collect();
        Self::new(n_settings, n_outcomes, grid)
    }

    pub fn zeros(n_settings: usize, n_outcomes: usize, dim: usize) -> Self {
        Self {
            n_settings,
            n_outcomes,
            dim,
            elements: vec![HermitianOperator::zeros(dim); n_settings * n_outcomes],
        }
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn element(&self, a: usize, x: usize) -> &HermitianOperator {
        &self.elements[x * self.n_outcomes + a]
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            elements: self.elements.iter().map(|e| e.scale(s)).collect(),
            ..self.clone()
        }
    }
}

/// POVMs `{M_{a|x}}_a`, one per setting, all with the same outcome count.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementAssemblage {
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
    effects: Vec<HermitianOperator>,
}

impl MeasurementAssemblage {
    /// `effects` is indexed `[x][a]`. Each effect must be PSD within
    /// [`PSD_TOL`] and each setting must sum to the identity within
    /// [`ASSEMBLAGE_TOL`].
    pub fn new(
        n_settings: usize,
        n_outcomes: usize,
        effects: Vec<Vec<HermitianOperator>>,
    ) -> Result<Self> {
        let dim = check_grid(n_settings, n_outcomes, &effects)?;
        let effects: Vec<HermitianOperator> = effects.into_iter().flatten().collect();
        check_psd(&effects, n_outcomes, PSD_TOL)?;
        let s = Self {
            n_settings,
            n_outcomes,
            dim,
            effects,
        };
        let id = HermitianOperator::identity(dim);
        for x in 0..n_settings {
            let mut acc = HermitianOperator::zeros(dim);
            for a in 0..n_outcomes {
                acc += s.effect(a, x);
            }
            let dev = acc.max_abs_diff(&id);
            if dev > ASSEMBLAGE_TOL {
                return Err(Error::Assemblage(format!(
                    "POVM {x} misses completeness by {dev:e}"
                )));
            }
        }
        Ok(s)
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effect(&self, a: usize, x: usize) -> &HermitianOperator {
        &self.effects[x * self.n_outcomes + a]
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    /// The POVM of setting `x`.
    pub fn povm(&self, x: usize) -> &[HermitianOperator] {
        &self.effects[x * self.n_outcomes..(x + 1) * self.n_outcomes]
    }

    /// `v M_{a|x} + (1 − v) tr(M_{a|x}) I/d`.
    pub fn with_visibility(&self, v: f64) -> Result<Self> {
        let d = self.dim as f64;
        let grid = (0..self.n_settings)
            .map(|x| {
                (0..self.n_outcomes)
                    .map(|a| {
                        let m = self.effect(a, x);
                        m.scale(v) + HermitianOperator::identity(self.dim).scale((1.0 - v) * m.trace() / d)
                    })
                    .collect()
            })
            .collect();
        Self::new(self.n_settings, self.n_outcomes, grid)
    }
}

/// All deterministic response functions `λ: x ↦ a`. Strategy `λ` answers
/// setting `x` with the `x`-th base-`o` digit of `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeterministicStrategies {
    n_settings: usize,
    n_outcomes: usize,
    count: usize,
}

impl DeterministicStrategies {
    pub fn new(n_settings: usize, n_outcomes: usize) -> Result<Self> {
        let mut count: usize = 1;
        for _ in 0..n_settings {
            count = count
                .checked_mul(n_outcomes)
                .filter(|&c| c <= MAX_STRATEGIES)
                .ok_or_else(|| {
                    Error::TooLarge(format!(
                        "{n_outcomes}^{n_settings} deterministic strategies exceed {MAX_STRATEGIES}"
                    ))
                })?;
        }
        Ok(Self {
            n_settings,
            n_outcomes,
            count,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    /// The outcome strategy `lambda` assigns to setting `x`.
    pub fn response(&self, lambda: usize, x: usize) -> usize {
        (lambda / self.n_outcomes.pow(x as u32)) % self.n_outcomes
    }

    /// `D(a|x,λ) ∈ {0, 1}`.
    pub fn d(&self, a: usize, x: usize, lambda: usize) -> f64 {
        if self.response(lambda, x) == a {
            1.0
        } else {
            0.0
        }
    }

    /// `Σ_{a,x} D(a|x,λ) ops[x][a]` for a setting-major slice.
    pub(crate) fn collect(&self, lambda: usize, ops: &[HermitianOperator], weights: &[f64]) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(ops[0].dim());
        for x in 0..self.n_settings {
            let a = self.response(lambda, x);
            acc += &ops[x * self.n_outcomes + a].scale(weights[x]);
        }
        acc
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AssemblageWire {
    n_settings: usize,
    n_outcomes: usize,
    dim_b: usize,
    #[serde(default, rename = "pX", skip_serializing_if = "Option::is_none")]
    p_x: Option<Vec<f64>>,
    elements: BTreeMap<String, HermitianOperator>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MeasurementWire {
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
    effects: BTreeMap<String, HermitianOperator>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct HamiltonianWire {
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
    elements: BTreeMap<String, HermitianOperator>,
}

fn key(a: usize, x: usize) -> String {
    format!("{a}|{x}")
}

fn to_map(ops: &[HermitianOperator], n_outcomes: usize) -> BTreeMap<String, HermitianOperator> {
    ops.iter()
        .enumerate()
        .map(|(k, op)| (key(k % n_outcomes, k / n_outcomes), op.clone()))
        .collect()
}

fn from_map(
    mut map: BTreeMap<String, HermitianOperator>,
    n_settings: usize,
    n_outcomes: usize,
    dim: usize,
) -> std::result::Result<Vec<Vec<HermitianOperator>>, String> {
    let mut grid = Vec::with_capacity(n_settings);
    for x in 0..n_settings {
        let mut row = Vec::with_capacity(n_outcomes);
        for a in 0..n_outcomes {
            let op = map
                .remove(&key(a, x))
                .ok_or_else(|| format!("missing element \"{}\"", key(a, x)))?;
            if op.dim() != dim {
                return Err(format!("element \"{}\" has dim {}, expected {dim}", key(a, x), op.dim()));
            }
            row.push(op);
        }
        grid.push(row);
    }
    if let Some(k) = map.keys().next() {
        return Err(format!("unexpected element \"{k}\""));
    }
    Ok(grid)
}

impl Serialize for StateAssemblage {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AssemblageWire {
            n_settings: self.n_settings,
            n_outcomes: self.n_outcomes,
            dim_b: self.dim,
            p_x: Some(self.p_x.clone()),
            elements: to_map(&self.elements, self.n_outcomes),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateAssemblage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = AssemblageWire::deserialize(deserializer)?;
        let grid = from_map(w.elements, w.n_settings, w.n_outcomes, w.dim_b).map_err(D::Error::custom)?;
        StateAssemblage::new(w.n_settings, w.n_outcomes, grid, w.p_x).map_err(D::Error::custom)
    }
}

impl Serialize for HamiltonianAssemblage {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        HamiltonianWire {
            n_settings: self.n_settings,
            n_outcomes: self.n_outcomes,
            dim: self.dim,
            elements: to_map(&self.elements, self.n_outcomes),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HamiltonianAssemblage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = HamiltonianWire::deserialize(deserializer)?;
        let grid = from_map(w.elements, w.n_settings, w.n_outcomes, w.dim).map_err(D::Error::custom)?;
        HamiltonianAssemblage::new(w.n_settings, w.n_outcomes, grid).map_err(D::Error::custom)
    }
}

impl Serialize for MeasurementAssemblage {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasurementWire {
            n_settings: self.n_settings,
            n_outcomes: self.n_outcomes,
            dim: self.dim,
            effects: to_map(&self.effects, self.n_outcomes),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeasurementAssemblage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let w = MeasurementWire::deserialize(deserializer)?;
        let grid = from_map(w.effects, w.n_settings, w.n_outcomes, w.dim).map_err(D::Error::custom)?;
        MeasurementAssemblage::new(w.n_settings, w.n_outcomes, grid).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_enumerate_all_functions() {
        let s = DeterministicStrategies::new(3, 2).unwrap();
        assert_eq!(s.count(), 8);
        let mut seen = std::collections::HashSet::new();
        for l in 0..s.count() {
            let f: Vec<usize> = (0..3).map(|x| s.response(l, x)).collect();
            for x in 0..3 {
                let total: f64 = (0..2).map(|a| s.d(a, x, l)).sum();
                assert_eq!(total, 1.0);
            }
            assert!(seen.insert(f));
        }
        assert!(DeterministicStrategies::new(13, 2).is_err());
        assert_eq!(DeterministicStrategies::new(12, 2).unwrap().count(), 4096);
    }

    #[test]
    fn signalling_assemblage_is_rejected() {
        let p0 = HermitianOperator::from_real_diagonal(&[0.5, 0.0]);
        let p1 = HermitianOperator::from_real_diagonal(&[0.0, 0.5]);
        let z = HermitianOperator::zeros(2);
        let ok = StateAssemblage::new(2, 2, vec![vec![p0.clone(), p1.clone()], vec![p1.clone(), p0.clone()]], None);
        assert!(ok.is_ok());
        let bad = StateAssemblage::new(2, 2, vec![vec![p0.clone(), p1.clone()], vec![p0.clone(), z]], None);
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip() {
        let p0 = HermitianOperator::from_real_diagonal(&[0.5, 0.0]);
        let p1 = HermitianOperator::from_real_diagonal(&[0.0, 0.5]);
        let s = StateAssemblage::new(1, 2, vec![vec![p0, p1]], None).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"0|0\""));
        let back: StateAssemblage = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let missing = text.replace("\"1|0\"", "\"1|1\"");
        assert!(serde_json::from_str::<StateAssemblage>(&missing).is_err());
    }
}
