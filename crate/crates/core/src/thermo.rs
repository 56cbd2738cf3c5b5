//! Thermal states, extractable work and the work deficit.
//!
//! Energies are measured in units of `k_B T ln 2`, carried by
//! [`ThermalContext::kbt_ln2`]. With `β' = 1/kbt_ln2` the thermal state is
//! `γ = 2^{−β'H} / Z`, `Z = tr 2^{−β'H} = tr e^{−H/k_BT}`, and
//!
//! ```text
//!   W(ρ, H)  = kbt_ln2 · D(ρ‖γ)
//!   W_inf(ρ) = kbt_ln2 · (log₂ d − S(ρ))
//!   Δ(ρ, H)  = W − W_inf
//! ```
//!
//! Expanding `D(ρ‖γ) = −S(ρ) − tr ρ log₂γ` with `log₂γ = −β'H − log₂Z · I`
//! fixes the sign of the closed form used everywhere in this crate:
//!
//! ```text
//!   Δ(ρ, H) / kbt_ln2 = + tr(Hρ)/kbt_ln2 + log₂ tr e^{−H/k_BT} − log₂ d
//! ```
//!
//! The state enters only through `tr(Hρ)`, so for conditional states
//! `η_{a|x} = 𝒜_{a|x}/P(a|x)` the weighted deficit `P(a|x) Δ(η_{a|x}, H)` is
//! affine in `𝒜_{a|x}` with a constant that depends on `P(a|x)` and `H` only.

use serde::{Deserialize, Serialize};

use crate::assemblage::{HamiltonianAssemblage, StateAssemblage};
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, rel_entropy_with_log, von_neumann_entropy, DensityMatrix, HermitianOperator};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Physical temperature attached to a context for unit conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TemperatureLabel {
    /// Kelvin.
    pub temperature: f64,
    /// J/K.
    pub boltzmann: f64,
}

/// Energy scale of a work-extraction experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThermalContext {
    kbt_ln2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<TemperatureLabel>,
}

impl Default for ThermalContext {
    fn default() -> Self {
        Self {
            kbt_ln2: 1.0,
            label: None,
        }
    }
}

impl ThermalContext {
    pub fn new(kbt_ln2: f64) -> Result<Self> {
        if !(kbt_ln2 > 0.0 && kbt_ln2.is_finite()) {
            return Err(Error::Domain(format!("kBT ln2 must be positive and finite, got {kbt_ln2}")));
        }
        Ok(Self { kbt_ln2, label: None })
    }

    /// `kbt_ln2 = k_B T ln 2` in joules.
    pub fn from_temperature(temperature: f64, boltzmann: f64) -> Result<Self> {
        let mut ctx = Self::new(boltzmann * temperature * std::f64::consts::LN_2)?;
        ctx.label = Some(TemperatureLabel {
            temperature,
            boltzmann,
        });
        Ok(ctx)
    }

    pub fn kbt_ln2(&self) -> f64 {
        self.kbt_ln2
    }

    pub fn label(&self) -> Option<TemperatureLabel> {
        self.label
    }

    /// Same context with the energy unit multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.kbt_ln2 * c)
    }

    /// Name of the unit results are expressed in.
    pub fn unit(&self) -> &'static str {
        match (self.label, self.kbt_ln2 == 1.0) {
            (Some(_), _) => "J",
            (None, true) => "bits",
            (None, false) => "kBT_ln2-scaled",
        }
    }
}

/// `W`, `W_inf` and `Δ = W − W_inf` for one state and Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkReport {
    pub w: f64,
    pub w_inf: f64,
    pub delta: f64,
    pub kbt_ln2: f64,
    pub unit: String,
}

fn check_dims(rho: &DensityMatrix, h: &HermitianOperator) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(Error::Shape(format!(
            "state of dim {} with Hamiltonian of dim {}",
            rho.dim(),
            h.dim()
        )));
    }
    Ok(())
}

/// `log₂γ` and `log₂Z`, shifted by the ground energy so no power overflows.
struct Gibbs {
    log2_gamma: HermitianOperator,
    populations: Vec<f64>,
    log2_z: f64,
    eig: crate::linalg::Eigen,
}

fn gibbs(h: &HermitianOperator, ctx: &ThermalContext) -> Result<Gibbs> {
    let e = eig_hermitian(h)?;
    let e0 = e.values[0];
    let shifted: Vec<f64> = e.values.iter().map(|v| -(v - e0) / ctx.kbt_ln2).collect();
    let log2_zs = shifted.iter().map(|s| s.exp2()).sum::<f64>().log2();
    let log2_gamma: Vec<f64> = shifted.iter().map(|s| s - log2_zs).collect();
    let populations = log2_gamma.iter().map(|l| l.exp2()).collect();
    Ok(Gibbs {
        log2_gamma: e.reconstruct_with(&log2_gamma),
        populations,
        log2_z: log2_zs - e0 / ctx.kbt_ln2,
        eig: e,
    })
}

/// `log₂ tr e^{−H/k_BT}`.
pub fn log2_partition(h: &HermitianOperator, ctx: &ThermalContext) -> Result<f64> {
    Ok(gibbs(h, ctx)?.log2_z)
}

/// `γ = e^{−H/k_BT} / tr e^{−H/k_BT}`.
pub fn thermal_state(h: &HermitianOperator, ctx: &ThermalContext) -> Result<DensityMatrix> {
    let g = gibbs(h, ctx)?;
    DensityMatrix::new(g.eig.reconstruct_with(&g.populations))
}

/// `W(ρ, H) = kbt_ln2 · D(ρ‖γ(H))`.
pub fn extractable_work(rho: &DensityMatrix, h: &HermitianOperator, ctx: &ThermalContext) -> Result<f64> {
    check_dims(rho, h)?;
    let g = gibbs(h, ctx)?;
    Ok(ctx.kbt_ln2 * rel_entropy_with_log(rho, &g.log2_gamma)?)
}

/// `W_inf(ρ) = kbt_ln2 · (log₂ d − S(ρ))`.
pub fn info_work(rho: &DensityMatrix, ctx: &ThermalContext) -> Result<f64> {
    let d = rho.dim() as f64;
    Ok(ctx.kbt_ln2 * (d.log2() - von_neumann_entropy(rho)?))
}

pub fn work_deficit(rho: &DensityMatrix, h: &HermitianOperator, ctx: &ThermalContext) -> Result<WorkReport> {
    let w = extractable_work(rho, h, ctx)?;
    let w_inf = info_work(rho, ctx)?;
    Ok(WorkReport {
        w,
        w_inf,
        delta: w - w_inf,
        kbt_ln2: ctx.kbt_ln2,
        unit: ctx.unit().to_string(),
    })
}

/// Closed-form `Δ(ρ, H)/kbt_ln2` (see the module docs).
pub fn deficit_closed_form(rho: &DensityMatrix, h: &HermitianOperator, ctx: &ThermalContext) -> Result<f64> {
    check_dims(rho, h)?;
    Ok(h.inner(rho.op()) / ctx.kbt_ln2 + log2_partition(h, ctx)? - (rho.dim() as f64).log2())
}

/// `(lhs, rhs)` where `lhs = Δ/kbt_ln2` from the two divergences and `rhs`
/// is the closed form.
pub fn deficit_identity(rho: &DensityMatrix, h: &HermitianOperator, ctx: &ThermalContext) -> Result<(f64, f64)> {
    let lhs = work_deficit(rho, h, ctx)?.delta / ctx.kbt_ln2;
    Ok((lhs, deficit_closed_form(rho, h, ctx)?))
}

fn check_matching(sigma: &StateAssemblage, hams: &HamiltonianAssemblage) -> Result<()> {
    if !sigma.same_shape(hams.n_settings(), hams.n_outcomes(), hams.dim()) {
        return Err(Error::Shape(format!(
            "assemblage is {}x{} on dim {}, Hamiltonians are {}x{} on dim {}",
            sigma.n_settings(),
            sigma.n_outcomes(),
            sigma.dim(),
            hams.n_settings(),
            hams.n_outcomes(),
            hams.dim()
        )));
    }
    Ok(())
}

/// `Σ_{a,x} P(x) P(a|x) Δ(η_{a|x}, H_{a|x})`, each term evaluated from the
/// divergences. Outcomes with negligible `P(a|x)` contribute zero.
pub fn avg_deficit(sigma: &StateAssemblage, hams: &HamiltonianAssemblage, ctx: &ThermalContext) -> Result<f64> {
    check_matching(sigma, hams)?;
    let mut total = 0.0;
    for x in 0..sigma.n_settings() {
        for a in 0..sigma.n_outcomes() {
            if let Some(eta) = sigma.conditional(a, x)? {
                let delta = work_deficit(&eta, hams.element(a, x), ctx)?.delta;
                total += sigma.p_x()[x] * sigma.probability(a, x) * delta;
            }
        }
    }
    Ok(total)
}

/// Energy part `Σ_{a,x} P(x) tr(H_{a|x} 𝒜_{a|x})` of [`avg_deficit`].
pub fn avg_energy(sigma: &StateAssemblage, hams: &HamiltonianAssemblage) -> Result<f64> {
    check_matching(sigma, hams)?;
    let mut total = 0.0;
    for x in 0..sigma.n_settings() {
        for a in 0..sigma.n_outcomes() {
            total += sigma.p_x()[x] * hams.element(a, x).inner(sigma.element(a, x));
        }
    }
    Ok(total)
}

/// State-independent part of [`avg_deficit`]:
/// `kbt_ln2 Σ_{a,x} P(x) P(a|x) (log₂Z_{a|x} − log₂ d)`. It is shared by
/// every assemblage with the same `P(a|x)`.
pub fn deficit_offset(
    p_x: &[f64],
    p_ax: impl Fn(usize, usize) -> f64,
    hams: &HamiltonianAssemblage,
    ctx: &ThermalContext,
) -> Result<f64> {
    let log2_d = (hams.dim() as f64).log2();
    let mut total = 0.0;
    for x in 0..hams.n_settings() {
        for a in 0..hams.n_outcomes() {
            let p = p_ax(a, x);
            if p < crate::assemblage::NEGLIGIBLE_PROB {
                continue;
            }
            total += p_x[x] * p * (log2_partition(hams.element(a, x), ctx)? - log2_d);
        }
    }
    Ok(ctx.kbt_ln2 * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_populations() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let g = thermal_state(&h, &ThermalContext::default()).unwrap();
        // p₁/p₀ = 2^(−E/kbt_ln2)
        let ground = 1.0 / (1.0 + (-1.0f64).exp2());
        assert!((g.op().matrix()[(0, 0)].re - ground).abs() < 1e-14);
    }

    #[test]
    fn huge_gaps_do_not_overflow() {
        let h = HermitianOperator::from_real_diagonal(&[-5e4, 0.0, 5e4]);
        let ctx = ThermalContext::new(1e-2).unwrap();
        let g = thermal_state(&h, &ctx).unwrap();
        assert!((g.op().matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(log2_partition(&h, &ctx).unwrap().is_finite());
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(ThermalContext::new(0.0).is_err());
        assert!(ThermalContext::new(f64::NAN).is_err());
        assert!(ThermalContext::from_temperature(-1.0, BOLTZMANN).is_err());
    }
}
