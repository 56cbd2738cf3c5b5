//! Steering: assemblages from bipartite states, local hidden-state models,
//! steering robustness and its dual witness, work-deficit certification and
//! the anomalous energy flow `E(σ)`.
//!
//! An LHS assemblage is `𝒜_{a|x} = Σ_λ D(a|x,λ) ρ_λ` over the deterministic
//! strategies of [`DeterministicStrategies`]. `LHS(σ)` is the subset whose
//! outcome statistics `tr 𝒜_{a|x}` equal those of `σ`.
//!
//! Witnesses from the robustness dual satisfy `F_{a|x} ⪰ 0`,
//! `Σ_{a,x} D(a|x,λ) F_{a|x} ⪯ I` and `Σ tr(F_{a|x} σ_{a|x}) = 1 + SR(σ)`.
//! Certification uses `H_{a|x} = kbt_ln2 · F_{a|x} / (m P(x))`, which is the
//! plain `kbt_ln2 · F_{a|x}` for uniform `P(x)`; the certified gap is then at
//! least `kbt_ln2 · SR(σ) / m`.
//!
//! `E(σ)` maximizes the gap over Hamiltonians normalized to
//! `0 ⪯ H_{a|x} ⪯ kbt_ln2 · I`; without a normalization the gap is unbounded
//! whenever `σ` is steerable.

use serde::Serialize;

use crate::assemblage::{DeterministicStrategies, HamiltonianAssemblage, MeasurementAssemblage, StateAssemblage};
use crate::error::{Error, Result};
use crate::linalg::{contract_first, hermitian_basis, DensityMatrix, HermitianOperator, PSD_TOL};
use crate::sdp::{feasibility, solve, solve_optimal, Feasibility, SdpProblem, Sense, SolveStatus, SolverSettings};
use crate::thermo::{avg_deficit, avg_energy, deficit_offset, ThermalContext};
use crate::verdict::Verdict;

/// `𝒜_{a|x} = tr_A[(M_{a|x} ⊗ I_B) ρ_AB]` with uniform `P(x)`.
pub fn assemble(rho_ab: &DensityMatrix, m: &MeasurementAssemblage) -> Result<StateAssemblage> {
    let da = m.dim();
    let n = rho_ab.dim();
    if da == 0 || n % da != 0 {
        return Err(Error::Shape(format!(
            "state of dim {n} does not factor with Alice's dim {da}"
        )));
    }
    let grid = (0..m.n_settings())
        .map(|x| {
            (0..m.n_outcomes())
                .map(|a| contract_first(m.effect(a, x), rho_ab.op()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    StateAssemblage::new(m.n_settings(), m.n_outcomes(), grid, None)
}

/// Hidden states `ρ_λ` (subnormalized, `Σ tr ρ_λ = 1`) indexed by strategy.
#[derive(Clone, Debug, Serialize)]
pub struct LhsModel {
    pub hidden_states: Vec<HermitianOperator>,
}

impl LhsModel {
    /// `Σ_λ D(a|x,λ) ρ_λ`, setting-major.
    pub fn assemblage(&self, strategies: &DeterministicStrategies) -> Vec<HermitianOperator> {
        let (m, o) = (strategies.n_settings(), strategies.n_outcomes());
        let d = self.hidden_states[0].dim();
        let mut out = vec![HermitianOperator::zeros(d); m * o];
        for (l, rho) in self.hidden_states.iter().enumerate() {
            for x in 0..m {
                out[x * o + strategies.response(l, x)] += rho;
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum LhsMembership {
    /// The assemblage has the attached LHS model.
    Lhs { model: LhsModel },
    /// Operators `W_{a|x}` with `Σ_{a,x} D(a|x,λ) W_{a|x} ⪯ −margin·I` for
    /// every `λ` and `Σ tr(W_{a|x} σ_{a|x}) = 1`.
    Steerable { witness: Vec<HermitianOperator>, margin: f64 },
    /// Neither a model nor a certificate within tolerance.
    Inconclusive { primal_residual: f64 },
}

impl LhsMembership {
    pub fn verdict(&self) -> Verdict {
        match self {
            LhsMembership::Lhs { .. } => Verdict::Free,
            LhsMembership::Steerable { .. } => Verdict::Resource,
            LhsMembership::Inconclusive { .. } => Verdict::Inconclusive,
        }
    }
}

fn basis_operator(basis: &[HermitianOperator], y: &[f64], rows: &[usize]) -> HermitianOperator {
    let mut acc = HermitianOperator::zeros(basis[0].dim());
    for (g, &r) in basis.iter().zip(rows) {
        acc += &g.scale(y[r]);
    }
    acc
}

/// Feasibility of `Σ_λ D(a|x,λ) ρ_λ = σ_{a|x}` over `ρ_λ ⪰ 0`.
pub fn lhs_membership(sigma: &StateAssemblage, settings: &SolverSettings) -> Result<LhsMembership> {
    let strategies = DeterministicStrategies::new(sigma.n_settings(), sigma.n_outcomes())?;
    let d = sigma.dim();
    let mut p = SdpProblem::new(vec![d; strategies.count()], Sense::Minimize);
    let mut rows = Vec::with_capacity(sigma.elements().len());
    for x in 0..sigma.n_settings() {
        for a in 0..sigma.n_outcomes() {
            let blocks: Vec<usize> = (0..strategies.count())
                .filter(|&l| strategies.response(l, x) == a)
                .collect();
            rows.push(p.add_matrix_equality(sigma.element(a, x), &blocks, |_, g| Some(g.clone())));
        }
    }
    Ok(match feasibility(&p, settings)? {
        Feasibility::Feasible { point, .. } => LhsMembership::Lhs {
            model: LhsModel {
                hidden_states: point.iter().map(|r| r.psd_part()).collect::<Result<_>>()?,
            },
        },
        Feasibility::Infeasible { certificate, margin } => {
            let basis = hermitian_basis(d);
            LhsMembership::Steerable {
                witness: rows.iter().map(|r| basis_operator(&basis, &certificate, r)).collect(),
                margin,
            }
        }
        Feasibility::Marginal { primal_residual, .. } => LhsMembership::Inconclusive { primal_residual },
    })
}

/// Steering robustness from both sides of the conic program.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Robustness {
    /// `min Σ_λ tr Z_λ − 1` from the primal.
    pub sr: f64,
    /// `Σ tr(F_{a|x} σ_{a|x}) − 1` evaluated on the returned witness.
    pub sr_dual: f64,
    /// `F_{a|x} ⪰ 0`, setting-major.
    pub witness: Vec<HermitianOperator>,
    /// `max_λ λ_max(Σ_{a,x} D(a|x,λ) F_{a|x}) − 1`; nonpositive up to
    /// solver accuracy.
    pub witness_excess: f64,
    pub iterations: usize,
}

/// `min Σ_λ tr Z_λ − 1` s.t. `Σ_λ D(a|x,λ) Z_λ ⪰ σ_{a|x}`, `Z_λ ⪰ 0`.
///
/// The inequality is written with slack blocks `S_{a|x} ⪰ 0`; the dual slack
/// of `S_{a|x}` is the witness `F_{a|x}`.
pub fn steering_robustness(sigma: &StateAssemblage, settings: &SolverSettings) -> Result<Robustness> {
    let strategies = DeterministicStrategies::new(sigma.n_settings(), sigma.n_outcomes())?;
    let d = sigma.dim();
    let nl = strategies.count();
    let n = sigma.elements().len();
    let mut p = SdpProblem::new(vec![d; nl + n], Sense::Minimize);
    for l in 0..nl {
        p.add_objective(l, &HermitianOperator::identity(d));
    }
    for x in 0..sigma.n_settings() {
        for a in 0..sigma.n_outcomes() {
            let mut blocks: Vec<usize> = (0..nl).filter(|&l| strategies.response(l, x) == a).collect();
            let slack = nl + x * sigma.n_outcomes() + a;
            blocks.push(slack);
            let last = blocks.len() - 1;
            p.add_matrix_equality(sigma.element(a, x), &blocks, |slot, g| {
                Some(if slot == last { -g } else { g.clone() })
            });
        }
    }
    let sol = solve_optimal(&p, settings, "steering robustness")?;
    let witness: Vec<HermitianOperator> = sol.dual_slack[nl..]
        .iter()
        .map(|f| f.psd_part())
        .collect::<Result<_>>()?;
    let sr_dual = witness
        .iter()
        .zip(sigma.elements())
        .map(|(f, s)| f.inner(s))
        .sum::<f64>()
        - 1.0;
    let ones = vec![1.0; sigma.n_settings()];
    let mut excess = f64::NEG_INFINITY;
    for l in 0..nl {
        excess = excess.max(strategies.collect(l, &witness, &ones).max_eigenvalue()? - 1.0);
    }
    Ok(Robustness {
        sr: sol.primal_objective - 1.0,
        sr_dual,
        witness,
        witness_excess: excess,
        iterations: sol.iterations,
    })
}

/// `H_{a|x} = kbt_ln2 · F_{a|x}`; rejects witnesses with eigenvalues below
/// `−PSD_TOL`.
pub fn witness_to_hamiltonians(
    n_settings: usize,
    n_outcomes: usize,
    witness: &[HermitianOperator],
    ctx: &ThermalContext,
) -> Result<HamiltonianAssemblage> {
    for (k, f) in witness.iter().enumerate() {
        let min = f.min_eigenvalue()?;
        if min < -PSD_TOL {
            return Err(Error::Assemblage(format!(
                "witness {}|{} has eigenvalue {min:e}",
                k % n_outcomes.max(1),
                k / n_outcomes.max(1)
            )));
        }
    }
    HamiltonianAssemblage::from_flat(
        n_settings,
        n_outcomes,
        witness.iter().map(|f| f.scale(ctx.kbt_ln2())).collect(),
    )
}

/// Maximum of the averaged deficit over `LHS(σ)`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LhsSigmaMax {
    /// `max_{B ∈ LHS(σ)} avg_deficit(B, H)`.
    pub value: f64,
    /// The energy part `max Σ P(x) tr(H_{a|x} B_{a|x})`.
    pub energy: f64,
    /// The state-independent part shared with `avg_deficit(σ, H)`.
    pub offset: f64,
    pub model: LhsModel,
    pub iterations: usize,
}

fn strategy_costs(
    sigma: &StateAssemblage,
    hams: &HamiltonianAssemblage,
    strategies: &DeterministicStrategies,
) -> Vec<HermitianOperator> {
    (0..strategies.count())
        .map(|l| strategies.collect(l, hams.elements(), sigma.p_x()))
        .collect()
}

fn check_hams(sigma: &StateAssemblage, hams: &HamiltonianAssemblage) -> Result<()> {
    if !sigma.same_shape(hams.n_settings(), hams.n_outcomes(), hams.dim()) {
        return Err(Error::Shape("Hamiltonians do not match the assemblage".into()));
    }
    Ok(())
}

/// Solves `max Σ_{a,x} P(x) tr(H_{a|x} B_{a|x})` over `B ∈ LHS` with
/// `tr B_{a|x} = P(a|x)` and adds the constant part of the deficit.
pub fn lhs_sigma_max_deficit(
    sigma: &StateAssemblage,
    hams: &HamiltonianAssemblage,
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<LhsSigmaMax> {
    check_hams(sigma, hams)?;
    let strategies = DeterministicStrategies::new(sigma.n_settings(), sigma.n_outcomes())?;
    let d = sigma.dim();
    let nl = strategies.count();
    // solved in units of kbt_ln2 so results scale exactly with the context
    let unit = ctx.kbt_ln2();
    let mut p = SdpProblem::new(vec![d; nl], Sense::Maximize);
    for (l, c) in strategy_costs(sigma, hams, &strategies).iter().enumerate() {
        p.add_objective(l, &c.scale(1.0 / unit));
    }
    let id = HermitianOperator::identity(d);
    for x in 0..sigma.n_settings() {
        for a in 0..sigma.n_outcomes() {
            let terms = (0..nl)
                .filter(|&l| strategies.response(l, x) == a)
                .map(|l| (l, id.clone()))
                .collect();
            p.add_constraint(terms, sigma.probability(a, x));
        }
    }
    let sol = solve(&p, settings)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::EmptyLhsSigma),
        status => {
            return Err(Error::Solver {
                status,
                detail: format!(
                    "LHS(sigma) maximization: primal residual {:e}, dual residual {:e}",
                    sol.primal_residual, sol.dual_residual
                ),
            })
        }
    }
    let offset = deficit_offset(sigma.p_x(), |a, x| sigma.probability(a, x), hams, ctx)?;
    Ok(LhsSigmaMax {
        value: unit * sol.primal_objective + offset,
        energy: unit * sol.primal_objective,
        offset,
        model: LhsModel {
            hidden_states: sol.primal_blocks,
        },
        iterations: sol.iterations,
    })
}

/// The energy part of [`lhs_sigma_max_deficit`] from its dual,
/// `min Σ y_{a|x} P(a|x)` s.t. `Σ_{a,x} D(a|x,λ)(y_{a|x} I − P(x) H_{a|x}) ⪰ 0`.
pub fn lhs_sigma_max_energy_dual(
    sigma: &StateAssemblage,
    hams: &HamiltonianAssemblage,
    settings: &SolverSettings,
) -> Result<f64> {
    check_hams(sigma, hams)?;
    let strategies = DeterministicStrategies::new(sigma.n_settings(), sigma.n_outcomes())?;
    let d = sigma.dim();
    let (m, o) = (sigma.n_settings(), sigma.n_outcomes());
    let mut p = SdpProblem::new(vec![d; strategies.count()], Sense::Minimize);
    let y0 = p.add_free_vars(m * o);
    for x in 0..m {
        for a in 0..o {
            p.free_objective[y0 + x * o + a] = sigma.probability(a, x);
        }
    }
    let basis = hermitian_basis(d);
    for (l, c) in strategy_costs(sigma, hams, &strategies).iter().enumerate() {
        for g in &basis {
            let free = (0..m)
                .map(|x| (y0 + x * o + strategies.response(l, x), -g.trace()))
                .collect();
            p.add_mixed_constraint(vec![(l, g.clone())], free, -g.inner(c));
        }
    }
    Ok(solve_optimal(&p, settings, "LHS(sigma) dual")?.primal_objective)
}

/// Output of the certification pipeline for one assemblage.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SteeringCertificate {
    pub robustness: Robustness,
    pub hamiltonians: HamiltonianAssemblage,
    /// `avg_deficit(σ, H)`.
    pub deficit: f64,
    /// `max_{B ∈ LHS(σ)} avg_deficit(B, H)`.
    pub lhs_max_deficit: f64,
    pub gap: f64,
    /// The gap from energies alone, `Σ P(x) tr(H(σ − B*))`.
    pub energy_gap: f64,
    pub verdict: Verdict,
}

/// Robustness witness → Hamiltonians → deficit gap against `LHS(σ)`.
pub fn certify_steering(
    sigma: &StateAssemblage,
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<SteeringCertificate> {
    let robustness = steering_robustness(sigma, settings)?;
    let (m, o) = (sigma.n_settings(), sigma.n_outcomes());
    let rescaled: Vec<HermitianOperator> = robustness
        .witness
        .iter()
        .enumerate()
        .map(|(k, f)| f.scale(1.0 / (m as f64 * sigma.p_x()[k / o])))
        .collect();
    let hamiltonians = witness_to_hamiltonians(m, o, &rescaled, ctx)?;
    let deficit = avg_deficit(sigma, &hamiltonians, ctx)?;
    let lhs = lhs_sigma_max_deficit(sigma, &hamiltonians, ctx, settings)?;
    let gap = deficit - lhs.value;
    let energy_gap = avg_energy(sigma, &hamiltonians)? - lhs.energy;
    Ok(SteeringCertificate {
        robustness,
        hamiltonians,
        deficit,
        lhs_max_deficit: lhs.value,
        gap,
        energy_gap,
        verdict: Verdict::from_value(gap / ctx.kbt_ln2()),
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AnomalousEnergy {
    /// `E(σ)` in units of the context.
    pub e: f64,
    /// Optimal normalized witness `0 ⪯ F_{a|x} ⪯ I`; `H = kbt_ln2 · F`.
    pub witness: Vec<HermitianOperator>,
    /// Optimal multipliers `y_{a|x}` of the `LHS(σ)` trace constraints.
    pub multipliers: Vec<f64>,
    pub verdict: Verdict,
    pub iterations: usize,
}

/// `E(σ) = kbt_ln2 · max Σ P(x) tr(F_{a|x} σ_{a|x}) − Σ y_{a|x} P(a|x)` over
/// `0 ⪯ F_{a|x} ⪯ I` and free `y` with
/// `Σ_{a,x} D(a|x,λ)(P(x) F_{a|x} − y_{a|x} I) ⪯ 0` for every `λ`.
pub fn anomalous_energy(
    sigma: &StateAssemblage,
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<AnomalousEnergy> {
    let strategies = DeterministicStrategies::new(sigma.n_settings(), sigma.n_outcomes())?;
    let d = sigma.dim();
    let (m, o) = (sigma.n_settings(), sigma.n_outcomes());
    let n = m * o;
    let nl = strategies.count();
    // blocks: F_{a|x}, I − F_{a|x}, then one slack per strategy
    let mut p = SdpProblem::new(vec![d; 2 * n + nl], Sense::Maximize);
    let y0 = p.add_free_vars(n);
    for x in 0..m {
        for a in 0..o {
            let k = x * o + a;
            p.add_objective(k, &sigma.element(a, x).scale(sigma.p_x()[x]));
            p.free_objective[y0 + k] = -sigma.probability(a, x);
            p.add_matrix_equality(&HermitianOperator::identity(d), &[k, n + k], |_, g| Some(g.clone()));
        }
    }
    let basis = hermitian_basis(d);
    for l in 0..nl {
        for g in &basis {
            let mut terms = vec![(2 * n + l, g.clone())];
            let mut free = Vec::with_capacity(m);
            for x in 0..m {
                let k = x * o + strategies.response(l, x);
                terms.push((k, g.scale(sigma.p_x()[x])));
                free.push((y0 + k, -g.trace()));
            }
            p.add_mixed_constraint(terms, free, 0.0);
        }
    }
    let sol = solve_optimal(&p, settings, "anomalous energy")?;
    let e = ctx.kbt_ln2() * sol.primal_objective;
    Ok(AnomalousEnergy {
        e,
        witness: sol.primal_blocks[..n].to_vec(),
        multipliers: sol.free_values[y0..y0 + n].to_vec(),
        verdict: Verdict::from_value(e / ctx.kbt_ln2()),
        iterations: sol.iterations,
    })
}
