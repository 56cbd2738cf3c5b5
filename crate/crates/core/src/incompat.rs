//! Measurement incompatibility and broadcast incompatibility of channels.
//!
//! Joint measurability and broadcast compatibility are SDP feasibility
//! problems. Channel certification goes through discrimination tasks: the
//! dual of the broadcast robustness gives operators `Y_x ⪰ 0` on
//! `in ⊗ out_x` with `Σ_x Y_x ⊗ I ⪯ Ω ⊗ I` for an input state `Ω`, so that
//! `Σ_x tr(Y_x J_x) ≤ 1` for every broadcast-compatible ensemble while the
//! tested ensemble reaches `1 + R`. Each `Y_x` is turned into a positive
//! task whose payoff is an increasing affine function of `tr(Y_x J_x)`:
//!
//! - input states are an overcomplete frame `{Π_i}` of `N = 2d² − d` pure
//!   states with `Σ_i Π_i = (2d − 1) I`, plus `I/d`;
//! - with the canonical dual frame `D_i`, `tr(Y J_E) = Σ_i tr(Ω_i E(Π_i))`
//!   where `Ω_i = tr_in[Y (D_iᵀ ⊗ I)]`;
//! - the POVM is chosen so that `q E_i + q₀ w E₀ = κ Ω_i + c I`, giving a
//!   payoff `κ tr(Y J_E) + c N` per route.
//!
//! Hamiltonians `H_{i|x} = kbt_ln2 · p_x q_{i|x} E_{i|x}` then turn the
//! payoff gap into a work-deficit gap, up to an additive constant that only
//! depends on the task.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assemblage::{DeterministicStrategies, MeasurementAssemblage, ASSEMBLAGE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_channel, apply_choi_op, contract_first, embed_identity, hermitian_basis, max_entangled, partial_trace,
    ChoiMatrix, DensityMatrix, HermitianOperator, C64, PSD_TOL,
};
use crate::sdp::{feasibility, solve_optimal, Feasibility, SdpProblem, Sense, SolverSettings};
use crate::steering::{anomalous_energy, assemble, AnomalousEnergy};
use crate::thermo::{log2_partition, work_deficit, ThermalContext};
use crate::verdict::Verdict;

/// Default positivity threshold for discrimination tasks.
pub const TASK_EPSILON: f64 = 1e-6;
/// Largest number of routes in a channel ensemble.
pub const MAX_ROUTES: usize = 3;
/// Largest product of output dimensions for global-Choi problems.
pub const MAX_TOTAL_OUTPUT: usize = 16;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum JointMeasurability {
    /// Parent POVM `G_λ` with `M_{a|x} = Σ_λ D(a|x,λ) G_λ`.
    Compatible { parent: Vec<HermitianOperator> },
    /// `W_{a|x}` with `Σ_{a,x} D(a|x,λ) W_{a|x} ⪯ −margin·I` for every `λ`
    /// and `Σ tr(W_{a|x} M_{a|x}) = 1`.
    Incompatible { certificate: Vec<HermitianOperator>, margin: f64 },
    Inconclusive { primal_residual: f64 },
}

impl JointMeasurability {
    pub fn verdict(&self) -> Verdict {
        match self {
            JointMeasurability::Compatible { .. } => Verdict::Free,
            JointMeasurability::Incompatible { .. } => Verdict::Resource,
            JointMeasurability::Inconclusive { .. } => Verdict::Inconclusive,
        }
    }
}

fn combine(basis: &[HermitianOperator], y: &[f64], rows: &[usize]) -> HermitianOperator {
    let mut acc = HermitianOperator::zeros(basis[0].dim());
    for (g, &r) in basis.iter().zip(rows) {
        acc += &g.scale(y[r]);
    }
    acc
}

/// Feasibility of `M_{a|x} = Σ_λ D(a|x,λ) G_λ` over `G_λ ⪰ 0`.
pub fn joint_measurability(m: &MeasurementAssemblage, settings: &SolverSettings) -> Result<JointMeasurability> {
    let strategies = DeterministicStrategies::new(m.n_settings(), m.n_outcomes())?;
    let d = m.dim();
    let mut p = SdpProblem::new(vec![d; strategies.count()], Sense::Minimize);
    let mut rows = Vec::with_capacity(m.effects().len());
    for x in 0..m.n_settings() {
        for a in 0..m.n_outcomes() {
            let blocks: Vec<usize> = (0..strategies.count())
                .filter(|&l| strategies.response(l, x) == a)
                .collect();
            rows.push(p.add_matrix_equality(m.effect(a, x), &blocks, |_, g| Some(g.clone())));
        }
    }
    Ok(match feasibility(&p, settings)? {
        Feasibility::Feasible { point, .. } => JointMeasurability::Compatible {
            parent: point.iter().map(|g| g.psd_part()).collect::<Result<_>>()?,
        },
        Feasibility::Infeasible { certificate, margin } => {
            let basis = hermitian_basis(d);
            JointMeasurability::Incompatible {
                certificate: rows.iter().map(|r| combine(&basis, &certificate, r)).collect(),
                margin,
            }
        }
        Feasibility::Marginal { primal_residual, .. } => JointMeasurability::Inconclusive { primal_residual },
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IncompatEnergy {
    /// `E(σ⁺(M))` with `σ⁺(M)_{a|x} = tr_A[(M_{a|x} ⊗ I)|Φ⁺⟩⟨Φ⁺|]`.
    pub e: f64,
    pub verdict: Verdict,
    /// Verdict of the direct joint-measurability test.
    pub joint_measurability: Verdict,
    pub energy: AnomalousEnergy,
}

/// Incompatibility decided by the anomalous energy of the assemblage that
/// `M` steers from a maximally entangled state, checked against
/// [`joint_measurability`]. Conclusive disagreement is an error.
pub fn incompat_via_energy(
    m: &MeasurementAssemblage,
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<IncompatEnergy> {
    let phi = max_entangled(m.dim())?;
    let sigma = assemble(&phi, m)?;
    let energy = anomalous_energy(&sigma, ctx, settings)?;
    let jm = joint_measurability(m, settings)?.verdict();
    let verdict = energy.verdict;
    if let (Some(a), Some(b)) = (verdict.as_bool(), jm.as_bool()) {
        if a != b {
            return Err(Error::Invariant(format!(
                "E = {:e} says incompatible={a}, joint measurability says incompatible={b}",
                energy.e
            )));
        }
    }
    Ok(IncompatEnergy {
        e: energy.e,
        verdict,
        joint_measurability: jm,
        energy,
    })
}

/// Channels `𝓔_x`, one per input-output route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleWire")]
pub struct ChannelEnsemble {
    channels: Vec<ChoiMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleWire {
    channels: Vec<ChoiMatrix>,
}

impl TryFrom<EnsembleWire> for ChannelEnsemble {
    type Error = Error;
    fn try_from(w: EnsembleWire) -> Result<Self> {
        Self::new(w.channels)
    }
}

impl ChannelEnsemble {
    pub fn new(channels: Vec<ChoiMatrix>) -> Result<Self> {
        if channels.is_empty() || channels.len() > MAX_ROUTES {
            return Err(Error::TooLarge(format!(
                "{} routes given, supported are 1 to {MAX_ROUTES}",
                channels.len()
            )));
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[ChoiMatrix] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `(dim_in, dim_out)` per route.
    pub fn routes(&self) -> Vec<(usize, usize)> {
        self.channels.iter().map(|c| (c.dim_in(), c.dim_out())).collect()
    }

    /// Subsystem dims `[in, out_1, …, out_L]` of the global Choi matrix.
    fn global_dims(&self) -> Result<Vec<usize>> {
        let din = self.channels[0].dim_in();
        if self.channels.iter().any(|c| c.dim_in() != din) {
            return Err(Error::Shape(format!("routes do not share an input: {:?}", self.routes())));
        }
        let total: usize = self.channels.iter().map(|c| c.dim_out()).product();
        if total > MAX_TOTAL_OUTPUT {
            return Err(Error::TooLarge(format!(
                "total output dim {total} exceeds {MAX_TOTAL_OUTPUT}"
            )));
        }
        let mut dims = vec![din];
        dims.extend(self.channels.iter().map(|c| c.dim_out()));
        Ok(dims)
    }
}

/// Adds `tr_{other outputs}(G) + extra = target_x` for every route, returning
/// the constraint rows per route.
fn add_marginal_constraints(
    p: &mut SdpProblem,
    ens: &ChannelEnsemble,
    dims: &[usize],
    global: usize,
    slack: Option<usize>,
) -> Result<Vec<Vec<usize>>> {
    let mut rows = Vec::with_capacity(ens.len());
    for (x, ch) in ens.channels().iter().enumerate() {
        let keep = [0, x + 1];
        let mut err = None;
        let r = p.add_matrix_equality(ch.op(), &[global, slack.map_or(global, |s| s + x)], |slot, g| {
            if slot == 0 {
                match embed_identity(g, dims, &keep) {
                    Ok(e) => Some(e),
                    Err(e) => {
                        err = Some(e);
                        None
                    }
                }
            } else if slack.is_some() {
                Some(-g)
            } else {
                None
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        rows.push(r);
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "result", rename_all = "camelCase")]
pub enum BroadcastCompatibility {
    /// Global Choi matrix on `in ⊗ out_1 ⊗ … ⊗ out_L` with the routes as
    /// marginals.
    Compatible { global: HermitianOperator },
    /// `Y_x` with `Σ_x Y_x ⊗ I ⪯ −margin·I` and `Σ_x tr(Y_x J_x) = 1`.
    Incompatible { certificate: Vec<HermitianOperator>, margin: f64 },
    Inconclusive { primal_residual: f64 },
}

impl BroadcastCompatibility {
    pub fn verdict(&self) -> Verdict {
        match self {
            BroadcastCompatibility::Compatible { .. } => Verdict::Free,
            BroadcastCompatibility::Incompatible { .. } => Verdict::Resource,
            BroadcastCompatibility::Inconclusive { .. } => Verdict::Inconclusive,
        }
    }
}

/// Feasibility of a global channel whose output marginals are the routes.
pub fn broadcast_compatibility(
    ens: &ChannelEnsemble,
    settings: &SolverSettings,
) -> Result<BroadcastCompatibility> {
    let dims = ens.global_dims()?;
    let total: usize = dims.iter().product();
    let mut p = SdpProblem::new(vec![total], Sense::Minimize);
    let rows = add_marginal_constraints(&mut p, ens, &dims, 0, None)?;
    Ok(match feasibility(&p, settings)? {
        Feasibility::Feasible { point, .. } => BroadcastCompatibility::Compatible {
            global: point[0].psd_part()?,
        },
        Feasibility::Infeasible { certificate, margin } => BroadcastCompatibility::Incompatible {
            certificate: ens
                .channels()
                .iter()
                .zip(&rows)
                .map(|(c, r)| combine(&hermitian_basis(c.op().dim()), &certificate, r))
                .collect(),
            margin,
        },
        Feasibility::Marginal { primal_residual, .. } => BroadcastCompatibility::Inconclusive { primal_residual },
    })
}

/// Generalized broadcast robustness: the least `t` such that
/// `(𝓔_x + t 𝓝_x)/(1 + t)` is broadcast compatible for some channels `𝓝_x`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BroadcastRobustness {
    pub robustness: f64,
    /// `Σ_x tr(Y_x J_x) − 1` on the returned witness.
    pub robustness_dual: f64,
    /// `Y_x ⪰ 0` on `in ⊗ out_x`.
    pub witness: Vec<HermitianOperator>,
    /// Input state `Ω` with `Σ_x Y_x ⊗ I ⪯ Ω ⊗ I`.
    pub omega: HermitianOperator,
    pub iterations: usize,
}

/// Primal: `min t` over a global `G ⪰ 0` and `M_x ⪰ 0` with
/// `tr_{≠x} G − M_x = J_x` and `tr_out G = (1 + t) I`.
pub fn broadcast_robustness(ens: &ChannelEnsemble, settings: &SolverSettings) -> Result<BroadcastRobustness> {
    let dims = ens.global_dims()?;
    let total: usize = dims.iter().product();
    let din = dims[0];
    let mut block_dims = vec![total];
    block_dims.extend(ens.channels().iter().map(|c| c.op().dim()));
    let mut p = SdpProblem::new(block_dims, Sense::Minimize);
    let t = p.add_free_vars(1);
    p.free_objective[t] = 1.0;
    add_marginal_constraints(&mut p, ens, &dims, 0, Some(1))?;
    let in_basis = hermitian_basis(din);
    let mut omega_rows = Vec::with_capacity(in_basis.len());
    for g in &in_basis {
        let lifted = embed_identity(g, &dims, &[0])?;
        omega_rows.push(p.add_mixed_constraint(vec![(0, lifted)], vec![(t, -g.trace())], g.trace()));
    }
    let sol = solve_optimal(&p, settings, "broadcast robustness")?;
    let witness: Vec<HermitianOperator> = sol.dual_slack[1..]
        .iter()
        .map(|y| y.psd_part())
        .collect::<Result<_>>()?;
    let robustness_dual = witness
        .iter()
        .zip(ens.channels())
        .map(|(y, c)| y.inner(c.op()))
        .sum::<f64>()
        - 1.0;
    let omega = -&combine(&in_basis, &sol.dual_vector, &omega_rows);
    Ok(BroadcastRobustness {
        robustness: sol.primal_objective,
        robustness_dual,
        witness,
        omega,
        iterations: sol.iterations,
    })
}

/// One route of a discrimination task: prior `q_i`, states `ρ_i` on the
/// route's input and a POVM `E_i` on its output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteTask {
    pub q: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub povm: Vec<HermitianOperator>,
}

/// Ensemble state discrimination task `({p_x}, {q_{i|x}, ρ_{i|x}}, {E_{i|x}})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "TaskWire")]
pub struct DiscriminationTask {
    p_x: Vec<f64>,
    routes: Vec<RouteTask>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TaskWire {
    p_x: Vec<f64>,
    routes: Vec<RouteTask>,
}

impl TryFrom<TaskWire> for DiscriminationTask {
    type Error = Error;
    fn try_from(w: TaskWire) -> Result<Self> {
        Self::new(w.p_x, w.routes)
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Task(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > ASSEMBLAGE_TOL {
        return Err(Error::Task(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl DiscriminationTask {
    pub fn new(p_x: Vec<f64>, routes: Vec<RouteTask>) -> Result<Self> {
        if p_x.len() != routes.len() || routes.is_empty() {
            return Err(Error::Task(format!(
                "{} route priors for {} routes",
                p_x.len(),
                routes.len()
            )));
        }
        check_distribution(&p_x, "p_x")?;
        for (x, r) in routes.iter().enumerate() {
            if r.q.len() != r.states.len() || r.q.len() != r.povm.len() || r.q.is_empty() {
                return Err(Error::Task(format!(
                    "route {x}: {} priors, {} states, {} effects",
                    r.q.len(),
                    r.states.len(),
                    r.povm.len()
                )));
            }
            check_distribution(&r.q, &format!("q of route {x}"))?;
            let din = r.states[0].dim();
            let dout = r.povm[0].dim();
            if r.states.iter().any(|s| s.dim() != din) || r.povm.iter().any(|e| e.dim() != dout) {
                return Err(Error::Task(format!("route {x}: mixed dimensions")));
            }
            let mut sum = HermitianOperator::zeros(dout);
            for (i, e) in r.povm.iter().enumerate() {
                let min = e.min_eigenvalue()?;
                if min < -PSD_TOL {
                    return Err(Error::Task(format!("E_{{{i}|{x}}} has eigenvalue {min:e}")));
                }
                sum += e;
            }
            let dev = sum.max_abs_diff(&HermitianOperator::identity(dout));
            if dev > ASSEMBLAGE_TOL {
                return Err(Error::Task(format!("POVM of route {x} misses completeness by {dev:e}")));
            }
        }
        Ok(Self { p_x, routes })
    }

    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    pub fn routes(&self) -> &[RouteTask] {
        &self.routes
    }

    /// First component violating `p_x > ε`, `q_{i|x} > ε` or `E_{i|x} ⪰ ε I`.
    pub fn positivity_violation(&self, eps: f64) -> Result<Option<String>> {
        for (x, r) in self.routes.iter().enumerate() {
            if self.p_x[x] <= eps {
                return Ok(Some(format!("p_{x} = {:e}", self.p_x[x])));
            }
            for (i, q) in r.q.iter().enumerate() {
                if *q <= eps {
                    return Ok(Some(format!("q_{{{i}|{x}}} = {q:e}")));
                }
            }
            for (i, e) in r.povm.iter().enumerate() {
                let min = e.min_eigenvalue()?;
                if min < eps {
                    return Ok(Some(format!("E_{{{i}|{x}}} has eigenvalue {min:e}")));
                }
            }
        }
        Ok(None)
    }

    pub fn is_positive(&self, eps: f64) -> Result<bool> {
        Ok(self.positivity_violation(eps)?.is_none())
    }

    /// Mixes every POVM with white noise, `E' = (1 − nε)E + ε I`, so that
    /// `E' ⪰ ε I` while completeness is kept.
    pub fn positivized(&self, eps: f64) -> Result<Self> {
        let routes = self
            .routes
            .iter()
            .map(|r| {
                let n = r.povm.len() as f64;
                if n * eps >= 1.0 {
                    return Err(Error::Task(format!("ε = {eps} too large for {n} outcomes")));
                }
                let d = r.povm[0].dim();
                let povm = r
                    .povm
                    .iter()
                    .map(|e| e.scale(1.0 - n * eps) + HermitianOperator::identity(d).scale(eps))
                    .collect();
                Ok(RouteTask {
                    povm,
                    ..r.clone()
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            p_x: self.p_x.clone(),
            routes,
        })
    }

    fn check_routes(&self, routes: &[(usize, usize)]) -> Result<()> {
        if routes.len() != self.routes.len() {
            return Err(Error::Shape(format!(
                "task has {} routes, ensemble has {}",
                self.routes.len(),
                routes.len()
            )));
        }
        for (x, (r, &(din, dout))) in self.routes.iter().zip(routes).enumerate() {
            if r.states[0].dim() != din || r.povm[0].dim() != dout {
                return Err(Error::Shape(format!(
                    "route {x}: task is {}->{}, channel is {din}->{dout}",
                    r.states[0].dim(),
                    r.povm[0].dim()
                )));
            }
        }
        Ok(())
    }
}

/// Outputs `𝓔_x(ρ_{i|x})`, indexed `[x][i]`.
fn channel_outputs(task: &DiscriminationTask, ens: &ChannelEnsemble) -> Result<Vec<Vec<DensityMatrix>>> {
    task.check_routes(&ens.routes())?;
    task.routes
        .iter()
        .zip(ens.channels())
        .map(|(r, c)| r.states.iter().map(|s| apply_channel(c, s)).collect())
        .collect()
}

fn payoff_from_outputs(task: &DiscriminationTask, outputs: &[Vec<DensityMatrix>]) -> f64 {
    let mut total = 0.0;
    for (x, r) in task.routes.iter().enumerate() {
        for (i, e) in r.povm.iter().enumerate() {
            total += task.p_x[x] * r.q[i] * e.inner(outputs[x][i].op());
        }
    }
    total
}

/// `P(D, 𝓔) = Σ_{i,x} p_x q_{i|x} tr[E_{i|x} 𝓔_x(ρ_{i|x})]`.
pub fn discrimination_payoff(task: &DiscriminationTask, ens: &ChannelEnsemble) -> Result<f64> {
    Ok(payoff_from_outputs(task, &channel_outputs(task, ens)?))
}

/// `H_{i|x} = kbt_ln2 · p_x q_{i|x} E_{i|x}`, indexed `[x][i]`. The task must
/// be positive at [`TASK_EPSILON`].
pub fn task_to_hamiltonians(task: &DiscriminationTask, ctx: &ThermalContext) -> Result<Vec<Vec<HermitianOperator>>> {
    if let Some(v) = task.positivity_violation(TASK_EPSILON)? {
        return Err(Error::Task(format!("task is not positive: {v}")));
    }
    Ok(task
        .routes
        .iter()
        .enumerate()
        .map(|(x, r)| {
            r.povm
                .iter()
                .zip(&r.q)
                .map(|(e, q)| e.scale(ctx.kbt_ln2() * task.p_x[x] * q))
                .collect()
        })
        .collect())
}

/// `Σ_{i,x} Δ[out_{i|x}, H_{i|x}]` from the divergences, together with the
/// part not explained by the energies, `Σ (Δ − tr(H out))`.
fn deficit_sum(
    hams: &[Vec<HermitianOperator>],
    outputs: &[Vec<DensityMatrix>],
    ctx: &ThermalContext,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut offset = 0.0;
    for (hx, ox) in hams.iter().zip(outputs) {
        for (h, o) in hx.iter().zip(ox) {
            let delta = work_deficit(o, h, ctx)?.delta;
            total += delta;
            offset += delta - h.inner(o.op());
        }
    }
    Ok((total, offset))
}

/// `kbt_ln2 Σ_{i,x} (log₂Z_{i|x} − log₂ d_out)`.
fn closed_offset(hams: &[Vec<HermitianOperator>], ctx: &ThermalContext) -> Result<f64> {
    let mut total = 0.0;
    for h in hams.iter().flatten() {
        total += log2_partition(h, ctx)? - (h.dim() as f64).log2();
    }
    Ok(ctx.kbt_ln2() * total)
}

/// Overcomplete frame `{|k⟩} ∪ {(|k⟩ + ω|l⟩)/√2 : k < l, ω⁴ = 1}` with its
/// canonical dual frame.
struct Frame {
    states: Vec<DensityMatrix>,
    duals: Vec<HermitianOperator>,
}

fn frame(d: usize) -> Result<Frame> {
    let zero = C64::new(0.0, 0.0);
    let mut states = Vec::with_capacity(2 * d * d - d);
    for k in 0..d {
        states.push(DensityMatrix::basis(d, k));
    }
    let phases = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    for k in 0..d {
        for l in (k + 1)..d {
            for w in phases {
                let mut v = vec![zero; d];
                v[k] = C64::new(1.0, 0.0);
                v[l] = w;
                states.push(DensityMatrix::pure(&v)?);
            }
        }
    }
    let basis = hermitian_basis(d);
    let coords: Vec<DVector<f64>> = states
        .iter()
        .map(|s| DVector::from_iterator(basis.len(), basis.iter().map(|g| g.inner(s.op()))))
        .collect();
    let mut s = DMatrix::<f64>::zeros(basis.len(), basis.len());
    for v in &coords {
        s += v * v.transpose();
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Invariant("frame operator is singular".into()))?;
    let duals = coords
        .iter()
        .map(|v| {
            let c = chol.solve(v);
            let mut acc = HermitianOperator::zeros(d);
            for (g, ci) in basis.iter().zip(c.iter()) {
                acc += &g.scale(*ci);
            }
            acc
        })
        .collect();
    Ok(Frame { states, duals })
}

fn operator_norm(h: &HermitianOperator) -> Result<f64> {
    Ok(h.max_eigenvalue()?.abs().max(h.min_eigenvalue()?.abs()))
}

/// The positive task built from witnesses `Y_x` (see the module docs) and
/// the scale `κ` of its payoff, `P = (κ/L) Σ_x tr(Y_x J_x) + const`.
pub fn witness_task(ens: &ChannelEnsemble, witness: &[HermitianOperator]) -> Result<(DiscriminationTask, f64)> {
    if witness.len() != ens.len() {
        return Err(Error::Shape(format!("{} witnesses for {} routes", witness.len(), ens.len())));
    }
    struct Route {
        frame: Frame,
        omegas: Vec<HermitianOperator>,
        y_out: HermitianOperator,
        w: f64,
    }
    let mut parts = Vec::with_capacity(ens.len());
    for (c, y) in ens.channels().iter().zip(witness) {
        let d = c.dim_in();
        let frame = frame(d)?;
        let omegas = frame
            .duals
            .iter()
            .map(|dual| contract_first(&dual.transpose(), y))
            .collect::<Result<Vec<_>>>()?;
        let y_out = partial_trace(y, &[d, c.dim_out()], &[1])?;
        parts.push(Route {
            frame,
            omegas,
            y_out,
            w: 1.0 / (d * (2 * d - 1)) as f64,
        });
    }
    let mut kappa = f64::INFINITY;
    for r in &parts {
        let n = r.frame.states.len() as f64;
        let q = 2.0 / (2.0 * n + 1.0);
        let mut worst = 0.0f64;
        for om in &r.omegas {
            worst = worst.max(operator_norm(&(om + &r.y_out.scale(r.w)))?);
        }
        if worst > 0.0 {
            kappa = kappa.min(q / (4.0 * n * worst));
        }
        let yn = operator_norm(&r.y_out)?;
        if yn > 0.0 {
            kappa = kappa.min(q / (8.0 * yn));
        }
    }
    if !kappa.is_finite() {
        kappa = 0.0;
    }
    let l = ens.len();
    let mut routes = Vec::with_capacity(l);
    for r in parts {
        let n = r.frame.states.len();
        let nf = n as f64;
        let q = 2.0 / (2.0 * nf + 1.0);
        let q0 = q / 2.0;
        let c = 3.0 * q / (4.0 * nf);
        let dout = r.y_out.dim();
        let id = HermitianOperator::identity(dout);
        let sum_e = (r.y_out.scale(kappa) + id.scale(nf * c - q0)).scale(1.0 / (q - q0));
        let e0 = &id - &sum_e;
        let mut povm = Vec::with_capacity(n + 1);
        povm.push(e0.clone());
        for om in &r.omegas {
            povm.push((om.scale(kappa) + id.scale(c) - e0.scale(q0 * r.w)).scale(1.0 / q));
        }
        let d_in = r.frame.states[0].dim();
        let mut states = Vec::with_capacity(n + 1);
        states.push(DensityMatrix::maximally_mixed(d_in));
        states.extend(r.frame.states);
        let mut qs = vec![q; n + 1];
        qs[0] = q0;
        routes.push(RouteTask { q: qs, states, povm });
    }
    Ok((DiscriminationTask::new(vec![1.0 / l as f64; l], routes)?, kappa))
}

/// Maximum of `Σ_{i,x} tr(K_{i|x} 𝓛_x(ρ_{i|x}))` over broadcast-compatible
/// `𝓛`, with the optimal route marginals `𝓛_x` as (unvalidated) Choi
/// operators.
fn free_set_max(
    ens: &ChannelEnsemble,
    task: &DiscriminationTask,
    ops: &[Vec<HermitianOperator>],
    settings: &SolverSettings,
) -> Result<(f64, Vec<HermitianOperator>)> {
    let dims = ens.global_dims()?;
    let total: usize = dims.iter().product();
    let mut p = SdpProblem::new(vec![total], Sense::Maximize);
    for (x, (r, kx)) in task.routes.iter().zip(ops).enumerate() {
        let mut local = HermitianOperator::zeros(dims[0] * dims[x + 1]);
        for (s, k) in r.states.iter().zip(kx) {
            local += &s.op().transpose().kron(k);
        }
        p.add_objective(0, &embed_identity(&local, &dims, &[0, x + 1])?);
    }
    p.add_matrix_equality(&HermitianOperator::identity(dims[0]), &[0], |_, g| {
        embed_identity(g, &dims, &[0]).ok()
    });
    let sol = solve_optimal(&p, settings, "broadcast-compatible maximum")?;
    let marginals = (0..ens.len())
        .map(|x| partial_trace(&sol.primal_blocks[0], &dims, &[0, x + 1]))
        .collect::<Result<_>>()?;
    Ok((sol.primal_objective, marginals))
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelCertificate {
    pub robustness: BroadcastRobustness,
    pub task: DiscriminationTask,
    /// Whether white noise had to be mixed into the witness POVMs.
    pub positivized: bool,
    pub epsilon: f64,
    pub kappa: f64,
    pub hamiltonians: Vec<Vec<HermitianOperator>>,
    /// `Σ_{i,x} Δ[𝓔_x(ρ_{i|x}), H_{i|x}]`.
    pub deficit: f64,
    /// Its maximum over broadcast-compatible ensembles.
    pub free_max_deficit: f64,
    pub gap: f64,
    pub payoff: f64,
    pub free_max_payoff: f64,
    pub payoff_gap: f64,
    /// `Σ (Δ − tr(H·out))`, identical for every ensemble on these routes.
    pub offset: f64,
    /// Largest disagreement among the offsets of `𝓔`, of the optimal free
    /// ensemble and of the closed form.
    pub offset_residual: f64,
    pub verdict: Verdict,
}

/// Broadcast robustness witness → positive task → Hamiltonians → deficit gap
/// against every broadcast-compatible ensemble on the same routes.
pub fn certify_channel_ensemble(
    ens: &ChannelEnsemble,
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<ChannelCertificate> {
    let robustness = broadcast_robustness(ens, settings)?;
    let (mut task, kappa) = witness_task(ens, &robustness.witness)?;
    let positivized = !task.is_positive(TASK_EPSILON)?;
    if positivized {
        task = task.positivized(TASK_EPSILON)?;
    }
    let hamiltonians = task_to_hamiltonians(&task, ctx)?;

    let outputs = channel_outputs(&task, ens)?;
    let payoff = payoff_from_outputs(&task, &outputs);
    let (deficit, offset_e) = deficit_sum(&hamiltonians, &outputs, ctx)?;

    // solved in units of kbt_ln2, i.e. on the payoff operators p_x q_{i|x} E_{i|x}
    let unit = ctx.kbt_ln2();
    let payoff_ops: Vec<Vec<HermitianOperator>> = hamiltonians
        .iter()
        .map(|hx| hx.iter().map(|h| h.scale(1.0 / unit)).collect())
        .collect();
    let (free_max_payoff, marginals) = free_set_max(ens, &task, &payoff_ops, settings)?;
    let energy_max = unit * free_max_payoff;
    let free_outputs = task
        .routes
        .iter()
        .zip(&marginals)
        .map(|(r, j)| {
            let (din, dout) = (r.states[0].dim(), r.povm[0].dim());
            r.states
                .iter()
                .map(|s| DensityMatrix::normalized(apply_choi_op(j, din, dout, s.op()).psd_part()?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, offset_free) = deficit_sum(&hamiltonians, &free_outputs, ctx)?;
    let offset = closed_offset(&hamiltonians, ctx)?;
    let offset_residual = (offset_e - offset).abs().max((offset_free - offset).abs());

    let free_max_deficit = energy_max + offset;
    let gap = deficit - free_max_deficit;
    Ok(ChannelCertificate {
        robustness,
        task,
        positivized,
        epsilon: TASK_EPSILON,
        kappa,
        hamiltonians,
        deficit,
        free_max_deficit,
        gap,
        payoff,
        free_max_payoff,
        payoff_gap: payoff - free_max_payoff,
        offset,
        offset_residual,
        verdict: Verdict::from_value(gap / ctx.kbt_ln2()),
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StateCertificate {
    /// Generalized robustness of `ρ` against the convex hull of the vertices.
    pub robustness: f64,
    pub robustness_dual: f64,
    /// `H = kbt_ln2 · W` with `W ⪰ 0`, `tr(W v_k) ≤ 1`.
    pub hamiltonian: HermitianOperator,
    pub deficit: f64,
    /// `max_k Δ(v_k, H)`, the maximum over the polytope.
    pub free_max_deficit: f64,
    pub gap: f64,
    pub verdict: Verdict,
}

/// Certifies `ρ` against the polytope spanned by `vertices` with a single
/// Hamiltonian taken from the robustness dual.
pub fn certify_state_polytope(
    rho: &DensityMatrix,
    vertices: &[DensityMatrix],
    ctx: &ThermalContext,
    settings: &SolverSettings,
) -> Result<StateCertificate> {
    let d = rho.dim();
    if vertices.is_empty() || vertices.iter().any(|v| v.dim() != d) {
        return Err(Error::Shape("vertices must be nonempty and match the state".into()));
    }
    // blocks: M = tN, then one scalar weight per vertex
    let mut dims = vec![d];
    dims.extend(std::iter::repeat(1).take(vertices.len()));
    let mut p = SdpProblem::new(dims, Sense::Minimize);
    for k in 0..vertices.len() {
        p.add_objective(k + 1, &HermitianOperator::identity(1));
    }
    let blocks: Vec<usize> = (0..=vertices.len()).collect();
    p.add_matrix_equality(rho.op(), &blocks, |slot, g| {
        Some(if slot == 0 {
            -g
        } else {
            HermitianOperator::identity(1).scale(g.inner(vertices[slot - 1].op()))
        })
    });
    let sol = solve_optimal(&p, settings, "polytope robustness")?;
    let w = sol.dual_slack[0].psd_part()?;
    let hamiltonian = w.scale(ctx.kbt_ln2());
    let deficit = work_deficit(rho, &hamiltonian, ctx)?.delta;
    let mut free_max_deficit = f64::NEG_INFINITY;
    for v in vertices {
        free_max_deficit = free_max_deficit.max(work_deficit(v, &hamiltonian, ctx)?.delta);
    }
    let gap = deficit - free_max_deficit;
    Ok(StateCertificate {
        robustness: sol.primal_objective - 1.0,
        robustness_dual: w.inner(rho.op()) - 1.0,
        hamiltonian,
        deficit,
        free_max_deficit,
        gap,
        verdict: Verdict::from_value(gap / ctx.kbt_ln2()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_reconstructs_operators() {
        for d in 2..=3 {
            let f = frame(d).unwrap();
            assert_eq!(f.states.len(), 2 * d * d - d);
            let mut sum = HermitianOperator::zeros(d);
            for s in &f.states {
                sum += s.op();
            }
            assert!(sum.max_abs_diff(&HermitianOperator::identity(d).scale((2 * d - 1) as f64)) < 1e-12);
            let m = crate::linalg::ComplexMatrix::from_fn(d, d, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64) * 0.5));
            let x = HermitianOperator::hermitian_part(m);
            let mut back = HermitianOperator::zeros(d);
            for (s, dual) in f.states.iter().zip(&f.duals) {
                back += &s.op().scale(dual.inner(&x));
            }
            assert!(back.max_abs_diff(&x) < 1e-12);
        }
    }
}
