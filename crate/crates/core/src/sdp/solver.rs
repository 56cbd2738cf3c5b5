use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::presolve::{eliminate_free, inner, presolve, Data, Eliminated, Presolved};
use super::problem::{SdpProblem, Sense};
use crate::error::Result;
use crate::linalg::{eig_hermitian, ComplexMatrix, HermitianOperator, C64};

type Cm = ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Result of [`solve`].
///
/// Objectives are reported in the problem's own sense. `gap` is always
/// primal minus dual of the equivalent minimization, so it is nonnegative up
/// to residual terms. For `Infeasible`, `certificate` holds `y` with
/// `bᵀy = 1`, `Σ_j y_j A_j ⪯ 0` and `Fᵀy = 0`; for `Unbounded`,
/// `primal_blocks` and `free_values` hold a ray with `A(X) + Fw ≈ 0` that
/// improves the objective.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_blocks: Vec<HermitianOperator>,
    pub free_values: Vec<f64>,
    pub dual_vector: Vec<f64>,
    pub dual_slack: Vec<HermitianOperator>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// Largest `|Σ_k tr(A_jk X_k) + (Fw)_j − b_j|` over all constraints.
    pub primal_residual: f64,
    /// Largest negative part of the dual slack's spectrum over all blocks,
    /// or violation of `Fᵀy = c` if larger.
    pub dual_residual: f64,
    pub iterations: usize,
    pub certificate: Option<Vec<f64>>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

const STEP_FRACTION: f64 = 0.99;
const CERT_TOL: f64 = 1e-9;
const TIGHTEN: f64 = 0.1;
const BALANCE: f64 = 0.5;
const EXTRA_ITERS: usize = 4;

struct Iterate {
    x: Vec<Cm>,
    y: Vec<f64>,
    z: Vec<Cm>,
    tau: f64,
    kappa: f64,
}

/// Nesterov-Todd scaling of one block: `W = R R†` with `W Z W = X` and
/// `R⁻¹ X R⁻† = R† Z R = Λ`. Directions are carried in the scaled space so
/// that `R⁻¹` is never formed.
struct Scaling {
    lam: Vec<f64>,
    r: Cm,
    w: Cm,
}

fn cplx(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn herm(m: Cm) -> Cm {
    let a = m.adjoint();
    (m + a) * cplx(0.5)
}

fn scale_cols(m: &mut Cm, s: &[f64]) {
    for (j, &sj) in s.iter().enumerate() {
        m.column_mut(j).scale_mut(sj);
    }
}

fn scale_rows(m: &mut Cm, s: &[f64]) {
    for (i, &si) in s.iter().enumerate() {
        m.row_mut(i).scale_mut(si);
    }
}

fn eigvals(m: &Cm) -> Option<Vec<f64>> {
    eig_hermitian(&HermitianOperator::hermitian_part(m.clone()))
        .ok()
        .map(|e| e.values)
}

fn frob2(m: &Cm) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

impl Scaling {
    fn new(x: &Cm, z: &Cm) -> Option<Self> {
        let l = x.clone().cholesky()?.l();
        let inner_m = HermitianOperator::hermitian_part(l.adjoint() * z * &l);
        let eig = eig_hermitian(&inner_m).ok()?;
        if !(eig.values[0] > 0.0) || !eig.values.iter().all(|v| v.is_finite()) {
            return None;
        }
        let lam: Vec<f64> = eig.values.iter().map(|m| m.sqrt()).collect();
        let mut r = &l * &eig.vectors;
        scale_cols(&mut r, &lam.iter().map(|s| 1.0 / s.sqrt()).collect::<Vec<_>>());
        let w = herm(&r * r.adjoint());
        Some(Self { lam, r, w })
    }

    /// `R† M R`.
    fn congruence(&self, m: &Cm) -> Cm {
        herm(self.r.adjoint() * m * &self.r)
    }

    /// `R M R†`.
    fn unscale(&self, m: &Cm) -> Cm {
        herm(&self.r * m * self.r.adjoint())
    }

    /// Largest `α` with `Λ + α D ⪰ 0`.
    fn max_step(&self, d: &Cm) -> Option<f64> {
        let mut p = d.clone();
        let inv: Vec<f64> = self.lam.iter().map(|s| 1.0 / s.sqrt()).collect();
        scale_rows(&mut p, &inv);
        scale_cols(&mut p, &inv);
        let lo = eigvals(&p)?[0];
        Some(if lo < 0.0 { -1.0 / lo } else { f64::INFINITY })
    }
}

/// Per-iteration factorization of the Newton system, shared by the
/// predictor and corrector solves.
struct Newton<'a> {
    data: &'a Data,
    scal: Vec<Scaling>,
    /// Upper factor of the Schur complement `M = RᵀR`.
    schur_r: DMatrix<f64>,
    h: DVector<f64>,
    cw: f64,
    u: DVector<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<Cm>,
    g: f64,
    mu: f64,
}

/// Search direction; `dxs` and `dzs` are the scaled blocks `R⁻¹dXR⁻†` and
/// `R†dZR`.
struct Direction {
    dxs: Vec<Cm>,
    dzs: Vec<Cm>,
    dz: Vec<Cm>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

impl Direction {
    fn add(&mut self, o: &Direction) {
        for (a, b) in self.dxs.iter_mut().zip(&o.dxs) {
            *a += b;
        }
        for (a, b) in self.dzs.iter_mut().zip(&o.dzs) {
            *a += b;
        }
        for (a, b) in self.dz.iter_mut().zip(&o.dz) {
            *a += b;
        }
        for (a, b) in self.dy.iter_mut().zip(&o.dy) {
            *a += b;
        }
        self.dtau += o.dtau;
        self.dkappa += o.dkappa;
    }
}

fn push_parts(col: &mut Vec<f64>, m: &Cm) {
    for z in m.iter() {
        col.push(z.re);
        col.push(z.im);
    }
}

impl<'a> Newton<'a> {
    fn new(data: &'a Data, it: &Iterate) -> Option<Self> {
        let scal = it
            .x
            .iter()
            .zip(&it.z)
            .map(|(x, z)| Scaling::new(x, z))
            .collect::<Option<Vec<_>>>()?;
        let m = data.m();
        // M_ij = ⟨R†A_iR, R†A_jR⟩; factor through a QR of the stacked
        // scaled constraints instead of forming M.
        let offsets: Vec<usize> = data
            .dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += 2 * d * d;
                Some(o)
            })
            .collect();
        let rows: usize = data.dims.iter().map(|d| 2 * d * d).sum();
        let mut g = DMatrix::<f64>::zeros(rows.max(m), m);
        for (j, row) in data.a.iter().enumerate() {
            for (k, a) in row {
                let mut buf = Vec::with_capacity(2 * data.dims[*k] * data.dims[*k]);
                push_parts(&mut buf, &scal[*k].congruence(a));
                for (i, v) in buf.into_iter().enumerate() {
                    g[(offsets[*k] + i, j)] += v;
                }
            }
        }
        let schur_r = g.qr().r();
        if (0..m).any(|i| !(schur_r[(i, i)].abs() > 0.0) || !schur_r[(i, i)].is_finite()) {
            return None;
        }
        let wcw: Vec<Cm> = scal
            .iter()
            .zip(&data.c)
            .map(|(s, c)| herm(&s.w * c * &s.w))
            .collect();
        let h = DVector::from_vec(data.apply(&wcw));
        let cw: f64 = data.c.iter().zip(&wcw).map(|(c, w)| inner(c, w)).sum();
        let mut nt = Self {
            data,
            scal,
            schur_r,
            h,
            cw,
            u: DVector::zeros(0),
        };
        nt.u = nt.schur_solve(&(&nt.h + DVector::from_column_slice(&data.b)))?;
        Some(nt)
    }

    fn schur_solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let t = self.schur_r.tr_solve_upper_triangular(rhs)?;
        self.schur_r.solve_upper_triangular(&t)
    }

    /// Solves the linearized system for target `σμ`, residual weight `η`
    /// and second-order corrections in scaled space, followed by iterative
    /// refinement of the equations that pass through the Schur complement.
    fn direction(
        &self,
        it: &Iterate,
        res: &Residuals,
        sigma: f64,
        eta: f64,
        corr: Option<(&[Cm], f64)>,
    ) -> Option<Direction> {
        let target = sigma * res.mu;
        let mut st = Vec::with_capacity(self.scal.len());
        for (k, s) in self.scal.iter().enumerate() {
            let n = s.lam.len();
            let mut t = Cm::zeros(n, n);
            for i in 0..n {
                t[(i, i)] = cplx(target - s.lam[i] * s.lam[i]);
            }
            if let Some((c, _)) = corr {
                t -= &c[k];
            }
            for i in 0..n {
                for j in 0..n {
                    t[(i, j)] *= cplx(2.0 / (s.lam[i] + s.lam[j]));
                }
            }
            st.push(t);
        }
        let corr_tau = corr.map_or(0.0, |(_, c)| c);
        let t_tau = target - it.tau * it.kappa - corr_tau;
        let p: Vec<f64> = res.rp.iter().map(|r| -eta * r).collect();
        let d_rhs: Vec<Cm> = res.rd.iter().map(|r| r * cplx(-eta)).collect();
        let g = -eta * res.g;

        let mut dir = self.kkt(it, &p, &d_rhs, g, Some(&st), t_tau)?;
        let zero_d: Vec<Cm> = self.data.dims.iter().map(|&d| Cm::zeros(d, d)).collect();
        let size = |ep: &[f64], eg: f64| ep.iter().fold(eg.abs(), |a, v| a.max(v.abs()));
        let (mut ep, mut eg) = self.kkt_residual(&dir, &p, g);
        for _ in 0..2 {
            let before = size(&ep, eg);
            if before == 0.0 {
                break;
            }
            let fix = self.kkt(it, &ep, &zero_d, eg, None, 0.0)?;
            let mut trial = Direction {
                dxs: dir.dxs.clone(),
                dzs: dir.dzs.clone(),
                dz: dir.dz.clone(),
                dy: dir.dy.clone(),
                dtau: dir.dtau,
                dkappa: dir.dkappa,
            };
            trial.add(&fix);
            let (ep2, eg2) = self.kkt_residual(&trial, &p, g);
            if size(&ep2, eg2) >= before {
                break;
            }
            dir = trial;
            ep = ep2;
            eg = eg2;
        }
        Some(dir)
    }

    fn unscaled_dx(&self, d: &Direction) -> Vec<Cm> {
        self.scal
            .iter()
            .zip(&d.dxs)
            .map(|(s, dx)| s.unscale(dx))
            .collect()
    }

    /// Residuals of `A(dX) − b dτ = p` and `bᵀdy − ⟨C,dX⟩ − dκ = g`.
    fn kkt_residual(&self, d: &Direction, p: &[f64], g: f64) -> (Vec<f64>, f64) {
        let data = self.data;
        let dx = self.unscaled_dx(d);
        let adx = data.apply(&dx);
        let ep = p
            .iter()
            .zip(adx.iter().zip(&data.b))
            .map(|(pj, (a, b))| pj - (a - b * d.dtau))
            .collect();
        let by: f64 = data.b.iter().zip(&d.dy).map(|(b, y)| b * y).sum();
        let cx: f64 = data.c.iter().zip(&dx).map(|(c, x)| inner(c, x)).sum();
        (ep, g - (by - cx - d.dkappa))
    }

    /// Solves
    ///
    /// ```text
    ///   A(dX) − b dτ = p,   Aᵀdy + dZ − C dτ = D,   bᵀdy − ⟨C,dX⟩ − dκ = g,
    ///   R⁻¹dXR⁻† + R†dZR = S,   τ dκ + κ dτ = t
    /// ```
    ///
    /// using `dX = R S R† − W dZ W`.
    fn kkt(
        &self,
        it: &Iterate,
        p: &[f64],
        d_rhs: &[Cm],
        g: f64,
        st: Option<&[Cm]>,
        t_tau: f64,
    ) -> Option<Direction> {
        let data = self.data;
        // part of dX that does not depend on (dy, dτ)
        let x0: Vec<Cm> = self
            .scal
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let wdw = herm(&s.w * &d_rhs[k] * &s.w);
                match st {
                    Some(st) => s.unscale(&st[k]) - wdw,
                    None => -wdw,
                }
            })
            .collect();
        let ax0 = DVector::from_vec(data.apply(&x0));
        let v = self.schur_solve(&(DVector::from_column_slice(p) - ax0))?;
        let b = DVector::from_column_slice(&data.b);
        let bh = &b - &self.h;
        let cx0: f64 = data.c.iter().zip(&x0).map(|(c, x)| inner(c, x)).sum();
        let num = g + cx0 + t_tau / it.tau - bh.dot(&v);
        let den = bh.dot(&self.u) + self.cw + it.kappa / it.tau;
        let dtau = num / den;
        let dy = v + &self.u * dtau;
        let dkappa = (t_tau - it.kappa * dtau) / it.tau;

        let dy_vec: Vec<f64> = dy.iter().copied().collect();
        let aty = data.adjoint(&dy_vec);
        let mut dxs = Vec::with_capacity(x0.len());
        let mut dzs = Vec::with_capacity(x0.len());
        let mut dz_all = Vec::with_capacity(x0.len());
        for (k, s) in self.scal.iter().enumerate() {
            let dz = &d_rhs[k] - &aty[k] + &data.c[k] * cplx(dtau);
            let dzs_k = s.congruence(&dz);
            let dxs_k = match st {
                Some(st) => &st[k] - &dzs_k,
                None => -&dzs_k,
            };
            dxs.push(dxs_k);
            dzs.push(dzs_k);
            dz_all.push(herm(dz));
        }
        Some(Direction {
            dxs,
            dzs,
            dz: dz_all,
            dy: dy_vec,
            dtau,
            dkappa,
        })
    }

    fn max_step(&self, it: &Iterate, d: &Direction) -> Option<f64> {
        let mut alpha = f64::INFINITY;
        for (k, s) in self.scal.iter().enumerate() {
            alpha = alpha.min(s.max_step(&d.dxs[k])?);
            alpha = alpha.min(s.max_step(&d.dzs[k])?);
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-it.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-it.kappa / d.dkappa);
        }
        Some(alpha)
    }

    fn step(&self, it: &mut Iterate, d: &Direction, alpha: f64) {
        for (k, s) in self.scal.iter().enumerate() {
            it.x[k] = herm(&it.x[k] + s.unscale(&d.dxs[k]) * cplx(alpha));
            it.z[k] = herm(&it.z[k] + &d.dz[k] * cplx(alpha));
        }
        for (y, dy) in it.y.iter_mut().zip(&d.dy) {
            *y += alpha * dy;
        }
        it.tau += alpha * d.dtau;
        it.kappa += alpha * d.dkappa;
    }
}

fn residuals(data: &Data, it: &Iterate, nu: f64) -> Residuals {
    let ax = data.apply(&it.x);
    let rp = ax
        .iter()
        .zip(&data.b)
        .map(|(a, b)| a - b * it.tau)
        .collect();
    let aty = data.adjoint(&it.y);
    let rd = aty
        .into_iter()
        .zip(&it.z)
        .zip(&data.c)
        .map(|((a, z), c)| a + z - c * cplx(it.tau))
        .collect();
    let by: f64 = data.b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
    let cx: f64 = data.c.iter().zip(&it.x).map(|(c, x)| inner(c, x)).sum();
    let g = by - cx - it.kappa;
    let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| inner(x, z)).sum();
    Residuals {
        rp,
        rd,
        g,
        mu: (xz + it.tau * it.kappa) / (nu + 1.0),
    }
}

enum Outcome {
    Optimal,
    Infeasible(Vec<f64>),
    Unbounded(Vec<Cm>),
    Stalled,
}

/// Homogeneous self-dual interior-point iteration on minimization data.
fn hsde(data: &Data, settings: &SolverSettings) -> (Outcome, Iterate, usize) {
    let nu: f64 = data.dims.iter().sum::<usize>() as f64;
    let pairs = data.split_pairs();
    let s = 1.0 + data.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut it = Iterate {
        x: data.dims.iter().map(|&d| Cm::identity(d, d) * cplx(s)).collect(),
        y: vec![0.0; data.m()],
        z: data.dims.iter().map(|&d| Cm::identity(d, d) * cplx(s)).collect(),
        tau: 1.0,
        kappa: s * s,
    };
    let mut best: Option<(f64, Iterate)> = None;
    let mut iterations = 0;
    let mut met_at: Option<usize> = None;

    let snapshot = |it: &Iterate| Iterate {
        x: it.x.clone(),
        y: it.y.clone(),
        z: it.z.clone(),
        tau: it.tau,
        kappa: it.kappa,
    };

    loop {
        let res = residuals(data, &it, nu);
        let tau = it.tau;
        let pres = res.rp.iter().fold(0.0f64, |a, r| a.max(r.abs())) / tau;
        let dres = res.rd.iter().map(frob2).fold(0.0f64, f64::max).sqrt() / tau;
        let cx: f64 = data.c.iter().zip(&it.x).map(|(c, x)| inner(c, x)).sum();
        let by: f64 = data.b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
        let gap = (cx - by) / tau;

        let merit = (pres / settings.feas_tol)
            .max(dres / settings.feas_tol)
            .max(gap.abs() / settings.gap_tol);
        if best.as_ref().map_or(true, |(m, _)| merit < *m) {
            best = Some((merit, snapshot(&it)));
        }
        // Aim an order of magnitude below the requested tolerances, and fall
        // back to the best iterate once it meets them and progress stalls.
        if merit <= TIGHTEN {
            return (Outcome::Optimal, it, iterations);
        }
        if merit <= 1.0 && met_at.is_none() {
            met_at = Some(iterations);
        }
        if met_at.is_some_and(|i| iterations >= i + EXTRA_ITERS) {
            break;
        }
        if by > 0.0 {
            // Aᵀy + Z = r_d + Cτ
            let dual_ray: f64 = res
                .rd
                .iter()
                .zip(&data.c)
                .map(|(r, c)| frob2(&(r + c * cplx(tau))))
                .sum::<f64>()
                .sqrt();
            if dual_ray <= CERT_TOL * by {
                let y = it.y.iter().map(|v| v / by).collect();
                return (Outcome::Infeasible(y), it, iterations);
            }
        }
        if cx < 0.0 {
            let ax = data.apply(&it.x);
            let ray = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ray <= CERT_TOL * -cx {
                let x = it.x.iter().map(|x| x * cplx(-1.0 / cx)).collect();
                return (Outcome::Unbounded(x), it, iterations);
            }
        }
        if iterations >= settings.max_iter || !res.mu.is_finite() || res.mu < 1e-300 {
            break;
        }
        iterations += 1;

        let Some(newton) = Newton::new(data, &it) else {
            break;
        };
        let Some(pred) = newton.direction(&it, &res, 0.0, 1.0, None) else {
            break;
        };
        let Some(alpha_aff) = newton.max_step(&it, &pred) else {
            break;
        };
        let alpha_aff = alpha_aff.min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
        let corr: Vec<Cm> = pred
            .dxs
            .iter()
            .zip(&pred.dzs)
            .map(|(a, b)| herm(a * b))
            .collect();
        let Some(dir) = newton.direction(
            &it,
            &res,
            sigma,
            1.0 - sigma,
            Some((&corr, pred.dtau * pred.dkappa)),
        ) else {
            break;
        };
        let Some(alpha_max) = newton.max_step(&it, &dir) else {
            break;
        };
        let alpha = (STEP_FRACTION * alpha_max).min(1.0);
        if !(alpha > 1e-12) {
            break;
        }
        newton.step(&mut it, &dir, alpha);
        // Keep split free variables from drifting to infinity together;
        // their difference and therefore A(X) and ⟨C,X⟩ are unchanged.
        for &(p, q) in &pairs {
            let shift = BALANCE * it.x[p][(0, 0)].re.min(it.x[q][(0, 0)].re);
            it.x[p][(0, 0)].re -= shift;
            it.x[q][(0, 0)].re -= shift;
        }
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            break;
        }
    }
    let (merit, best) = best.expect("first iterate is always recorded");
    let outcome = if merit <= 1.0 {
        Outcome::Optimal
    } else {
        Outcome::Stalled
    };
    (outcome, best, iterations)
}

fn sense_sign(sense: Sense) -> f64 {
    match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    }
}

/// Minimization data, free-variable matrix `F` and free cost.
fn to_data(problem: &SdpProblem) -> (Data, DMatrix<f64>, Vec<f64>) {
    let sign = sense_sign(problem.sense);
    let data = Data {
        dims: problem.block_dims.clone(),
        c: problem
            .objective
            .iter()
            .map(|c| c.matrix() * cplx(sign))
            .collect(),
        a: problem
            .constraints
            .iter()
            .map(|con| {
                con.terms
                    .iter()
                    .map(|t| (t.block, t.matrix.matrix().clone()))
                    .collect()
            })
            .collect(),
        b: problem.constraints.iter().map(|c| c.rhs).collect(),
    };
    let mut f = DMatrix::zeros(problem.constraints.len(), problem.n_free());
    for (j, c) in problem.constraints.iter().enumerate() {
        for &(i, v) in &c.free_terms {
            f[(j, i)] += v;
        }
    }
    let cf = problem.free_objective.iter().map(|c| sign * c).collect();
    (data, f, cf)
}

fn wrap(blocks: Vec<Cm>) -> Vec<HermitianOperator> {
    blocks.into_iter().map(HermitianOperator::hermitian_part).collect()
}

/// Solves `problem` to the requested tolerances.
///
/// Only malformed input is an `Err`; numerical trouble is reported through
/// [`SdpSolution::status`], with the best iterate found.
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    problem.validate()?;
    super::debug_dump(problem);
    let (full, f, cf) = to_data(problem);
    let m = full.m();
    let sign = sense_sign(problem.sense);
    let zero_blocks: Vec<Cm> = full.dims.iter().map(|&d| Cm::zeros(d, d)).collect();
    let early = |status, x: Vec<Cm>, w: Vec<f64>, certificate| SdpSolution {
        status,
        primal_blocks: wrap(x),
        free_values: w,
        dual_vector: vec![0.0; m],
        dual_slack: wrap(zero_blocks.clone()),
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: 0,
        certificate,
    };

    let (data, elim) = match eliminate_free(&full, &f, &cf) {
        Eliminated::Reduced(d, e) => (d, e),
        Eliminated::DualInfeasible(w) => {
            return Ok(early(SolveStatus::Unbounded, zero_blocks.clone(), w, None));
        }
    };
    let rows = match presolve(&data) {
        Presolved::Reduced(rows) => rows,
        Presolved::Inconsistent(y) => {
            let y = elim.recover_y(&y, false);
            let cert = normalize_certificate(&full, y);
            return Ok(early(
                SolveStatus::Infeasible,
                zero_blocks.clone(),
                vec![0.0; problem.n_free()],
                Some(cert),
            ));
        }
    };
    let reduced = data.restrict(&rows);
    let (outcome, it, iterations) = hsde(&reduced, settings);

    let mut status = match outcome {
        Outcome::Optimal => SolveStatus::Optimal,
        Outcome::Infeasible(_) => SolveStatus::Infeasible,
        Outcome::Unbounded(_) => SolveStatus::Unbounded,
        Outcome::Stalled => SolveStatus::MaxIter,
    };
    let lift = |v: &[f64]| {
        let mut out = vec![0.0; data.m()];
        for (&j, x) in rows.iter().zip(v) {
            out[j] = *x;
        }
        out
    };
    let mut certificate = None;
    let y_full = match &outcome {
        Outcome::Infeasible(y) => {
            let y = elim.recover_y(&lift(y), false);
            certificate = Some(y.clone());
            y
        }
        _ => {
            let y: Vec<f64> = it.y.iter().map(|v| v / it.tau).collect();
            elim.recover_y(&lift(&y), true)
        }
    };
    let (x, w): (Vec<Cm>, Vec<f64>) = match outcome {
        Outcome::Unbounded(ray) => {
            let ax = full.apply(&ray);
            let neg: Vec<f64> = ax.iter().map(|v| -v).collect();
            let w = elim.recover_w(&neg);
            (ray, w)
        }
        _ => {
            let x: Vec<Cm> = it.x.iter().map(|x| x * cplx(1.0 / it.tau)).collect();
            let ax = full.apply(&x);
            let slack: Vec<f64> = full.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let w = elim.recover_w(&slack);
            (x, w)
        }
    };
    let z: Vec<Cm> = it.z.iter().map(|z| z * cplx(1.0 / it.tau)).collect();

    let ax = full.apply(&x);
    let fw: Vec<f64> = if w.is_empty() {
        vec![0.0; m]
    } else {
        (&f * DVector::from_column_slice(&w)).iter().copied().collect()
    };
    let primal_residual = (0..m).fold(0.0f64, |acc, j| acc.max((ax[j] + fw[j] - full.b[j]).abs()));
    let aty = full.adjoint(&y_full);
    let mut dual_residual = 0.0f64;
    for (c, a) in full.c.iter().zip(&aty) {
        dual_residual = match eigvals(&(c - a)) {
            Some(ev) => dual_residual.max(-ev[0]),
            None => f64::INFINITY,
        };
    }
    if !cf.is_empty() {
        let fty = f.transpose() * DVector::from_column_slice(&y_full);
        for (a, c) in fty.iter().zip(&cf) {
            dual_residual = dual_residual.max((a - c).abs());
        }
    }
    let cx: f64 = full.c.iter().zip(&x).map(|(c, x)| inner(c, x)).sum::<f64>()
        + cf.iter().zip(&w).map(|(c, v)| c * v).sum::<f64>();
    let by: f64 = full.b.iter().zip(&y_full).map(|(b, y)| b * y).sum();
    if status == SolveStatus::Optimal
        && (primal_residual > settings.feas_tol || dual_residual > settings.feas_tol)
    {
        status = SolveStatus::MaxIter;
    }

    Ok(SdpSolution {
        status,
        primal_blocks: wrap(x),
        free_values: w,
        dual_vector: y_full.iter().map(|v| sign * v).collect(),
        dual_slack: wrap(z),
        primal_objective: sign * cx,
        dual_objective: sign * by,
        gap: cx - by,
        primal_residual,
        dual_residual,
        iterations,
        certificate,
    })
}

fn normalize_certificate(data: &Data, y: Vec<f64>) -> Vec<f64> {
    let by: f64 = data.b.iter().zip(&y).map(|(b, v)| b * v).sum();
    y.into_iter().map(|v| v / by).collect()
}

/// Outcome of a pure feasibility question `A(X) = b, X ⪰ 0`.
#[derive(Clone, Debug)]
pub enum Feasibility {
    /// A point whose constraint residuals are within `feas_tol`.
    Feasible {
        point: Vec<HermitianOperator>,
        free: Vec<f64>,
    },
    /// `y` with `bᵀy = 1`, `Fᵀy = 0` and `Σ_j y_j A_j ⪯ 0`. `margin` is
    /// `−λ_max(Σ_j y_j A_j)` over all blocks.
    Infeasible { certificate: Vec<f64>, margin: f64 },
    /// Neither a point nor a certificate could be established within
    /// tolerance; the best iterate is attached.
    Marginal {
        point: Vec<HermitianOperator>,
        primal_residual: f64,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Decides feasibility of the constraint set of `problem`; its objective is
/// ignored.
pub fn feasibility(problem: &SdpProblem, settings: &SolverSettings) -> Result<Feasibility> {
    let mut p = problem.clone();
    p.sense = Sense::Minimize;
    for c in p.objective.iter_mut() {
        *c = HermitianOperator::zeros(c.dim());
    }
    p.free_objective.iter_mut().for_each(|c| *c = 0.0);
    let sol = solve(&p, settings)?;
    match sol.status {
        SolveStatus::Optimal => Ok(Feasibility::Feasible {
            point: sol.primal_blocks,
            free: sol.free_values,
        }),
        SolveStatus::Infeasible => {
            let y = sol.certificate.expect("infeasible status carries a certificate");
            let by = p.dual_value(&y);
            let mut worst = f64::NEG_INFINITY;
            for block in p.adjoint(&y) {
                worst = worst.max(block.max_eigenvalue()?);
            }
            // a free column with Fᵀy ≠ 0 breaks the certificate
            let free_violation = p.free_adjoint(&y).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if worst <= CERT_TOL && by >= CERT_TOL && free_violation <= CERT_TOL {
                Ok(Feasibility::Infeasible {
                    certificate: y,
                    margin: -worst,
                })
            } else {
                Ok(Feasibility::Marginal {
                    point: sol.primal_blocks,
                    primal_residual: sol.primal_residual,
                })
            }
        }
        SolveStatus::Unbounded | SolveStatus::MaxIter => Ok(Feasibility::Marginal {
            point: sol.primal_blocks,
            primal_residual: sol.primal_residual,
        }),
    }
}
