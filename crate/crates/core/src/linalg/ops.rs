use nalgebra::{DVector, SymmetricEigen};

use super::types::HermitianOperator;
use super::{ChoiMatrix, ComplexMatrix, DensityMatrix, C64, SUPPORT_TOL};
use crate::error::{Error, Result};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_SWEEPS: usize = 10_000;

/// Spectral decomposition `A = U diag(values) U†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// `U diag(f) U†` for a replacement spectrum.
    pub fn reconstruct_with(&self, spectrum: &[f64]) -> HermitianOperator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = C64::new(spectrum[j], 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        HermitianOperator::hermitian_part(scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.reconstruct_with(&self.values)
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }
}

pub fn eig_hermitian(op: &HermitianOperator) -> Result<Eigen> {
    let m = op.matrix().clone();
    let scale = op.max_abs();
    let eig = SymmetricEigen::try_new(m, EIG_EPS, EIG_MAX_SWEEPS)
        .ok_or(Error::EigenConvergence(scale))?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// Applies a scalar function to the spectrum.
pub fn matrix_fn<F>(op: &HermitianOperator, f: F) -> Result<HermitianOperator>
where
    F: Fn(f64) -> f64,
{
    let e = eig_hermitian(op)?;
    let mut mapped = Vec::with_capacity(e.values.len());
    for &lambda in &e.values {
        let v = f(lambda);
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "function is not finite at eigenvalue {lambda:e}"
            )));
        }
        mapped.push(v);
    }
    Ok(e.reconstruct_with(&mapped))
}

/// Von Neumann entropy in bits, with `0 log 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let e = eig_hermitian(rho.op())?;
    Ok(-e
        .values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>())
}

/// Quantum relative entropy `D(ρ‖σ) = tr ρ(log₂ρ − log₂σ)` in bits.
///
/// Eigenvalues of σ at or below [`SUPPORT_TOL`] count as its kernel; if ρ
/// puts more than that much weight there the divergence is infinite.
pub fn rel_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!(
            "relative entropy of dims {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let es = eig_hermitian(sigma.op())?;
    // diagonal of ρ in σ's eigenbasis
    let rotated = es.vectors.adjoint() * rho.op().matrix() * &es.vectors;
    let mut cross = 0.0;
    for (j, &q) in es.values.iter().enumerate() {
        let w = rotated[(j, j)].re;
        if q <= SUPPORT_TOL {
            if w > SUPPORT_TOL {
                return Err(Error::InfiniteDivergence(w));
            }
            continue;
        }
        cross += w * q.log2();
    }
    Ok(-von_neumann_entropy(rho)? - cross)
}

/// `D(ρ‖σ)` when `log₂σ` is already known in closed form (e.g. thermal states).
pub fn rel_entropy_with_log(rho: &DensityMatrix, log2_sigma: &HermitianOperator) -> Result<f64> {
    if rho.dim() != log2_sigma.dim() {
        return Err(Error::Shape("relative entropy dimension mismatch".into()));
    }
    Ok(-von_neumann_entropy(rho)? - rho.op().inner(log2_sigma))
}

fn check_dims(total: usize, dims: &[usize], keep: &[usize]) -> Result<()> {
    let prod: usize = dims.iter().product();
    if dims.is_empty() || prod != total {
        return Err(Error::Shape(format!(
            "subsystem dims {dims:?} do not multiply to {total}"
        )));
    }
    for w in keep.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Shape(format!(
                "kept subsystems {keep:?} must be strictly increasing"
            )));
        }
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Shape(format!(
            "kept subsystems {keep:?} out of range for {} factors",
            dims.len()
        )));
    }
    Ok(())
}

/// Row-major offsets of every multi-index over `subset`, most significant first.
fn offsets(dims: &[usize], subset: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let mut out = vec![0usize];
    for &s in subset {
        let mut next = Vec::with_capacity(out.len() * dims[s]);
        for &base in &out {
            for i in 0..dims[s] {
                next.push(base + i * strides[s]);
            }
        }
        out = next;
    }
    out
}

fn split(dims: &[usize], keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
    (offsets(dims, keep), offsets(dims, &traced))
}

/// Traces out every factor not listed in `keep`.
pub fn partial_trace(
    op: &HermitianOperator,
    dims: &[usize],
    keep: &[usize],
) -> Result<HermitianOperator> {
    check_dims(op.dim(), dims, keep)?;
    let (kept, traced) = split(dims, keep);
    let m = op.matrix();
    let dk = kept.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (r, &ro) in kept.iter().enumerate() {
        for (c, &co) in kept.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced {
                acc += m[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(HermitianOperator::hermitian_part(out))
}

/// Adjoint of [`partial_trace`]: places `op` on the kept factors and the
/// identity on the rest, so that `tr(G · tr_T J) = tr(embed(G) J)`.
pub fn embed_identity(
    op: &HermitianOperator,
    dims: &[usize],
    keep: &[usize],
) -> Result<HermitianOperator> {
    let total: usize = dims.iter().product();
    check_dims(total, dims, keep)?;
    let (kept, traced) = split(dims, keep);
    if kept.len() != op.dim() {
        return Err(Error::Shape(format!(
            "operator of dim {} does not match kept factors of dim {}",
            op.dim(),
            kept.len()
        )));
    }
    let m = op.matrix();
    let mut out = ComplexMatrix::zeros(total, total);
    for (r, &ro) in kept.iter().enumerate() {
        for (c, &co) in kept.iter().enumerate() {
            for &t in &traced {
                out[(ro + t, co + t)] = m[(r, c)];
            }
        }
    }
    Ok(HermitianOperator::hermitian_part(out))
}

pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    a.kron(b)
}

/// `E(ρ) = tr_in[(ρᵀ ⊗ I) J]`.
pub fn apply_channel(choi: &ChoiMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != choi.dim_in() {
        return Err(Error::Shape(format!(
            "state of dim {} fed to channel with input dim {}",
            rho.dim(),
            choi.dim_in()
        )));
    }
    let out = apply_map(choi, rho.op());
    DensityMatrix::normalized(out)
}

/// Linear action of a Choi matrix on an arbitrary Hermitian input.
pub(crate) fn apply_map(choi: &ChoiMatrix, x: &HermitianOperator) -> HermitianOperator {
    apply_choi_op(choi.op(), choi.dim_in(), choi.dim_out(), x)
}

/// `tr_in[(xᵀ ⊗ I) J]` for any `J` on `din ⊗ dout`, valid or not.
pub(crate) fn apply_choi_op(
    j: &HermitianOperator,
    din: usize,
    dout: usize,
    x: &HermitianOperator,
) -> HermitianOperator {
    let j = j.matrix();
    let xt = x.matrix();
    let mut out = ComplexMatrix::zeros(dout, dout);
    // Σ_ij ρ_ij ⟨i|J|j⟩ with ⟨i|J|j⟩ the (i,j) output block
    for i in 0..din {
        for k in 0..din {
            let coeff = xt[(i, k)];
            if coeff == C64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..dout {
                for b in 0..dout {
                    out[(a, b)] += coeff * j[(i * dout + a, k * dout + b)];
                }
            }
        }
    }
    HermitianOperator::hermitian_part(out)
}

/// `tr_A[(a ⊗ I_B) x]` for `x` on `A ⊗ B` with `dim A = a.dim()`.
pub fn contract_first(a: &HermitianOperator, x: &HermitianOperator) -> Result<HermitianOperator> {
    let da = a.dim();
    if da == 0 || x.dim() % da != 0 {
        return Err(Error::Shape(format!(
            "operator of dim {} does not factor with first dim {da}",
            x.dim()
        )));
    }
    let db = x.dim() / da;
    let (e, m) = (a.matrix(), x.matrix());
    let mut out = ComplexMatrix::zeros(db, db);
    for i in 0..db {
        for j in 0..db {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..da {
                for l in 0..da {
                    acc += e[(k, l)] * m[(l * db + i, k * db + j)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(HermitianOperator::hermitian_part(out))
}

/// `|Φ⁺⟩⟨Φ⁺|` with `|Φ⁺⟩ = Σ_i |ii⟩/√d`.
pub fn max_entangled(d: usize) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "maximally entangled state needs d >= 2, got {d}"
        )));
    }
    let mut psi = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        psi[i * d + i] = C64::new(1.0, 0.0);
    }
    DensityMatrix::pure(&psi)
}

/// Orthonormal basis of the real space of `d x d` Hermitian matrices under
/// `⟨A, B⟩ = tr(AB)`: diagonal units, then `(E_ij + E_ji)/√2` and
/// `i(E_ij − E_ji)/√2` for `i < j`.
pub fn hermitian_basis(d: usize) -> Vec<HermitianOperator> {
    let mut basis = Vec::with_capacity(d * d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = C64::new(1.0, 0.0);
        basis.push(HermitianOperator::hermitian_part(m));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(i, j)] = C64::new(s, 0.0);
            m[(j, i)] = C64::new(s, 0.0);
            basis.push(HermitianOperator::hermitian_part(m));
            let mut m = ComplexMatrix::zeros(d, d);
            m[(i, j)] = C64::new(0.0, s);
            m[(j, i)] = C64::new(0.0, -s);
            basis.push(HermitianOperator::hermitian_part(m));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn pauli_z() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn eig_identity_and_pauli_z() {
        let e = eig_hermitian(&HermitianOperator::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let e = eig_hermitian(&pauli_z()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_fn_examples() {
        let id = matrix_fn(&HermitianOperator::zeros(3), f64::exp).unwrap();
        assert!(id.max_abs_diff(&HermitianOperator::identity(3)) < 1e-15);
        let sq = matrix_fn(&pauli_x(), |x| x * x).unwrap();
        assert!(sq.max_abs_diff(&HermitianOperator::identity(2)) < 1e-14);
        let e = matrix_fn(&HermitianOperator::from_real_diagonal(&[1.0, 2.0]), f64::exp).unwrap();
        let expect = HermitianOperator::from_real_diagonal(&[1f64.exp(), 2f64.exp()]);
        assert!(e.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn matrix_fn_reports_domain_error() {
        let err = matrix_fn(&pauli_z(), f64::ln).unwrap_err();
        assert!(matches!(err, Error::Domain(msg) if msg.contains("-1")));
    }

    #[test]
    fn rel_entropy_examples() {
        let zero = DensityMatrix::basis(2, 0);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((rel_entropy(&zero, &mixed).unwrap() - 1.0).abs() < 1e-14);
        assert!(rel_entropy(&zero, &zero).unwrap().abs() < 1e-14);
        assert!(matches!(
            rel_entropy(&mixed, &zero),
            Err(Error::InfiniteDivergence(_))
        ));
    }

    #[test]
    fn partial_trace_bell_marginal() {
        let phi = max_entangled(2).unwrap();
        let a = partial_trace(phi.op(), &[2, 2], &[1]).unwrap();
        assert!(a.max_abs_diff(&HermitianOperator::identity(2).scale(0.5)) < 1e-15);
        assert!(partial_trace(phi.op(), &[2, 3], &[0]).is_err());
        assert!(partial_trace(phi.op(), &[2, 2], &[1, 0]).is_err());
    }

    #[test]
    fn max_entangled_corners() {
        let phi = max_entangled(2).unwrap();
        let m = phi.op().matrix();
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((m[(i, j)].re - 0.5).abs() < 1e-15);
        }
        assert!((phi.purity() - 1.0).abs() < 1e-12);
        assert!(max_entangled(1).is_err());
    }

    #[test]
    fn channel_examples() {
        let rho = DensityMatrix::pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let out = apply_channel(&ChoiMatrix::identity(2), &rho).unwrap();
        assert!(out.op().max_abs_diff(rho.op()) < 1e-15);
        let out = apply_channel(&ChoiMatrix::depolarizing(2), &rho).unwrap();
        assert!(out.op().max_abs_diff(DensityMatrix::maximally_mixed(2).op()) < 1e-15);
        assert!(apply_channel(&ChoiMatrix::identity(3), &rho).is_err());
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        for d in 1..5 {
            let b = hermitian_basis(d);
            assert_eq!(b.len(), d * d);
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((x.inner(y) - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn embed_is_adjoint_of_partial_trace() {
        let dims = [2, 3, 2];
        let j = HermitianOperator::hermitian_part(ComplexMatrix::from_fn(12, 12, |r, c| {
            C64::new((r * 7 + c * 3) as f64 % 5.0, (r as f64 - c as f64) * 0.1)
        }));
        let g = HermitianOperator::hermitian_part(ComplexMatrix::from_fn(4, 4, |r, c| {
            C64::new((r + 2 * c) as f64, (r * c) as f64 * 0.3)
        }));
        let lhs = g.inner(&partial_trace(&j, &dims, &[0, 2]).unwrap());
        let rhs = embed_identity(&g, &dims, &[0, 2]).unwrap().inner(&j);
        assert!((lhs - rhs).abs() < 1e-11);
    }
}
