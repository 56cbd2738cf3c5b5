use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DVector;

use super::ops::{eig_hermitian, partial_trace};
use super::{ComplexMatrix, C64, HERMITIAN_TOL, PSD_TOL, TP_TOL, TRACE_TOL};
use crate::error::{Error, Result};

/// A square complex matrix equal to its conjugate transpose.
///
/// Stored exactly Hermitian: every constructor symmetrizes `(M + M†)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates and symmetrizes an input matrix.
    ///
    /// Rejects non-square input, non-finite entries, and matrices whose
    /// entrywise asymmetry exceeds [`HERMITIAN_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for j in 0..matrix.ncols() {
            for i in 0..matrix.nrows() {
                let z = matrix[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
            }
        }
        let asym = max_asymmetry(&matrix);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::hermitian_part(matrix))
    }

    /// `(M + M†)/2` without the asymmetry gate. Used for matrices produced
    /// internally whose asymmetry is pure round-off.
    pub fn hermitian_part(matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        let adj = matrix.adjoint();
        Self {
            matrix: (matrix + adj) * C64::new(0.5, 0.0),
        }
    }

    pub fn from_real(rows: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * rows {
            return Err(Error::Shape(format!(
                "expected {} entries, got {}",
                rows * rows,
                data.len()
            )));
        }
        Self::new(ComplexMatrix::from_row_iterator(
            rows,
            rows,
            data.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self { matrix: m }
    }

    /// Rank-one projector `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &DVector<C64>) -> Self {
        Self::hermitian_part(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// `tr(A B)`, real for Hermitian arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        herm_inner(&self.matrix, &other.matrix)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: &self.matrix * C64::new(s, 0.0),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }

    /// `U A U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::hermitian_part(u * &self.matrix * u.adjoint())
    }

    /// `A B + B A` halved (the Jordan product), Hermitian for Hermitian inputs.
    pub fn jordan(&self, other: &Self) -> Self {
        let ab = &self.matrix * &other.matrix;
        Self::hermitian_part(ab)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(self)?.values[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*eig_hermitian(self)?.values.last().expect("nonempty spectrum"))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Entrywise maximum distance to another operator.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Projects onto the PSD cone by zeroing negative eigenvalues.
    pub fn psd_part(&self) -> Result<Self> {
        let e = eig_hermitian(self)?;
        let clipped: Vec<f64> = e.values.iter().map(|&v| v.max(0.0)).collect();
        Ok(e.reconstruct_with(&clipped))
    }
}

pub(crate) fn herm_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub(crate) fn max_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: self.matrix + rhs.matrix,
        }
    }
}

impl AddAssign<&HermitianOperator> for HermitianOperator {
    fn add_assign(&mut self, rhs: &HermitianOperator) {
        self.matrix += &rhs.matrix;
    }
}

impl SubAssign<&HermitianOperator> for HermitianOperator {
    fn sub_assign(&mut self, rhs: &HermitianOperator) {
        self.matrix -= &rhs.matrix;
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: self.matrix - rhs.matrix,
        }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        HermitianOperator {
            matrix: -&self.matrix,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, s: f64) -> HermitianOperator {
        self.scale(s)
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, s: f64) -> HermitianOperator {
        self.scale(s)
    }
}

/// A positive semidefinite operator of unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Validates a state: eigenvalues above `-PSD_TOL` (clipped to zero) and
    /// trace within `TRACE_TOL` of one.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace(tr));
        }
        Self::clip(op)
    }

    /// Divides a PSD operator by its trace.
    pub fn normalized(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::BadTrace(tr));
        }
        Self::clip(op.scale(1.0 / tr))
    }

    fn clip(op: HermitianOperator) -> Result<Self> {
        let e = eig_hermitian(&op)?;
        let min = e.values[0];
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        if min >= 0.0 {
            return Ok(Self { op });
        }
        let clipped: Vec<f64> = e.values.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let renorm: Vec<f64> = clipped.iter().map(|v| v / total).collect();
        Ok(Self {
            op: e.reconstruct_with(&renorm),
        })
    }

    /// Pure state `|ψ⟩⟨ψ|` from an (unnormalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("pure state vector must be nonzero".into()));
        }
        Ok(Self {
            op: HermitianOperator::outer(&(v / C64::new(norm, 0.0))),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut diag = vec![0.0; dim];
        diag[k] = 1.0;
        Self {
            op: HermitianOperator::from_real_diagonal(&diag),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn purity(&self) -> f64 {
        self.op.inner(&self.op)
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        let e = eig_hermitian(&(&self.op - &other.op))?;
        Ok(0.5 * e.values.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            op: self.op.kron(&other.op),
        }
    }
}

/// Choi matrix `J = Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a channel, input factor first.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    dim_in: usize,
    dim_out: usize,
    op: HermitianOperator,
}

impl ChoiMatrix {
    /// Validates complete positivity and trace preservation.
    pub fn new(dim_in: usize, dim_out: usize, op: HermitianOperator) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || op.dim() != dim_in * dim_out {
            return Err(Error::Shape(format!(
                "Choi matrix of dim {} does not match {}x{}",
                op.dim(),
                dim_in,
                dim_out
            )));
        }
        let e = eig_hermitian(&op)?;
        if e.values[0] < -PSD_TOL {
            return Err(Error::NotPsd(e.values[0]));
        }
        let marginal = partial_trace(&op, &[dim_in, dim_out], &[0])?;
        let dev = marginal.max_abs_diff(&HermitianOperator::identity(dim_in));
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self {
            dim_in,
            dim_out,
            op,
        })
    }

    /// Builds the Choi matrix from Kraus operators `K_k` (each `dim_out x dim_in`).
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Shape("no Kraus operators".into()))?;
        let (dout, din) = (first.nrows(), first.ncols());
        let mut j = ComplexMatrix::zeros(din * dout, din * dout);
        for k in kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::Shape("Kraus operators differ in shape".into()));
            }
            // vec(K) in input-major order: Σ_i |i⟩ ⊗ K|i⟩
            let mut v = DVector::<C64>::zeros(din * dout);
            for i in 0..din {
                for o in 0..dout {
                    v[i * dout + o] = k[(o, i)];
                }
            }
            j += &v * v.adjoint();
        }
        Self::new(din, dout, HermitianOperator::hermitian_part(j))
    }

    pub fn identity(dim: usize) -> Self {
        let mut v = DVector::<C64>::zeros(dim * dim);
        for i in 0..dim {
            v[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self {
            dim_in: dim,
            dim_out: dim,
            op: HermitianOperator::outer(&v),
        }
    }

    /// Replacer channel `ρ ↦ tr(ρ) σ`.
    pub fn replacer(dim_in: usize, sigma: &DensityMatrix) -> Self {
        Self {
            dim_in,
            dim_out: sigma.dim(),
            op: HermitianOperator::identity(dim_in).kron(sigma.op()),
        }
    }

    /// Completely depolarizing channel `ρ ↦ tr(ρ) I/d`.
    pub fn depolarizing(dim: usize) -> Self {
        Self::replacer(dim, &DensityMatrix::maximally_mixed(dim))
    }

    /// Measure-and-prepare channel `ρ ↦ Σ_a tr(M_a ρ) σ_a`.
    pub fn measure_prepare(povm: &[HermitianOperator], states: &[DensityMatrix]) -> Result<Self> {
        if povm.len() != states.len() || povm.is_empty() {
            return Err(Error::Shape("POVM and state lists differ in length".into()));
        }
        let din = povm[0].dim();
        let dout = states[0].dim();
        let mut j = HermitianOperator::zeros(din * dout);
        for (m, s) in povm.iter().zip(states) {
            j += &m.transpose().kron(s.op());
        }
        Self::new(din, dout, j)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }
}
