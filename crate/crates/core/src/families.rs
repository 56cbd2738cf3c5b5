//! Standard states and measurements used in examples, sweeps and tests.

use crate::assemblage::MeasurementAssemblage;
use crate::error::{Error, Result};
use crate::linalg::{max_entangled, ComplexMatrix, DensityMatrix, HermitianOperator, C64};

/// `p |Φ⁺⟩⟨Φ⁺| + (1 − p) I/d²`. For `d = 2` this is the two-qubit Werner
/// state up to a local unitary.
pub fn isotropic(d: usize, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("mixing parameter {p} outside [0, 1]")));
    }
    let phi = max_entangled(d)?;
    let noise = HermitianOperator::identity(d * d).scale((1.0 - p) / (d * d) as f64);
    DensityMatrix::new(phi.op().scale(p) + noise)
}

/// Two-qubit Werner state with visibility `p`.
pub fn werner(p: f64) -> Result<DensityMatrix> {
    isotropic(2, p)
}

fn projectors(vectors: &[Vec<C64>]) -> Vec<HermitianOperator> {
    vectors
        .iter()
        .map(|v| {
            let d = nalgebra::DVector::from_column_slice(v);
            let n = d.norm();
            HermitianOperator::outer(&(d / C64::new(n, 0.0)))
        })
        .collect()
}

/// Eigenbasis projectors of a Pauli operator, `+1` eigenvector first.
pub fn pauli_basis(name: char) -> Result<Vec<HermitianOperator>> {
    let (o, i) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    let z = C64::new(0.0, 0.0);
    let vs = match name.to_ascii_uppercase() {
        'X' => vec![vec![o, o], vec![o, -o]],
        'Y' => vec![vec![o, i], vec![o, -i]],
        'Z' => vec![vec![o, z], vec![z, o]],
        other => return Err(Error::Domain(format!("unknown Pauli basis '{other}'"))),
    };
    Ok(projectors(&vs))
}

/// Projective qubit measurements in the named Pauli bases, e.g. `"XZ"`.
pub fn pauli_measurements(names: &str) -> Result<MeasurementAssemblage> {
    let povms = names.chars().map(pauli_basis).collect::<Result<Vec<_>>>()?;
    MeasurementAssemblage::new(povms.len(), 2, povms)
}

/// The computational basis followed by its Fourier transform, the first
/// `k ≤ 2` of a set of mutually unbiased bases in any dimension.
pub fn fourier_mubs(d: usize, k: usize) -> Result<MeasurementAssemblage> {
    if d < 2 || !(1..=2).contains(&k) {
        return Err(Error::Domain(format!("fourier MUBs need d >= 2 and k in 1..=2, got d={d}, k={k}")));
    }
    let mut povms = Vec::with_capacity(k);
    let comp: Vec<Vec<C64>> = (0..d)
        .map(|j| (0..d).map(|i| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    povms.push(projectors(&comp));
    if k == 2 {
        let w = 2.0 * std::f64::consts::PI / d as f64;
        let fourier: Vec<Vec<C64>> = (0..d)
            .map(|j| (0..d).map(|i| C64::from_polar(1.0, w * (i * j) as f64)).collect())
            .collect();
        povms.push(projectors(&fourier));
    }
    MeasurementAssemblage::new(k, d, povms)
}

/// Mutually unbiased measurements with white noise of visibility `v`. For
/// qubits `k ≤ 3` uses the Pauli bases `Z, X, Y`; otherwise [`fourier_mubs`].
pub fn noisy_mubs(d: usize, k: usize, v: f64) -> Result<MeasurementAssemblage> {
    let sharp = if d == 2 {
        if !(1..=3).contains(&k) {
            return Err(Error::Domain(format!("qubits have at most 3 MUBs, asked for {k}")));
        }
        pauli_measurements(&"XZY"[..k])?
    } else {
        fourier_mubs(d, k)?
    };
    sharp.with_visibility(v)
}

/// Matrix of a single-qubit Pauli operator.
pub fn pauli(name: char) -> Result<HermitianOperator> {
    let p = pauli_basis(name)?;
    Ok(&p[0] - &p[1])
}

/// Haar-ish random unitary from a Gram-Schmidt pass over `entries`
/// (`d²` complex Gaussian samples, row-major).
pub fn unitary_from_gaussian(d: usize, entries: &[C64]) -> Result<ComplexMatrix> {
    if entries.len() != d * d {
        return Err(Error::Shape(format!("need {} samples, got {}", d * d, entries.len())));
    }
    let m = ComplexMatrix::from_row_slice(d, d, entries);
    Ok(m.qr().q())
}
