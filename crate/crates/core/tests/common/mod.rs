#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermocert::{ComplexMatrix, DensityMatrix, HermitianOperator, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(normal(rng), normal(rng))
    })
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> HermitianOperator {
    HermitianOperator::hermitian_part(gaussian_matrix(rng, d, d) * C64::new(scale, 0.0))
}

/// Full-rank state `GG†/tr` from a Ginibre matrix.
pub fn random_state(rng: &mut ChaCha8Rng, d: usize) -> DensityMatrix {
    let g = gaussian_matrix(rng, d, d);
    DensityMatrix::normalized(HermitianOperator::hermitian_part(&g * g.adjoint())).unwrap()
}

/// Rank-`r` state.
pub fn random_state_rank(rng: &mut ChaCha8Rng, d: usize, r: usize) -> DensityMatrix {
    let g = gaussian_matrix(rng, d, r);
    DensityMatrix::normalized(HermitianOperator::hermitian_part(&g * g.adjoint())).unwrap()
}

pub fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    gaussian_matrix(rng, d, d).qr().q()
}

/// Projectors onto the columns of a random unitary.
pub fn random_basis(rng: &mut ChaCha8Rng, d: usize) -> Vec<HermitianOperator> {
    let u = random_unitary(rng, d);
    (0..d)
        .map(|k| HermitianOperator::outer(&u.column(k).into_owned()))
        .collect()
}

/// Eigenvalues of a Hermitian matrix through the real symmetric embedding
/// `[[Re, −Im], [Im, Re]]`, each appearing twice.
pub fn eigenvalues_via_embedding(h: &HermitianOperator) -> Vec<f64> {
    let m = h.matrix();
    let d = m.nrows();
    let big = nalgebra::DMatrix::<f64>::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = big.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

/// Two-qubit assemblage from `v|ψ⟩⟨ψ| + (1 − v)I/4` with a random pure `ψ`,
/// random visibility and two random projective measurements on A.
pub fn random_qubit_assemblage(rng: &mut ChaCha8Rng) -> thermocert::StateAssemblage {
    let psi = gaussian_matrix(rng, 4, 1);
    let pure = DensityMatrix::pure(psi.as_slice()).unwrap();
    let v: f64 = rng.gen_range(0.0..1.0);
    let rho = DensityMatrix::new(pure.op().scale(v) + HermitianOperator::identity(4).scale((1.0 - v) / 4.0)).unwrap();
    let povms = vec![random_basis(rng, 2), random_basis(rng, 2)];
    let m = thermocert::MeasurementAssemblage::new(2, 2, povms).unwrap();
    thermocert::steering::assemble(&rho, &m).unwrap()
}
