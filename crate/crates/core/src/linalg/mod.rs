//! Dense complex Hermitian linear algebra and the quantum-information
//! primitives everything else is built on.
//!
//! All matrices are dense `nalgebra` matrices over `Complex64`. Logarithms are
//! base 2 throughout, so entropies and divergences are in bits.

mod json;
mod ops;
mod types;

pub use json::{format_f64, MatrixJson};
pub use ops::{
    apply_channel, contract_first, eig_hermitian, embed_identity, hermitian_basis, kron, matrix_fn,
    max_entangled, partial_trace, rel_entropy, rel_entropy_with_log, von_neumann_entropy, Eigen,
};
pub use types::{ChoiMatrix, DensityMatrix, HermitianOperator};
pub(crate) use ops::apply_choi_op;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type ComplexMatrix = nalgebra::DMatrix<C64>;

/// Maximum tolerated entrywise asymmetry `|M - M†|` on ingest.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues above this are clipped to zero for states and channels.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Allowed deviation of `tr_out J` from the identity for Choi matrices.
pub const TP_TOL: f64 = 1e-9;
/// Rank tolerance used when checking supports in relative entropies.
pub const SUPPORT_TOL: f64 = 1e-9;
