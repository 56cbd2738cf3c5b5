//! Certification of quantum resources through work-extraction tasks.
//!
//! The crate computes work deficits of states under local Hamiltonians,
//! extracts witness Hamiltonians from semidefinite-programming duals, and
//! uses them to certify steering, measurement incompatibility and broadcast
//! incompatibility of channels.

pub mod assemblage;
pub mod error;
pub mod families;
pub mod incompat;
pub mod linalg;
pub mod sdp;
pub mod steering;
pub mod thermo;
pub mod verdict;

pub use assemblage::{DeterministicStrategies, HamiltonianAssemblage, MeasurementAssemblage, StateAssemblage};
pub use error::{Error, Result};
pub use linalg::{ChoiMatrix, ComplexMatrix, DensityMatrix, HermitianOperator, C64};
pub use sdp::{SdpProblem, SdpSolution, SolveStatus, SolverSettings};
pub use thermo::{ThermalContext, WorkReport};
pub use verdict::Verdict;
