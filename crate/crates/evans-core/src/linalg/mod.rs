//! Dense complex linear algebra primitives: matrices, LU, ordered Schur
//! decomposition, Hermitian eigenproblems, and spectral projectors.
//!
//! All operations are pure functions of their inputs and safe to call
//! concurrently.

mod hermitian;
mod matrix;
mod projectors;
mod schur;

pub use hermitian::{
    cond2, hermitian_eigen, projector_range_basis, rank, singular_values, sval_extremes,
};
pub use matrix::{ComplexMatrix, Lu};
pub use projectors::{
    eigenprojections, invariant_subspace_basis, sylvester_spectrum, ProjectorPair, SpectralEnd,
};
pub use schur::{eigenvalues, ordered_schur, OrderedSchur};
