//! Evans function computation for eigenvalue problems W' = A(x, lambda) W
//! with asymptotically constant coefficients.
//!
//! The crate provides the full pipeline: analytic continuation of eigenbases
//! at spatial infinity along lambda-contours, one-sided propagation to x = 0
//! by the centered exterior-product method or continuous orthogonalization
//! (plus two boundary-value variants), assembly of D(lambda), and winding
//! numbers with adaptive step control on the contour.
//!
//! All numerics are generic over the real scalar type (f32 or f64) through
//! [`scalar::Scalar`]; concrete f64 aliases are exported at the crate root.

pub mod bvp;
pub mod error;
pub mod evans;
pub mod exterior;
pub mod fitting;
pub mod kato;
pub mod linalg;
pub mod problems;
pub mod scalar;
pub mod shooting;

pub use error::{EvansError, Result};
pub use scalar::{Cx, Scalar};

/// Which spatial infinity a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Side::Plus => T::one(),
            Side::Minus => -T::one(),
        }
    }
}

/// f64 complex scalar.
pub type C64 = num_complex::Complex<f64>;
/// f64 dense complex matrix.
pub type Matrix64 = linalg::ComplexMatrix<f64>;
/// f64 problem instance.
pub type System64 = problems::EvansSystem<f64>;
/// f64 wedge vector.
pub type Wedge64 = exterior::WedgeVector<f64>;
/// f64 polar state.
pub type Polar64 = shooting::PolarState<f64>;
/// f64 contour.
pub type Contour64 = kato::Contour<f64>;
/// f64 mesh specification.
pub type Mesh64 = shooting::MeshSpec<f64>;
