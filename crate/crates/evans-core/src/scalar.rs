//! Scalar abstraction: the whole library is generic over the underlying
//! real floating-point type, with complex arithmetic built on top of it
//! via [`num_complex::Complex`].

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

/// Complex number over the generic scalar.
pub type Cx<T> = Complex<T>;

/// Convert an `f64` literal into the generic scalar.
///
/// Panics only if the target type cannot represent any `f64` at all, which
/// cannot happen for the supported scalar types.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant not representable in scalar type")
}

/// Convert a pair of `f64` literals into a generic complex number.
#[inline]
pub fn cx<T: Scalar>(re: f64, im: f64) -> Cx<T> {
    Complex::new(real(re), real(im))
}

/// Complex zero.
#[inline]
pub fn czero<T: Scalar>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

/// Complex one.
#[inline]
pub fn cone<T: Scalar>() -> Cx<T> {
    Complex::new(T::one(), T::zero())
}
