//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::LowerExp;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real floating-point scalar usable by the linear-algebra core.
///
/// Implemented for `f32` and `f64`. All tolerances quoted in the tests assume
/// `f64`; `f32` works but is only as accurate as single precision allows.
pub trait Scalar: RealField + Copy + ToPrimitive + LowerExp {
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }

    fn neg_infinity() -> Self;

    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from the half-open unit interval `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn neg_infinity() -> Self {
        f64::NEG_INFINITY
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Scalar for f32 {
    fn neg_infinity() -> Self {
        f32::NEG_INFINITY
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

/// `ln(2π)`.
pub(crate) fn ln_two_pi<T: Scalar>() -> T {
    T::two_pi().ln()
}
