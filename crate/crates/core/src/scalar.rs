//! Scalar abstractions.
//!
//! [`Scalar`] is the floating-point type every grid, field and solver is
//! generic over. [`BasisField`] is the narrower arithmetic needed to build the
//! time basis, where the Gram matrix of `t^k e^t` is far too ill-conditioned
//! for `f64` and extended precision (or exact rationals) is used instead.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, One, Signed, ToPrimitive};

/// Real floating-point scalar used throughout the numerics.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Sum
    + Default
    + Send
    + Sync
    + 'static
    + faer::traits::RealField
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite `f64` values, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Field arithmetic used by the basis construction.
///
/// Implemented for `f64` (fast, loses orthogonality beyond a handful of
/// modes), [`crate::fixed::Fixed`] (1024 fractional bits) and [`BigRational`]
/// (exact up to a controlled approximation of `e^{2T}`, slow for large `N`).
pub trait BasisField: Clone + Num + Neg<Output = Self> + Debug {
    /// Exact conversion from a finite binary float.
    fn from_f64_exact(x: f64) -> Option<Self>;

    /// Nearest `f64`.
    fn to_f64_lossy(&self) -> f64;

    fn from_usize(n: usize) -> Self;

    /// `e^x`, exact to the working precision of the type.
    fn exp(x: &Self) -> Self;

    fn is_negative(&self) -> bool;
}

impl BasisField for f64 {
    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn exp(x: &Self) -> Self {
        x.exp()
    }

    fn is_negative(&self) -> bool {
        *self < 0.0
    }
}

/// Fractional bits kept when `e^x` is rounded to a dyadic rational.
pub const EXP_PRECISION_BITS: u64 = 640;

impl BasisField for BigRational {
    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_usize(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn exp(x: &Self) -> Self {
        exp_rational(x, EXP_PRECISION_BITS)
    }

    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

/// `e^x` as a dyadic rational with `bits` fractional bits.
///
/// Sums the Taylor series until the tail is below `2^-(bits + 8)`, then
/// rounds to the dyadic grid so downstream numerators stay bounded.
pub fn exp_rational(x: &BigRational, bits: u64) -> BigRational {
    let scale = BigInt::one() << bits;
    let tolerance = BigRational::new(BigInt::one(), BigInt::one() << (bits + 8));
    let abs_x = x.abs();
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    let mut k = 1usize;
    loop {
        term = term * x / BigRational::from_integer(BigInt::from(k));
        sum += &term;
        // Once k > 2|x| the remaining tail is bounded by 2|term|.
        if BigRational::from_integer(BigInt::from(k)) > &abs_x * BigRational::from_integer(2.into())
            && term.abs() < tolerance
        {
            break;
        }
        k += 1;
    }
    let scaled = (sum * BigRational::from_integer(scale.clone())).round();
    BigRational::new(scaled.to_integer(), scale)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_exp_matches_float() {
        for &x in &[0.0, 0.5, 1.0, 4.0, -2.0, 8.0] {
            let r = exp_rational(&BigRational::from_float(x).unwrap(), 200);
            let got = r.to_f64_lossy();
            assert!((got - x.exp()).abs() <= 4.0 * f64::EPSILON * x.exp(), "x={x}");
        }
    }

    #[test]
    fn rational_exp_is_multiplicative_to_precision() {
        let a = BigRational::from_float(1.25).unwrap();
        let b = BigRational::from_float(2.75).unwrap();
        let lhs = exp_rational(&a, 300) * exp_rational(&b, 300);
        let rhs = exp_rational(&(a + b), 300);
        let diff = (lhs - &rhs).abs() / rhs;
        assert!(diff < BigRational::new(1.into(), BigInt::one() << 280));
    }

    #[test]
    fn lit_roundtrip() {
        assert_eq!(<f64 as Scalar>::lit(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::lit(0.5), 0.5f32);
    }
}
