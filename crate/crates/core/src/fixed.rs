//! Binary fixed-point numbers with [`FRACTION_BITS`] fractional bits.
//!
//! Exact rationals make the `N = 20` basis construction take minutes because
//! numerators and denominators grow without bound. A fixed point with ~300
//! decimal digits after the point has the same practical effect for a Gram
//! matrix whose condition number is around `1e33`, at a tiny fraction of the
//! cost.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};

use crate::scalar::{exp_rational, BasisField};

pub const FRACTION_BITS: u64 = 1024;

/// `raw / 2^FRACTION_BITS`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed {
    raw: BigInt,
}

impl Fixed {
    fn from_raw(raw: BigInt) -> Self {
        Self { raw }
    }

    /// Nearest fixed-point value to a rational.
    pub fn from_rational(x: &BigRational) -> Self {
        let scaled = x * BigRational::from_integer(BigInt::one() << FRACTION_BITS);
        Self::from_raw(scaled.round().to_integer())
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.raw.clone(), BigInt::one() << FRACTION_BITS)
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.raw.bits();
        if bits == 0 {
            return 0.0;
        }
        let shift = bits.saturating_sub(64);
        let mantissa = (&self.raw >> shift).to_f64().unwrap_or(f64::NAN);
        let mut exponent = shift as i64 - FRACTION_BITS as i64;
        let mut out = mantissa;
        // Scale in steps so neither factor over- or underflows on its own.
        while exponent != 0 {
            let step = exponent.clamp(-1000, 1000);
            out *= 2f64.powi(step as i32);
            exponent -= step;
        }
        out
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed({:e})", self.to_f64())
    }
}

impl Add for Fixed {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_raw(self.raw + rhs.raw)
    }
}

impl Sub for Fixed {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_raw(self.raw - rhs.raw)
    }
}

impl Mul for Fixed {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let half = BigInt::one() << (FRACTION_BITS - 1);
        Self::from_raw((self.raw * rhs.raw + half) >> FRACTION_BITS)
    }
}

impl Div for Fixed {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Self::from_raw((self.raw << FRACTION_BITS) / rhs.raw)
    }
}

impl Rem for Fixed {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        Self::from_raw(self.raw % rhs.raw)
    }
}

impl Neg for Fixed {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_raw(-self.raw)
    }
}

impl Zero for Fixed {
    fn zero() -> Self {
        Self::from_raw(BigInt::zero())
    }
    fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }
}

impl One for Fixed {
    fn one() -> Self {
        Self::from_raw(BigInt::one() << FRACTION_BITS)
    }
}

impl Num for Fixed {
    type FromStrRadixErr = num_traits::ParseFloatError;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        let x = <f64 as Num>::from_str_radix(s, radix)?;
        Ok(Self::from_rational(
            &BigRational::from_float(x).unwrap_or_else(BigRational::zero),
        ))
    }
}

impl BasisField for Fixed {
    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(|r| Self::from_rational(&r))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64()
    }

    fn from_usize(n: usize) -> Self {
        Self::from_raw(BigInt::from(n) << FRACTION_BITS)
    }

    fn exp(x: &Self) -> Self {
        Self::from_rational(&exp_rational(&x.to_rational(), FRACTION_BITS + 16))
    }

    fn is_negative(&self) -> bool {
        self.raw.sign() == Sign::Minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fx(x: f64) -> Fixed {
        Fixed::from_f64_exact(x).unwrap()
    }

    #[test]
    fn arithmetic_matches_f64_on_exact_values() {
        assert_eq!((fx(1.5) * fx(-2.25)).to_f64(), -3.375);
        assert_eq!((fx(3.0) / fx(4.0)).to_f64(), 0.75);
        assert_eq!((fx(3.0) - fx(4.5)).to_f64(), -1.5);
        assert!(fx(-1e-300).is_negative());
        assert!(!Fixed::zero().is_negative());
    }

    #[test]
    fn conversion_handles_extreme_magnitudes() {
        assert_eq!(fx(1e200).to_f64(), 1e200);
        assert_eq!(fx(2f64.powi(-900)).to_f64(), 2f64.powi(-900));
    }

    #[test]
    fn exp_is_accurate() {
        let e4 = Fixed::exp(&fx(4.0)).to_f64();
        assert!((e4 - 4f64.exp()).abs() <= 2.0 * f64::EPSILON * e4);
    }

    proptest! {
        #[test]
        fn division_inverts_multiplication(a in -1e6f64..1e6, b in 1e-3f64..1e6) {
            let q = (fx(a) * fx(b)) / fx(b);
            prop_assert!((q.to_f64() - a).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}
