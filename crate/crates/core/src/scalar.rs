//! Scalar abstraction shared by the numeric parts of the crate.
//!
//! Geometry, thresholding and the entity metrics are written once against
//! [`Scalar`] and instantiated with `f64` for everyday use, or with an exact
//! rational type when ties and equality have to be decided without rounding.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A number type the generic routines can compute in.
///
/// Only field operations, ordering and conversions are required, so both
/// floating point and rational types qualify.
pub trait Scalar: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {
    /// Exact conversion of a count.
    fn from_count(n: u64) -> Self;

    /// Lossy conversion to `f64` for reporting.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `num / den`, or zero when `den` is zero.
    fn ratio_or_zero(num: u64, den: u64) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count exceeds i64"))
    }
}

impl Scalar for BigRational {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_or_zero_handles_empty_denominator() {
        assert_eq!(f64::ratio_or_zero(3, 0), 0.0);
        assert_eq!(BigRational::ratio_or_zero(2, 6), BigRational::new(1.into(), 3.into()));
        assert_eq!(Ratio::<i64>::ratio_or_zero(4, 8), Ratio::new(1, 2));
    }

    #[test]
    fn min_max() {
        assert_eq!(f64::min_of(2.0, 1.0), 1.0);
        assert_eq!(f64::max_of(2.0, 1.0), 2.0);
    }
}
