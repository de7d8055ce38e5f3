//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Real scalar type the data, trees and samplers are generic over (`f32` or `f64`).
///
/// Sampling helpers live on the trait so generic code does not have to carry
/// `rand_distr` bounds around.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw uniformly from [0, 1).
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from a chi-squared distribution with `dof` degrees of freedom.
    fn chi_squared<R: Rng + ?Sized>(dof: Self, rng: &mut R) -> Self;

    /// Decimal text used by the CSV writer. Rounded to 15 significant digits
    /// for `f64`; shortest round-trip form for `f32`.
    fn to_decimal_string(self) -> String;

    /// Convert an `f64` literal. Panics only on non-representable input,
    /// which cannot happen for finite values and either float width.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float to f64")
    }

    #[inline]
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count fits in a float")
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }

    fn chi_squared<R: Rng + ?Sized>(dof: Self, rng: &mut R) -> Self {
        ChiSquared::new(dof)
            .expect("positive degrees of freedom")
            .sample(rng)
    }

    fn to_decimal_string(self) -> String {
        let rounded: f64 = format!("{self:.14e}").parse().expect("reparse own output");
        format_shortest(rounded)
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }

    fn chi_squared<R: Rng + ?Sized>(dof: Self, rng: &mut R) -> Self {
        ChiSquared::new(dof)
            .expect("positive degrees of freedom")
            .sample(rng)
    }

    fn to_decimal_string(self) -> String {
        format_shortest(self)
    }
}

// Plain notation for ordinary magnitudes, scientific outside that range.
fn format_shortest<T: Display + LowerExp + Float>(value: T) -> String {
    let magnitude = value.abs();
    let small = T::from(1e-5).unwrap();
    let large = T::from(1e15).unwrap();
    if magnitude == T::zero() || (magnitude >= small && magnitude < large) {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_strings_round_to_fifteen_digits() {
        assert_eq!(0.1_f64.to_decimal_string(), "0.1");
        assert_eq!((1.0_f64 / 3.0).to_decimal_string(), "0.333333333333333");
        assert_eq!(2.5e-9_f64.to_decimal_string(), "2.5e-9");
        assert_eq!((-1234.5_f64).to_decimal_string(), "-1234.5");
        assert_eq!(0.0_f64.to_decimal_string(), "0");
    }

    #[test]
    fn f32_strings_round_trip() {
        let v = 0.1_f32 + 0.2_f32;
        let s = v.to_decimal_string();
        assert_eq!(s.parse::<f32>().unwrap(), v);
    }
}
