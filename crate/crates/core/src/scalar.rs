//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the models are computed in: `f32` or `f64`.
///
/// Beyond [`Float`], a scalar must print and parse losslessly (Rust's
/// shortest round-trip `Display` paired with `FromStr`), which the model
/// file relies on for bit-exact round trips.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Tag written into model files (`"f64"` / `"f32"`).
    const NAME: &'static str;

    /// Raw IEEE-754 bits, widened to 64 bits.
    fn to_bits_u64(self) -> u64;

    /// Converts an `f64` literal, panicking only for values that cannot be
    /// represented at all (never the case for `f32`/`f64`).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn to_bits_u64(self) -> u64 {
        u64::from(self.to_bits())
    }
}

/// Parses a scalar written by `Display` (also accepts `inf`, `-inf`).
pub(crate) fn parse_scalar<T: Scalar>(s: &str) -> Option<T> {
    s.trim().parse::<T>().ok()
}

/// Sample standard deviation with the n−1 denominator; 0 for fewer than two values.
pub(crate) fn sample_sd<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let mean = mean(values);
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / T::from_usize_lossy(n - 1)).sqrt()
}

pub(crate) fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let s: T = values.iter().copied().sum();
    s / T::from_usize_lossy(values.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parse_round_trips_bits() {
        for v in [0.1_f64, -0.0, 1e-300, 35.528, f64::MAX, f64::INFINITY, -f64::INFINITY] {
            let back: f64 = parse_scalar(&v.to_string()).unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
        for v in [0.1_f32, -2.5e-7, f32::MIN_POSITIVE] {
            let back: f32 = parse_scalar(&v.to_string()).unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sample_sd_uses_n_minus_one() {
        assert_eq!(sample_sd(&[1.0_f64, 3.0]), 2.0_f64.sqrt());
        assert_eq!(sample_sd(&[4.0_f64]), 0.0);
    }
}
