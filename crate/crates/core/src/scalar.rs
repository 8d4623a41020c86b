//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the model, charts, equilibria and integrator are
/// generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every finite `f64` is representable (possibly
    /// rounded) in the supported types, so this never fails for literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Real power on a nonnegative base.
///
/// `0^x = 0` for `x > 0`, `0^0 = 1`, `0^x = inf` for `x < 0`. Negative bases
/// have no meaning anywhere in the model; they yield NaN so that an integrator
/// treats the evaluation as a failed trial step.
#[inline]
pub fn pow_nonneg<T: Scalar>(base: T, exponent: T) -> T {
    if base > T::zero() {
        base.powf(exponent)
    } else if base == T::zero() {
        if exponent > T::zero() {
            T::zero()
        } else if exponent == T::zero() {
            T::one()
        } else {
            T::infinity()
        }
    } else {
        T::nan()
    }
}

#[inline]
pub(crate) fn hypot2<T: Scalar>(a: [T; 2]) -> T {
    a[0].hypot(a[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_base_conventions() {
        assert_eq!(pow_nonneg(0.0_f64, 2.5), 0.0);
        assert_eq!(pow_nonneg(0.0_f64, 0.0), 1.0);
        assert!(pow_nonneg(0.0_f64, -1.0).is_infinite());
        assert!(pow_nonneg(-1e-3_f64, 0.5).is_nan());
        assert!((pow_nonneg(4.0_f32, 0.5) - 2.0).abs() < 1e-6);
    }
}
