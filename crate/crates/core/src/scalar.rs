use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is written against (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Relative tolerance used to stop positive-term series.
    #[inline]
    fn series_tolerance() -> Self {
        Self::lit(1e-15).max(Self::default_epsilon())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `base^exponent` for `base >= 0` with the convention `0^0 = 1`.
#[inline]
pub(crate) fn pow0<T: Real>(base: T, exponent: T) -> T {
    if exponent == T::zero() {
        T::one()
    } else if base == T::zero() {
        T::zero()
    } else {
        base.powf(exponent)
    }
}
