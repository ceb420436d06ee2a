//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by the geometry kernels: `f32` or `f64`.
///
/// The bound collects what the kernels need from nalgebra (SVD, symmetric
/// eigendecomposition, matrix exponential) together with lossless-enough
/// conversion to and from `f64`, which is how tolerances and sampled values
/// enter the generic code.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + FloatConst + Send + Sync + 'static
{
    /// Converts an `f64` literal or tolerance into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Widens to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25).as_f64(), 0.25);
        assert_eq!(<f32 as Real>::lit(0.5).as_f64(), 0.5);
    }
}
