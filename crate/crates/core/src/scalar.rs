//! Floating-point element types the engine is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// A floating-point type usable as a tensor element.
///
/// Implemented for `f32` (training and storage) and `f64` (gradient checks).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; rounds to nearest for narrower types.
    fn of(v: f64) -> Self;

    /// Conversion to the on-disk `f32` representation.
    fn to_f32_lossy(self) -> f32;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f32_lossy(self) -> f32 {
        self
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f32_lossy(self) -> f32 {
        self as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
