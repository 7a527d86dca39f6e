//! Floating point abstraction used by the numeric kernels.

use num_traits::{Float, FromPrimitive};

/// Scalar type the statistics, aggregation and cost kernels are generic over.
///
/// Implemented by `f32` and `f64` through the blanket impl below.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    /// Converts an unsigned integer quantity, rounding when it does not fit.
    fn from_u64_lossy(v: u64) -> Self {
        Self::from_u64(v).unwrap_or_else(Self::max_value)
    }

    /// Converts a ratio of two integer quantities.
    fn ratio_u64(num: u64, den: u64) -> Self {
        Self::from_u64_lossy(num) / Self::from_u64_lossy(den)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}
