//! Real-valued quantities (energy, bandwidth, time) used by the architecture
//! description and the cost model.
//!
//! Access counts are always exact integers; only the quantities derived from
//! them through per-access energies, bandwidths and the clock are generic.

use num_traits::{Float, FromPrimitive, NumCast};
use std::fmt::{Debug, Display};

/// Floating point scalar accepted by [`crate::arch::Architecture`] and
/// [`crate::cost::CostReport`]: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an exact event count. Precision loss for very large counts is
    /// accepted; counts themselves are kept as integers elsewhere.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).unwrap_or_else(Self::infinity)
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
