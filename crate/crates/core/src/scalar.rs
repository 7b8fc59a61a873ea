//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the core math is generic over.
///
/// Implemented by `f32` and `f64`; the crate-root aliases fix `f64`.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// Shorthand for lossy conversion of an `f64` constant.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {}
