//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the pipeline is generic over (`f32` or `f64`).
///
/// Transcendental functions come from [`RealField`]; conversions to and from
/// literals go through `num-traits`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }

    #[inline]
    fn finite(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
