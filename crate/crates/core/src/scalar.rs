use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::simplex::LpScalar;

/// Floating point scalar used throughout the numerical core.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + LpScalar {
    /// Converts an `f64` constant into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
