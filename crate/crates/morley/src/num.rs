//! Scalar abstraction for the whole crate.
//!
//! All geometry, assembly and solver code is generic over [`Real`], so the
//! stack can be instantiated at `f32` or `f64`. The concrete aliases at the
//! crate root use `f64`, which is what the convergence benchmarks and the
//! stated tolerances assume.

use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp, UpperExp};

/// Floating-point scalar usable by meshes, quadrature and linear algebra.
pub trait Real:
    nalgebra::RealField
    + FromPrimitive
    + ToPrimitive
    + num_traits::MulAdd<Output = Self>
    + Copy
    + Default
    + Display
    + LowerExp
    + UpperExp
    + Debug
{
    /// Lossy conversion from an `f64` literal or table entry.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite value")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for pulling an `f64` constant into the working scalar type.
#[inline]
pub fn lit<R: Real>(x: f64) -> R {
    R::of(x)
}

/// Converts a small count into the working scalar type.
#[inline]
pub fn count<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("count fits in scalar")
}
