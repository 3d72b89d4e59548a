//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the optimizer, linear algebra and simulator are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that depend on the precision
/// are exposed as associated functions so that callers never hard-code an
/// `f64` epsilon into generic code.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Default residual tolerance for power iteration.
    fn power_tol() -> Self;

    /// Relative off-diagonal threshold used by the Jacobi sweeps.
    fn jacobi_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for finite literals and the two implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn power_tol() -> Self {
        1e-10
    }

    fn jacobi_tol() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    fn power_tol() -> Self {
        1e-5
    }

    fn jacobi_tol() -> Self {
        f32::EPSILON
    }
}
