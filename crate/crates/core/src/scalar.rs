//! Floating point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar the simulator is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every literal used by the crate is
    /// representable (possibly rounded) in both supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Tolerance floor for iterative solves: the requested tolerance, raised
    /// to a few hundred ulps when the type cannot resolve it.
    #[inline]
    fn tolerance(requested: f64) -> Self {
        let floor = 256.0 * Self::epsilon().as_f64();
        Self::lit(requested.max(floor))
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_raised_for_single_precision() {
        assert_eq!(<f64 as Real>::tolerance(1e-12), 1e-12);
        assert!(<f32 as Real>::tolerance(1e-12) > 1e-6);
    }
}
