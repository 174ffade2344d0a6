//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the linear algebra, sketches and instance
/// generators are written against. Implemented for `f32` and `f64`.
pub trait Real:
    'static + Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + LowerExp + Send + Sync
{
    /// Lossy conversion from `f64`; constants in the crate are written as `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite real converts to f64")
    }

    /// Relative cutoff for numerical rank: `1e-12`, or the machine epsilon
    /// when the type is too coarse for that.
    #[inline]
    fn rank_rtol() -> Self {
        Self::of(1e-12).max(Self::epsilon())
    }

    /// Tolerance used when validating least-squares optimality certificates.
    #[inline]
    fn lsq_rtol() -> Self {
        Self::of(1e-8).max(Self::epsilon() * Self::of(1e5))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, never on how the caller chunked the work.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().copied().fold(T::zero(), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
