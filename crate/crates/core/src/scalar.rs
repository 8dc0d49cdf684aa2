use core::fmt::{Debug, Display};
use num_traits::{Float, FromPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Largest argument `x` for which `exp(x)` stays finite, with some headroom.
    #[inline]
    fn exp_limit() -> Self {
        Self::max_value().ln() * Self::lit(0.97)
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}
