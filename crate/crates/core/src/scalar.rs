//! Floating-point scalar abstraction: every numeric routine in this crate is
//! generic over [`Real`], instantiated as `f32` or `f64`.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for similarity scores, dissimilarities and thresholds.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; panics only on values a float cannot
    /// represent at all (never for finite inputs).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Median of a slice, destructively reordering it. Even-length inputs yield
/// the arithmetic mean of the two central values. Values must not be NaN.
pub fn median_in_place<T: Real>(values: &mut [T]) -> T {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("median input must not be NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::half()
    }
}

/// Median of a borrowed slice (copies into scratch).
pub fn median_of<T: Real>(values: &[T]) -> T {
    let mut scratch = values.to_vec();
    median_in_place(&mut scratch)
}
