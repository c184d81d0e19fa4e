//! Scalar abstraction shared by the geometry and clustering code.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point types usable as coordinates.
///
/// Implemented for `f32` and `f64`. Scene files and the exploration
/// pipeline use `f64`; the geometric kernels and k-means accept either.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Tolerance used for lattice and boundary comparisons.
    const EPS: Self;

    fn from_f64_lossy(v: f64) -> Self;

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::max_value)
    }

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const EPS: Self = 1e-5;

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const EPS: Self = 1e-9;

    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let r = theta % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Signed smallest difference `a - b`, wrapped into `(-π, π]`.
pub fn angle_diff<T: Scalar>(a: T, b: T) -> T {
    let pi = T::PI();
    let mut d = wrap_angle(a - b);
    if d > pi {
        d = d - T::TAU();
    }
    d
}
