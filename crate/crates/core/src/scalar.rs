//! Scalar abstraction: all numerics are generic over an IEEE float type.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + FftNum + Debug + Display + LowerExp + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal or intermediate into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 value representable in scalar type")
}

/// `a*b - c*d` with compensated rounding (Kahan's algorithm via FMA).
///
/// Used where catastrophic cancellation matters, e.g. uncertainty products
/// evaluated near the minimal-uncertainty floor.
#[inline]
pub fn diff_of_products<T: Real>(a: T, b: T, c: T, d: T) -> T {
    let p = a * b;
    let ep = a.mul_add(b, -p);
    let q = c * d;
    let eq = c.mul_add(d, -q);
    (p - q) + (ep - eq)
}
