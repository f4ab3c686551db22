//! Scalar abstraction shared by every numerical kernel.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the engine is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Sum
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + rustfft::FftNum
        + Default
        + Debug
        + Display
        + LowerExp
        + FromStr
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count or index into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub(crate) fn from_i64<T: Real>(n: i64) -> T {
    T::from_i64(n).expect("integer representable in scalar type")
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -T::PI() {
        y = y + two_pi;
    } else if y > T::PI() {
        y = y - two_pi;
    }
    y
}
