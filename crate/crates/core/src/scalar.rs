//! Scalar abstraction shared by the matrix and grid layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Real floating-point type usable as the entry type of [`crate::ncmat::MatElem`]
/// and [`crate::optorus::OpGrid`]. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumCast
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Working epsilon for eigen-solvers and PSD checks.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn tiny() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn tiny() -> Self {
        1e-13
    }
}

pub type C<T> = Complex<T>;

/// Literal conversion from `f64`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable")
}

/// Conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(lit(re), lit(im))
}

/// `e^{2πi t}` computed in f64 then narrowed.
#[inline]
pub fn expi2pi<T: Real>(t: f64) -> C<T> {
    let a = 2.0 * std::f64::consts::PI * t;
    cplx(a.cos(), a.sin())
}

/// `b^λ` for a nonnegative real base and complex exponent, with `0^λ = 0`.
#[inline]
pub fn pow_complex(base: f64, lambda: Complex<f64>) -> Complex<f64> {
    if base <= 0.0 {
        return Complex::new(0.0, 0.0);
    }
    if lambda.im == 0.0 {
        return Complex::new(base.powf(lambda.re), 0.0);
    }
    (lambda * base.ln()).exp()
}
