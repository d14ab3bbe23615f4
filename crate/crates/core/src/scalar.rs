//! Scalar abstraction shared by the two-level algebra.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] type.
pub type ComplexScalar<T> = Complex<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// `i·z`, exact.
#[inline]
pub fn times_i<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(-z.im, z.re)
}

#[inline]
pub fn is_finite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Principal square root with `Re ≥ 0`; on the imaginary axis the root with `Im ≥ 0` wins.
pub fn principal_sqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    let mut r = z.sqrt();
    if r.re < T::zero() || (r.re == T::zero() && r.im < T::zero()) {
        r = -r;
    }
    // normalise signed zeros so equal roots compare bitwise
    if r.re == T::zero() {
        r.re = T::zero();
    }
    if r.im == T::zero() {
        r.im = T::zero();
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_branch_on_negative_axis() {
        let r = principal_sqrt(Complex::new(-4.0f64, -0.0));
        assert_eq!(r, Complex::new(0.0, 2.0));
        let r = principal_sqrt(Complex::new(-4.0f64, 0.0));
        assert_eq!(r, Complex::new(0.0, 2.0));
    }

    #[test]
    fn sqrt_branch_general() {
        for &(re, im) in &[(1.0f64, 2.0), (-3.0, -1.0), (0.5, -7.0), (-2.0, 3.0)] {
            let z = Complex::new(re, im);
            let r = principal_sqrt(z);
            assert!(r.re >= 0.0);
            assert!((r * r - z).norm() < 1e-14 * z.norm());
        }
    }

    #[test]
    fn works_for_f32() {
        let r = principal_sqrt(Complex::new(-9.0f32, 0.0));
        assert_eq!(r, Complex::new(0.0f32, 3.0));
    }
}
