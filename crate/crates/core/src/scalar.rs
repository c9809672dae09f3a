//! Scalar abstraction shared by the numerical kernels.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the kernels are generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon.
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts bits-per-nat: rates are measured in bits, the analytic
/// derivatives of `ln det` carry this factor.
pub fn log2_factor<T: Real>() -> T {
    T::one() / T::ln_2()
}

/// `e^{jθ}`.
pub fn unit<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

pub fn modulus<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Phase of `z` wrapped into `[0, 2π)`.
pub fn phase<T: Real>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a < T::zero() {
        a + T::two_pi()
    } else {
        a
    }
}
