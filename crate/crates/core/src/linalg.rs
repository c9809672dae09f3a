//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Real;

pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

pub fn all_finite<T: Real>(m: &CMat<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_zero<T: Real>(m: &CMat<T>) -> bool {
    m.iter().all(|z| z.re == T::zero() && z.im == T::zero())
}

pub fn frobenius_sq<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part<T: Real>(a: &CMat<T>) -> CMat<T> {
    let half = Complex::new(T::lit(0.5), T::zero());
    (a + a.adjoint()) * half
}

pub fn trace_re<T: Real>(a: &CMat<T>) -> T {
    a.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
}

/// Eigen-decomposition of a Hermitian matrix: `A = V diag(s) V^H`.
pub fn eig_hermitian<T: Real>(a: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let eig = hermitian_part(a).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Tolerance used for Hermitian/PSD membership tests, relative to the
/// matrix scale.
fn psd_tol<T: Real>(a: &CMat<T>) -> T {
    let scale = frobenius_sq(a).sqrt().max(T::one());
    T::eps().sqrt() * scale
}

/// Checks that `q` is square, finite, Hermitian and positive semidefinite
/// up to round-off.
pub fn check_psd<T: Real>(q: &CMat<T>, what: &str) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(invalid(format!("{what} is not square")));
    }
    if !all_finite(q) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    let tol = psd_tol(q);
    let skew = frobenius_sq(&(q - q.adjoint())).sqrt();
    if skew > tol {
        return Err(invalid(format!("{what} is not Hermitian")));
    }
    if q.nrows() == 0 || is_zero(q) {
        return Ok(());
    }
    let (vals, _) = eig_hermitian(q);
    let min = vals.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    if min < -tol {
        return Err(invalid(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// `ln det(I + X)` for Hermitian PSD `X`, via Cholesky of `I + X`.
/// Negative round-off results are clamped to zero.
pub fn ln_det_identity_plus<T: Real>(x: &CMat<T>) -> T {
    let n = x.nrows();
    let a = CMat::<T>::identity(n, n) + hermitian_part(x);
    let value = match a.clone().cholesky() {
        Some(chol) => {
            let l = chol.l_dirty();
            let mut acc = T::zero();
            for i in 0..n {
                acc += l[(i, i)].re.ln();
            }
            acc + acc
        }
        None => {
            // I + X is always >= I in exact arithmetic; fall back on the
            // spectrum if round-off broke positivity.
            let (vals, _) = eig_hermitian(&a);
            vals.iter()
                .map(|&v| v.max(T::eps()).ln())
                .fold(T::zero(), |a, b| a + b)
        }
    };
    value.max(T::zero())
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Option<CMat<T>> {
    hermitian_part(a).cholesky().map(|c| c.solve(b))
}

/// `A B - B A`.
pub fn commutator<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a * b - b * a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn ln_det_matches_lu_determinant() {
        let h = CMat::<f64>::from_row_slice(2, 2, &[c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0), c(2.0, 0.0)]);
        let x = &h * h.adjoint();
        let lu = (CMat::<f64>::identity(2, 2) + &x).determinant();
        assert!((ln_det_identity_plus(&x) - lu.re.ln()).abs() < 1e-12);
        assert!(lu.im.abs() < 1e-12);
    }

    #[test]
    fn ln_det_of_zero_is_zero() {
        assert_eq!(ln_det_identity_plus(&CMat::<f64>::zeros(3, 3)), 0.0);
    }

    #[test]
    fn psd_check_rejects_indefinite_and_non_hermitian() {
        let neg = CMat::<f64>::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(check_psd(&neg, "q").is_err());
        let skew = CMat::<f64>::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(check_psd(&skew, "q").is_err());
        let ok = CMat::<f64>::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        assert!(check_psd(&ok, "q").is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let x = CMat::<f32>::from_diagonal(&CVec::from_vec(vec![Complex::new(1.0f32, 0.0), Complex::new(3.0, 0.0)]));
        assert!((ln_det_identity_plus(&x) - (8.0f32).ln()).abs() < 1e-5);
    }
}
