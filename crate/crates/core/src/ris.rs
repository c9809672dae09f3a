//! RIS reflection vector, projected-gradient update and phase baselines.

use nalgebra::DVector;
use num_complex::Complex;
use rand::Rng;

use crate::channel::{compose_weighted, rate_unchecked, ChannelTriple, EffectiveChannel};
use crate::error::{dims, invalid, Result};
use crate::linalg::{self, CMat, CVec};
use crate::scalar::{log2_factor, modulus, phase, unit, Real};

/// Unit-modulus reflection coefficients `r_i = e^{jθ_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfig<T: Real> {
    reflection: CVec<T>,
}

impl<T: Real> RisConfig<T> {
    /// All phases zero.
    pub fn all_ones(m: usize) -> Self {
        RisConfig { reflection: CVec::from_element(m, Complex::new(T::one(), T::zero())) }
    }

    pub fn from_phases(phases: &[T]) -> Self {
        RisConfig { reflection: DVector::from_iterator(phases.len(), phases.iter().map(|&t| unit(t))) }
    }

    pub fn len(&self) -> usize {
        self.reflection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflection.is_empty()
    }

    pub fn reflection(&self) -> &CVec<T> {
        &self.reflection
    }

    /// Phases in `[0, 2π)`.
    pub fn phases(&self) -> Vec<T> {
        self.reflection.iter().map(|&z| phase(z)).collect()
    }
}

/// Maps every entry onto the unit circle; exact zeros go to `1`.
pub fn project_unit_circle<T: Real>(r: &CVec<T>) -> RisConfig<T> {
    let reflection = r.map(|z| {
        let m = modulus(z);
        if m == T::zero() || !m.is_finite() {
            Complex::new(T::one(), T::zero())
        } else {
            let p = Complex::new(z.re / m, z.im / m);
            // renormalize once more to absorb the rounding of the division
            let m2 = modulus(p);
            Complex::new(p.re / m2, p.im / m2)
        }
    });
    RisConfig { reflection }
}

/// `P(r - ρ ∇)`.
pub fn pgm_step<T: Real>(r: &RisConfig<T>, grad: &CVec<T>, rho: T) -> Result<RisConfig<T>> {
    if grad.len() != r.len() {
        return Err(dims("RIS gradient", (r.len(), 1), (grad.len(), 1)));
    }
    if !(rho > T::zero()) {
        return Err(invalid("step size must be positive"));
    }
    let step = Complex::new(rho, T::zero());
    Ok(project_unit_circle(&(r.reflection() - grad * step)))
}

/// Snaps each phase to the nearest of the `2^bits` uniform levels, ties
/// going to the lower level.
pub fn quantize_phases<T: Real>(r: &RisConfig<T>, bits: u32) -> Result<RisConfig<T>> {
    if bits == 0 || bits > 30 {
        return Err(invalid("phase bits must lie in 1..=30"));
    }
    let levels = 1u64 << bits;
    let step = T::two_pi() / T::from_u64(levels).unwrap();
    let half = T::lit(0.5);
    let quantized: Vec<T> = r
        .phases()
        .into_iter()
        .map(|theta| {
            let x = theta / step;
            let lower = x.floor();
            let idx = if x - lower > half { lower + T::one() } else { lower };
            let idx = idx.to_u64().unwrap_or(0) % levels;
            T::from_u64(idx).unwrap() * step
        })
        .collect();
    Ok(RisConfig::from_phases(&quantized))
}

/// I.i.d. uniform phases on `[0, 2π)`.
pub fn random_phases<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> RisConfig<T> {
    let phases: Vec<T> = (0..m)
        .map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    RisConfig::from_phases(&phases)
}

/// Per-user view of the radio subproblem.
///
/// `direct_gain`/`indirect_gain` are the link multipliers the optimizer
/// sees: `1 - β` under instantaneous knowledge, `1 - p` under statistical
/// knowledge, and `indirect_gain = 0` without a RIS.
#[derive(Debug, Clone, Copy)]
pub struct RisUserTerm<'a, T: Real> {
    pub triple: &'a ChannelTriple<T>,
    pub direct_gain: T,
    pub indirect_gain: T,
    pub backlog_local: T,
    pub backlog_remote: T,
    pub bandwidth: T,
    pub noise_power: T,
}

impl<T: Real> RisUserTerm<'_, T> {
    pub fn compose(&self, ris: Option<&RisConfig<T>>) -> Result<EffectiveChannel<T>> {
        compose_weighted(self.triple, ris, self.direct_gain, self.indirect_gain)
    }

    pub fn backlog_diff(&self) -> T {
        self.backlog_local - self.backlog_remote
    }
}

pub fn compose_all<T: Real>(
    terms: &[RisUserTerm<'_, T>],
    ris: Option<&RisConfig<T>>,
) -> Result<Vec<EffectiveChannel<T>>> {
    terms.iter().map(|t| t.compose(ris)).collect()
}

/// Radio subproblem objective
/// `Σ_k V tr(Q_k) - τ (B_l,k - B_r,k) R_k(r, Q_k)`.
pub fn radio_objective<T: Real>(
    terms: &[RisUserTerm<'_, T>],
    ris: Option<&RisConfig<T>>,
    covariances: &[CMat<T>],
    v: T,
    tau: T,
) -> Result<T> {
    if covariances.len() != terms.len() {
        return Err(dims("covariance list", (terms.len(), 1), (covariances.len(), 1)));
    }
    let mut total = T::zero();
    for (term, q) in terms.iter().zip(covariances) {
        let h = term.compose(ris)?;
        let rate = rate_unchecked(h.matrix(), q, term.bandwidth, term.noise_power);
        total += v * linalg::trace_re(q) - tau * term.backlog_diff() * rate;
    }
    Ok(total)
}

/// Gradient of [`radio_objective`] with respect to the RIS vector, i.e.
/// `∂f/∂r*`:
///
/// `-τ c Σ_k b_k W_k (B_l,k - B_r,k) diag(H_ra^H (I + Z Q Z^H)^{-1} Z Q H̄_r^H)`
///
/// with `Z = H_k/σ_k`, `H̄_r = H_r,k/σ_k`, `c = 1/ln 2` and `b_k` the
/// indirect link multiplier. Users are accumulated in index order.
pub fn gradient_wrt_ris<T: Real>(
    terms: &[RisUserTerm<'_, T>],
    effective: &[EffectiveChannel<T>],
    covariances: &[CMat<T>],
    tau: T,
) -> Result<CVec<T>> {
    if effective.len() != terms.len() || covariances.len() != terms.len() {
        return Err(invalid("gradient inputs must have one entry per user"));
    }
    let m = terms.first().map(|t| t.triple.ris_elements()).unwrap_or(0);
    let mut grad = CVec::<T>::zeros(m);
    for ((term, h), q) in terms.iter().zip(effective).zip(covariances) {
        let weight = term.backlog_diff();
        if weight == T::zero() || term.indirect_gain == T::zero() || linalg::is_zero(q) {
            continue;
        }
        let t = term.triple;
        let (na, k) = (t.ap_antennas(), t.user_antennas());
        if h.matrix().shape() != (na, k) || q.shape() != (k, k) || t.ris_elements() != m {
            return Err(invalid("gradient inputs have inconsistent dimensions"));
        }
        let inv_s2 = Complex::new(T::one() / term.noise_power, T::zero());
        let hq = h.matrix() * q;
        let a = CMat::<T>::identity(na, na) + &hq * h.matrix().adjoint() * inv_s2;
        let rhs = &hq * t.user_to_ris.adjoint() * inv_s2;
        let x = linalg::solve_hpd(&a, &rhs).ok_or_else(|| invalid("I + ZQZ^H not positive definite"))?;
        let scale = Complex::new(-tau * log2_factor::<T>() * term.bandwidth * weight * term.indirect_gain, T::zero());
        for i in 0..m {
            let mut d = Complex::new(T::zero(), T::zero());
            for n in 0..na {
                d += t.ris_to_ap[(n, i)].conj() * x[(n, i)];
            }
            grad[i] += d * scale;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn projection_examples() {
        let v = CVec::from_vec(vec![c(2.0, 0.0), c(3.0, 4.0), c(0.0, 0.0), c(0.6, 0.8)]);
        let p = project_unit_circle(&v);
        assert_eq!(p.reflection()[0], c(1.0, 0.0));
        assert!((p.reflection()[1] - c(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(p.reflection()[2], c(1.0, 0.0));
        assert!((p.reflection()[3] - c(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn pgm_step_examples() {
        let r = RisConfig::<f64>::all_ones(1);
        let same = pgm_step(&r, &CVec::zeros(1), 1.0).unwrap();
        assert_eq!(same, r);
        let moved = pgm_step(&r, &CVec::from_element(1, c(0.0, -1.0)), 1.0).unwrap();
        assert!((moved.phases()[0] - FRAC_PI_4).abs() < 1e-15);
        assert!(pgm_step(&r, &CVec::zeros(2), 1.0).is_err());
    }

    #[test]
    fn quantization_examples() {
        let r = RisConfig::from_phases(&[0.0, PI / 3.0, FRAC_PI_4, 2.0 * PI - 0.1]);
        let q = quantize_phases(&r, 2).unwrap().phases();
        assert!(q[0].abs() < 1e-12);
        assert!((q[1] - FRAC_PI_2).abs() < 1e-12);
        // tie goes to the lower level
        assert!(q[2].abs() < 1e-12);
        // wraps to level 0
        assert!(q[3].abs() < 1e-12 || (q[3] - 2.0 * PI).abs() < 1e-12);
        assert!(quantize_phases(&r, 0).is_err());
    }

    #[test]
    fn random_phases_are_unit_and_deterministic() {
        let a: RisConfig<f64> = random_phases(16, &mut ChaCha8Rng::seed_from_u64(9));
        let b: RisConfig<f64> = random_phases(16, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.reflection().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn random_phase_mean_concentrates() {
        let r: RisConfig<f64> = random_phases(100_000, &mut ChaCha8Rng::seed_from_u64(10));
        let mean = r.reflection().iter().sum::<Complex<f64>>() / 100_000.0;
        assert!(mean.norm() < 0.02);
    }

    #[test]
    fn single_precision_projection() {
        let v = CVec::from_vec(vec![Complex::new(3.0f32, 4.0)]);
        let p = project_unit_circle(&v);
        assert!((p.reflection()[0].norm() - 1.0).abs() < 1e-6);
    }
}
