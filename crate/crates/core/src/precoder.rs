//! Per-user uplink covariance optimization for a fixed RIS configuration.
//!
//! Minimizes `V tr(Q) - τ (B_l - B_r) W log2 det(I + σ^{-2} H Q H^H)` over
//! `Q ⪰ 0`, `tr(Q) ≤ P_max`. Users whose local backlog does not exceed the
//! remote one (or whose channel is zero) stay silent; otherwise the optimum
//! is water-filling over the eigenmodes of `σ^{-2} H^H H` with weight
//! `w = τ W (B_l - B_r) / ln 2`.

use num_complex::Complex;

use crate::channel::{rate_unchecked, EffectiveChannel};
use crate::error::{invalid, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{log2_factor, Real};

#[derive(Debug, Clone, Copy)]
pub struct PrecoderInput<'a, T: Real> {
    pub channel: &'a EffectiveChannel<T>,
    pub backlog_local: T,
    pub backlog_remote: T,
    pub v: T,
    pub tau: T,
    pub bandwidth: T,
    pub noise_power: T,
    pub max_power: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceResult<T: Real> {
    pub covariance: CMat<T>,
    /// `tr(Q)` in W.
    pub tx_power: T,
    /// Powers on the channel eigenmodes, aligned with `mode_gains`.
    pub eigen_powers: Vec<T>,
    /// Eigenvalues of `σ^{-2} H^H H`.
    pub mode_gains: Vec<T>,
    /// Dual variable of the power budget, in the `1/(μ + V/w)` scaling.
    pub water_level_dual: T,
}

impl<T: Real> CovarianceResult<T> {
    fn silent(k: usize) -> Self {
        CovarianceResult {
            covariance: CMat::zeros(k, k),
            tx_power: T::zero(),
            eigen_powers: vec![T::zero(); k],
            mode_gains: vec![T::zero(); k],
            water_level_dual: T::zero(),
        }
    }
}

impl<T: Real> PrecoderInput<'_, T> {
    fn validate(&self) -> Result<()> {
        if !linalg::all_finite(self.channel.matrix()) {
            return Err(invalid("channel has non-finite entries"));
        }
        let finite_nonneg = |x: T| x.is_finite() && x >= T::zero();
        if !finite_nonneg(self.backlog_local) || !finite_nonneg(self.backlog_remote) {
            return Err(invalid("backlogs must be finite and nonnegative"));
        }
        if !finite_nonneg(self.v) {
            return Err(invalid("V must be finite and nonnegative"));
        }
        let pos = |x: T| x.is_finite() && x > T::zero();
        if !pos(self.tau) || !pos(self.bandwidth) || !pos(self.noise_power) || !pos(self.max_power) {
            return Err(invalid("tau, bandwidth, noise power and max power must be positive"));
        }
        Ok(())
    }

    /// Water-filling weight `w = τ W (B_l - B_r) / ln 2`.
    pub fn weight(&self) -> T {
        log2_factor::<T>() * self.tau * self.bandwidth * (self.backlog_local - self.backlog_remote)
    }
}

/// Per-user radio objective `V tr(Q) - τ (B_l - B_r) R(Q)`.
pub fn wf_objective<T: Real>(input: &PrecoderInput<'_, T>, q: &CMat<T>) -> Result<T> {
    input.validate()?;
    let k = input.channel.matrix().ncols();
    if q.shape() != (k, k) {
        return Err(invalid("covariance has wrong dimensions"));
    }
    linalg::check_psd(q, "transmit covariance")?;
    let rate = rate_unchecked(input.channel.matrix(), q, input.bandwidth, input.noise_power);
    Ok(input.v * linalg::trace_re(q) - input.tau * (input.backlog_local - input.backlog_remote) * rate)
}

/// Solves the per-user covariance subproblem to global optimality.
pub fn optimize_covariance<T: Real>(input: &PrecoderInput<'_, T>) -> Result<CovarianceResult<T>> {
    input.validate()?;
    let h = input.channel.matrix();
    let k = h.ncols();
    if input.backlog_local <= input.backlog_remote || input.channel.is_zero() {
        return Ok(CovarianceResult::silent(k));
    }
    let inv_s2 = Complex::new(T::one() / input.noise_power, T::zero());
    let gram = h.adjoint() * h * inv_s2;
    let (gains, vectors) = linalg::eig_hermitian(&gram);
    let top = gains.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let floor = top * T::eps() * T::from_usize(k.max(1)).unwrap();
    if !(top > T::zero()) {
        return Ok(CovarianceResult::silent(k));
    }
    let usable: Vec<bool> = gains.iter().map(|&g| g > floor).collect();

    let w = input.weight();
    let p_max = input.max_power;
    // `level` = 1/(μ + V/w); mode i gets max(0, level - 1/g_i).
    let alloc = |level: T| -> Vec<T> {
        gains
            .iter()
            .zip(&usable)
            .map(|(&g, &ok)| if ok { (level - T::one() / g).max(T::zero()) } else { T::zero() })
            .collect()
    };
    let v_over_w = input.v / w;

    let unconstrained = if input.v > T::zero() { Some(alloc(w / input.v)) } else { None };
    let (powers, dual) = match unconstrained {
        Some(p) if p.iter().fold(T::zero(), |a, &b| a + b) <= p_max => (p, T::zero()),
        _ => {
            let level = budget_level(&gains, &usable, p_max, v_over_w);
            let dual = (T::one() / level - v_over_w).max(T::zero());
            (alloc(level), dual)
        }
    };

    let mut covariance = CMat::<T>::zeros(k, k);
    for (i, &p) in powers.iter().enumerate() {
        if p > T::zero() {
            let u = vectors.column(i);
            covariance += u * u.adjoint() * Complex::new(p, T::zero());
        }
    }
    let covariance = linalg::hermitian_part(&covariance);
    let tx_power = powers.iter().fold(T::zero(), |a, &b| a + b);
    Ok(CovarianceResult {
        covariance,
        tx_power,
        eigen_powers: powers,
        mode_gains: gains,
        water_level_dual: dual,
    })
}

/// Water level that spends exactly `p_max`: sweep the modes in decreasing
/// gain order, keeping the first `i` active, until the level lies between
/// `1/g_(i)` and `1/g_(i+1)`. Tied gains are swept as one group.
fn budget_level<T: Real>(gains: &[T], usable: &[bool], p_max: T, v_over_w: T) -> T {
    let mut order: Vec<T> = gains.iter().zip(usable).filter(|(_, &ok)| ok).map(|(&g, _)| g).collect();
    // stable sort, decreasing
    order.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut inv_sum = T::zero();
    let mut level = T::zero();
    for i in 0..order.len() {
        inv_sum += T::one() / order[i];
        let count = T::from_usize(i + 1).unwrap();
        level = (inv_sum + p_max) / count;
        let mu = T::one() / level - v_over_w;
        let covers_current = level - T::one() / order[i] >= T::zero();
        let excludes_next = match order.get(i + 1) {
            Some(&g) => level - T::one() / g <= T::zero(),
            None => true,
        };
        if mu >= T::zero() && covers_current && excludes_next {
            return level;
        }
    }
    level
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn diag_channel(g: &[f64]) -> EffectiveChannel<f64> {
        EffectiveChannel(CMat::from_diagonal(&CVec::from_iterator(g.len(), g.iter().map(|&x| c(x.sqrt())))))
    }

    fn input<'a>(h: &'a EffectiveChannel<f64>, bl: f64, br: f64, v: f64, pmax: f64) -> PrecoderInput<'a, f64> {
        PrecoderInput {
            channel: h,
            backlog_local: bl,
            backlog_remote: br,
            v,
            tau: 1.0,
            bandwidth: std::f64::consts::LN_2,
            noise_power: 1.0,
            max_power: pmax,
        }
    }

    #[test]
    fn silent_when_remote_backlog_dominates() {
        let h = diag_channel(&[4.0, 1.0]);
        let r = optimize_covariance(&input(&h, 5.0, 5.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.covariance, CMat::zeros(2, 2));
        let r = optimize_covariance(&input(&h, 1.0, 5.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.tx_power, 0.0);
    }

    #[test]
    fn silent_when_channel_blocked() {
        let h = EffectiveChannel(CMat::<f64>::zeros(2, 2));
        let r = optimize_covariance(&input(&h, 100.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.covariance, CMat::zeros(2, 2));
    }

    #[test]
    fn unconstrained_levels() {
        // w = 10, V = 1: level 10, powers 10 - 1/4 and 10 - 1
        let h = diag_channel(&[4.0, 1.0]);
        let r = optimize_covariance(&input(&h, 10.0, 0.0, 1.0, 100.0)).unwrap();
        assert_eq!(r.water_level_dual, 0.0);
        assert!((r.tx_power - (9.75 + 9.0)).abs() < 1e-9);
    }

    #[test]
    fn budget_binds() {
        // level (1/4 + 1 + 1)/2 = 1.125 -> powers 0.875, 0.125
        let h = diag_channel(&[4.0, 1.0]);
        let r = optimize_covariance(&input(&h, 10.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((r.tx_power - 1.0).abs() < 1e-12);
        let mut p = r.eigen_powers.clone();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((p[0] - 0.125).abs() < 1e-12 && (p[1] - 0.875).abs() < 1e-12);
        assert!((r.water_level_dual - (1.0 / 1.125 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn only_strong_mode_active() {
        // level with one mode: 1/4 + 0.5 = 0.75 < 1 = 1/g2, so mode 2 stays off
        let h = diag_channel(&[4.0, 1.0]);
        let r = optimize_covariance(&input(&h, 10.0, 0.0, 1.0, 0.5)).unwrap();
        let mut p = r.eigen_powers.clone();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tied_gains_share_power() {
        let h = diag_channel(&[2.0, 2.0, 2.0]);
        let r = optimize_covariance(&input(&h, 10.0, 0.0, 1.0, 0.3)).unwrap();
        for p in &r.eigen_powers {
            assert!((p - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_v_spends_full_budget() {
        let h = diag_channel(&[4.0, 1.0]);
        let r = optimize_covariance(&input(&h, 10.0, 0.0, 0.0, 2.0)).unwrap();
        assert!((r.tx_power - 2.0).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let h = diag_channel(&[4.0, 1.0]);
        let inp = input(&h, 3.0, 3.0, 2.0, 1.0);
        assert_eq!(wf_objective(&inp, &CMat::zeros(2, 2)).unwrap(), 0.0);
        let q = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5), c(0.25)]));
        assert!((wf_objective(&inp, &q).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_channel() {
        let h = EffectiveChannel(CMat::from_element(1, 1, c(f64::NAN)));
        assert!(optimize_covariance(&input(&h, 1.0, 0.0, 1.0, 1.0)).is_err());
    }
}
