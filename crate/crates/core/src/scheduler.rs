//! Edge CPU frequency allocation.
//!
//! Maximizes `Σ_k B_r,k f_k / J_k` subject to
//! `0 ≤ f_k ≤ min(f_max, B_r,k J_k / τ)` and `Σ_k f_k ≤ f_max`. The
//! objective is linear with one coupling constraint, so filling users in
//! decreasing `B_r,k / J_k` order is optimal.

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeAllocation<T: Real> {
    /// Cycles/s per user.
    pub frequencies: Vec<T>,
}

impl<T: Real> ComputeAllocation<T> {
    pub fn total(&self) -> T {
        self.frequencies.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// Per-user frequency cap `min(f_max, B_r J / τ)`.
pub fn frequency_cap<T: Real>(backlog_remote: T, cycles_per_bit: T, f_max: T, tau: T) -> T {
    f_max.min(backlog_remote * cycles_per_bit / tau)
}

pub fn allocate_cpu<T: Real>(
    backlog_remote: &[T],
    cycles_per_bit: &[T],
    f_max: T,
    tau: T,
) -> Result<ComputeAllocation<T>> {
    if backlog_remote.len() != cycles_per_bit.len() {
        return Err(invalid("backlog and cycles-per-bit lists differ in length"));
    }
    if !(f_max > T::zero() && f_max.is_finite()) || !(tau > T::zero()) {
        return Err(invalid("f_max and tau must be positive"));
    }
    if backlog_remote.iter().any(|&b| !(b >= T::zero() && b.is_finite())) {
        return Err(invalid("remote backlogs must be finite and nonnegative"));
    }
    if cycles_per_bit.iter().any(|&j| !(j > T::zero() && j.is_finite())) {
        return Err(invalid("cycles per bit must be positive"));
    }

    let n = backlog_remote.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal ratios keep index order
    order.sort_by(|&a, &b| {
        let ra = backlog_remote[a] / cycles_per_bit[a];
        let rb = backlog_remote[b] / cycles_per_bit[b];
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut frequencies = vec![T::zero(); n];
    let mut remaining = f_max;
    let mut last = None;
    for &k in &order {
        if remaining <= T::zero() {
            break;
        }
        let f = frequency_cap(backlog_remote[k], cycles_per_bit[k], f_max, tau).min(remaining);
        if f > T::zero() {
            frequencies[k] = f;
            remaining -= f;
            last = Some(k);
        }
    }

    // Floating-point sums may overshoot f_max by an ulp; trim the last grant.
    if let Some(k) = last {
        let sum = |f: &[T]| f.iter().fold(T::zero(), |a, &b| a + b);
        let mut guard = 0;
        while sum(&frequencies) > f_max && guard < 64 {
            let excess = sum(&frequencies) - f_max;
            let shrink = excess.max(frequencies[k] * T::eps());
            frequencies[k] = (frequencies[k] - shrink).max(T::zero());
            guard += 1;
        }
    }
    Ok(ComputeAllocation { frequencies })
}

/// Objective `Σ_k B_r,k f_k / J_k`.
pub fn cpu_objective<T: Real>(backlog_remote: &[T], cycles_per_bit: &[T], alloc: &ComputeAllocation<T>) -> T {
    backlog_remote
        .iter()
        .zip(cycles_per_bit)
        .zip(&alloc.frequencies)
        .fold(T::zero(), |acc, ((&b, &j), &f)| acc + b * f / j)
}
