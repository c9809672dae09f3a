//! Communication/computation queue recursions, Little's-law delay and
//! drift-plus-penalty diagnostics.

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::Real;
use crate::sim::SlotRecord;

/// Backlogs in bits: uplink buffer `B_l` and edge computation buffer `B_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState<T: Real> {
    pub local: Vec<T>,
    pub remote: Vec<T>,
}

impl<T: Real> QueueState<T> {
    pub fn empty(users: usize) -> Self {
        QueueState { local: vec![T::zero(); users], remote: vec![T::zero(); users] }
    }

    pub fn num_users(&self) -> usize {
        self.local.len()
    }

    /// Total backlog `Σ_k B_l,k + B_r,k`.
    pub fn total(&self) -> T {
        self.local.iter().chain(&self.remote).fold(T::zero(), |a, &b| a + b)
    }

    /// Advances every user by one slot: the local queue first, then the
    /// remote queue fed by the bits that actually left the local queue.
    /// Returns the per-user transferred amounts.
    pub fn advance(&mut self, rates: &[T], arrivals: &[T], frequencies: &[T], cycles_per_bit: &[T], tau: T) -> Result<Vec<T>> {
        let n = self.num_users();
        if [rates.len(), arrivals.len(), frequencies.len(), cycles_per_bit.len()].iter().any(|&l| l != n) {
            return Err(invalid("per-user vectors must match the number of users"));
        }
        let mut moved = Vec::with_capacity(n);
        for k in 0..n {
            let (local, transferred) = update_local_queue(self.local[k], rates[k], arrivals[k], tau);
            self.local[k] = local;
            self.remote[k] = update_remote_queue(self.remote[k], frequencies[k], cycles_per_bit[k], transferred, tau);
            moved.push(transferred);
        }
        Ok(moved)
    }
}

/// `B_l ← max(0, B_l - τR) + A`; also returns `min(B_l, τR)`.
pub fn update_local_queue<T: Real>(backlog: T, rate: T, arrivals: T, tau: T) -> (T, T) {
    let served = tau * rate;
    let transferred = backlog.min(served);
    ((backlog - served).max(T::zero()) + arrivals, transferred)
}

/// `B_r ← max(0, B_r - τ f / J) + transferred`.
pub fn update_remote_queue<T: Real>(backlog: T, frequency: T, cycles_per_bit: T, transferred: T, tau: T) -> T {
    (backlog - tau * frequency / cycles_per_bit).max(T::zero()) + transferred
}

/// `½ Σ_k (B_l,k² + B_r,k²)`.
pub fn lyapunov<T: Real>(state: &QueueState<T>) -> T {
    let sq = state.local.iter().chain(&state.remote).fold(T::zero(), |a, &b| a + b * b);
    sq * T::lit(0.5)
}

/// Per-user action-dependent terms of the drift-plus-penalty bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DppDiagnostics<T: Real> {
    pub lyapunov: T,
    pub dpp_objective: T,
    pub per_user: Vec<T>,
}

/// `Σ_k [(B_r - B_l) τ R + A B_l - τ B_r f / J + V tr(Q)]`, the bound
/// without its constant and without expectation.
#[allow(clippy::too_many_arguments)]
pub fn dpp_objective<T: Real>(
    state: &QueueState<T>,
    rates: &[T],
    arrivals: &[T],
    frequencies: &[T],
    cycles_per_bit: &[T],
    covariances: &[CMat<T>],
    v: T,
    tau: T,
) -> Result<DppDiagnostics<T>> {
    let n = state.num_users();
    if [rates.len(), arrivals.len(), frequencies.len(), cycles_per_bit.len(), covariances.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(invalid("per-user vectors must match the number of users"));
    }
    let per_user: Vec<T> = (0..n)
        .map(|k| {
            let (bl, br) = (state.local[k], state.remote[k]);
            (br - bl) * tau * rates[k] + arrivals[k] * bl - tau * br * frequencies[k] / cycles_per_bit[k]
                + v * linalg::trace_re(&covariances[k])
        })
        .collect();
    Ok(DppDiagnostics {
        lyapunov: lyapunov(state),
        dpp_objective: per_user.iter().fold(T::zero(), |a, &b| a + b),
        per_user,
    })
}

/// Little's law per user: `τ (mean B_l + mean B_r) / mean A`, averaged over
/// the given slots.
pub fn average_delay(rows: &[SlotRecord], tau: f64) -> Result<Vec<f64>> {
    let first = rows.first().ok_or_else(|| invalid("delay needs at least one slot"))?;
    let n = first.local.len();
    let t = rows.len() as f64;
    (0..n)
        .map(|k| {
            let backlog: f64 = rows.iter().map(|r| r.local[k] + r.remote[k]).sum::<f64>() / t;
            let arrivals: f64 = rows.iter().map(|r| r.arrivals[k]).sum::<f64>() / t;
            if arrivals > 0.0 {
                Ok(tau * backlog / arrivals)
            } else {
                Err(Error::UndefinedDelay { user: k })
            }
        })
        .collect()
}
