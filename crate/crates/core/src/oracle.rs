//! Independent reference computations used by the self-test and the test
//! suites. Nothing here is on the simulation path: every routine trades
//! speed for a derivation that shares as little code as possible with the
//! optimized kernels.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelTriple;
use crate::linalg::{CMat, CVec};
use crate::ris::{RisConfig, RisUserTerm};

type C64 = Complex<f64>;

pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Random PSD matrix with trace `fraction · p_max`.
pub fn random_feasible_covariance<R: Rng + ?Sized>(k: usize, p_max: f64, fraction: f64, rng: &mut R) -> CMat<f64> {
    let rank = rng.random_range(1..=k);
    let g = complex_gaussian(k, rank, rng);
    let q = &g * g.adjoint();
    let tr: f64 = (0..k).map(|i| q[(i, i)].re).sum();
    let q = q * C64::new(fraction * p_max / tr, 0.0);
    (&q + q.adjoint()) * C64::new(0.5, 0.0)
}

/// Small radio instance with owned channels; borrow it as RIS terms with
/// [`RadioInstance::terms`].
#[derive(Debug, Clone)]
pub struct RadioInstance {
    pub triples: Vec<ChannelTriple<f64>>,
    pub direct_gains: Vec<f64>,
    pub indirect_gains: Vec<f64>,
    pub backlog_local: Vec<f64>,
    pub backlog_remote: Vec<f64>,
    pub bandwidth: f64,
    pub noise_power: f64,
    pub covariances: Vec<CMat<f64>>,
    pub ris: RisConfig<f64>,
    pub v: f64,
    pub tau: f64,
}

impl RadioInstance {
    /// Unit-scale instance: `N ≤ max_users`, `K, N_a ≤ max_ant`,
    /// `M ≤ max_ris`, with random blocking multipliers in {0, ½, 1} and a
    /// positive backlog difference for at least one user.
    pub fn random<R: Rng + ?Sized>(max_users: usize, max_ant: usize, max_ris: usize, rng: &mut R) -> Self {
        let n = rng.random_range(1..=max_users);
        let k = rng.random_range(1..=max_ant);
        let na = rng.random_range(1..=max_ant);
        let m = rng.random_range(1..=max_ris);
        let ris_to_ap = complex_gaussian(na, m, rng);
        let mut inst = RadioInstance {
            triples: Vec::with_capacity(n),
            direct_gains: Vec::with_capacity(n),
            indirect_gains: Vec::with_capacity(n),
            backlog_local: Vec::with_capacity(n),
            backlog_remote: Vec::with_capacity(n),
            bandwidth: rng.random_range(0.5..2.0),
            noise_power: rng.random_range(0.5..2.0),
            covariances: Vec::with_capacity(n),
            ris: crate::ris::random_phases(m, rng),
            v: rng.random_range(0.0..1.0),
            tau: rng.random_range(0.5..1.5),
        };
        let levels = [0.0, 0.5, 1.0];
        for user in 0..n {
            inst.triples.push(ChannelTriple {
                direct: complex_gaussian(na, k, rng),
                user_to_ris: complex_gaussian(m, k, rng),
                ris_to_ap: ris_to_ap.clone(),
            });
            inst.direct_gains.push(levels[rng.random_range(0..3)]);
            // keep at least one indirect path so the gradient is not trivially zero
            let b = if user == 0 { 1.0 } else { levels[rng.random_range(0..3)] };
            inst.indirect_gains.push(b);
            let bl = rng.random_range(0.0..4.0);
            let br = if user == 0 { 0.0 } else { rng.random_range(0.0..4.0) };
            inst.backlog_local.push(bl + if user == 0 { 1.0 } else { 0.0 });
            inst.backlog_remote.push(br);
            inst.covariances.push(random_feasible_covariance(k, 1.0, rng.random_range(0.2..1.0), rng));
        }
        inst
    }

    pub fn terms(&self) -> Vec<RisUserTerm<'_, f64>> {
        (0..self.triples.len())
            .map(|k| RisUserTerm {
                triple: &self.triples[k],
                direct_gain: self.direct_gains[k],
                indirect_gain: self.indirect_gains[k],
                backlog_local: self.backlog_local[k],
                backlog_remote: self.backlog_remote[k],
                bandwidth: self.bandwidth,
                noise_power: self.noise_power,
            })
            .collect()
    }
}

/// Radio objective at an arbitrary (not necessarily unit-modulus) complex
/// vector `r`, with the channel composed entry by entry and the log-det
/// taken from an LU determinant.
pub fn objective_at(inst: &RadioInstance, r: &CVec<f64>) -> f64 {
    let mut total = 0.0;
    for k in 0..inst.triples.len() {
        let t = &inst.triples[k];
        let (na, kk, m) = (t.direct.nrows(), t.direct.ncols(), t.user_to_ris.nrows());
        let h = CMat::from_fn(na, kk, |a, u| {
            let mut z = t.direct[(a, u)] * inst.direct_gains[k];
            for i in 0..m {
                z += t.ris_to_ap[(a, i)] * r[i] * t.user_to_ris[(i, u)] * inst.indirect_gains[k];
            }
            z
        });
        let q = &inst.covariances[k];
        let x = CMat::identity(na, na) + &h * q * h.adjoint() / C64::new(inst.noise_power, 0.0);
        let det = x.lu().determinant();
        let rate = inst.bandwidth * det.norm().ln() / std::f64::consts::LN_2;
        let tr: f64 = (0..kk).map(|i| q[(i, i)].re).sum();
        total += inst.v * tr - inst.tau * (inst.backlog_local[k] - inst.backlog_remote[k]) * rate;
    }
    total
}

/// Central-difference Wirtinger gradient `∂f/∂r* = ½ (∂f/∂x + i ∂f/∂y)`.
pub fn finite_difference_gradient(inst: &RadioInstance, r: &CVec<f64>, step: f64) -> CVec<f64> {
    let m = r.len();
    CVec::from_fn(m, |i, _| {
        let probe = |dz: C64| {
            let mut plus = r.clone();
            let mut minus = r.clone();
            plus[i] += dz;
            minus[i] -= dz;
            (objective_at(inst, &plus) - objective_at(inst, &minus)) / (2.0 * step)
        };
        let dx = probe(C64::new(step, 0.0));
        let dy = probe(C64::new(0.0, step));
        C64::new(0.5 * dx, 0.5 * dy)
    })
}

/// `Re⟨a, b⟩ / (‖a‖ ‖b‖)`; 1 when both are zero, 0 when only one is.
pub fn cosine_similarity(a: &CVec<f64>, b: &CVec<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dotc(b).re / (na * nb)
}

/// Eigenvalues of a Hermitian matrix via its real symmetric embedding
/// `[[X, -Y], [Y, X]]`, whose spectrum repeats each eigenvalue twice.
pub fn hermitian_eigenvalues(a: &CMat<f64>) -> Vec<f64> {
    let n = a.nrows();
    let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(big).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev.into_iter().step_by(2).collect()
}

/// Reference solution of the per-user covariance problem, expressed on
/// the channel eigenmodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFillingReference {
    pub mode_gains: Vec<f64>,
    pub powers: Vec<f64>,
    pub objective: f64,
}

/// Minimizes `V Σ p_i - w Σ ln(1 + g_i p_i)` over `p ≥ 0`, `Σ p ≤ P` by
/// bisection on the water level, with `g` the eigenvalues of
/// `H^H H / σ²` and `w = τ W (B_l - B_r) / ln 2`.
#[allow(clippy::too_many_arguments)]
pub fn water_filling_reference(h: &CMat<f64>, noise_power: f64, bl: f64, br: f64, v: f64, tau: f64, bandwidth: f64, p_max: f64) -> WaterFillingReference {
    let gram = h.adjoint() * h / C64::new(noise_power, 0.0);
    let gains: Vec<f64> = hermitian_eigenvalues(&gram).into_iter().map(|g| g.max(0.0)).collect();
    let w = tau * bandwidth * (bl - br) / std::f64::consts::LN_2;
    let objective = |p: &[f64]| -> f64 {
        gains.iter().zip(p).map(|(&g, &x)| v * x - w * (g * x).ln_1p()).sum()
    };
    let top = gains.iter().copied().fold(0.0, f64::max);
    if w <= 0.0 || top <= 0.0 {
        let powers = vec![0.0; gains.len()];
        return WaterFillingReference { objective: objective(&powers), mode_gains: gains, powers };
    }
    let floor = top * 1e-12;
    let fill = |level: f64| -> Vec<f64> {
        gains.iter().map(|&g| if g > floor { (level - 1.0 / g).max(0.0) } else { 0.0 }).collect()
    };
    let spent = |level: f64| fill(level).iter().sum::<f64>();
    let level = if v > 0.0 && spent(w / v) <= p_max {
        w / v
    } else {
        let (mut lo, mut hi) = (0.0, p_max + 1.0 / top);
        while spent(hi) < p_max {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spent(mid) > p_max {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };
    let powers = fill(level);
    WaterFillingReference { objective: objective(&powers), mode_gains: gains, powers }
}

/// KKT residuals of a candidate covariance, all normalized by the
/// objective scale `w · max g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖Λ Q‖` with `Λ = ∇f(Q) + μ I`.
    pub stationarity: f64,
    /// Most negative eigenvalue of `Λ` (dual feasibility), as a positive number.
    pub dual_infeasibility: f64,
    /// `|μ (P - tr Q)|`.
    pub slackness: f64,
}

/// Residuals for `Q` with multiplier `mu` of the power constraint, for
/// `f(Q) = V tr Q - w ln det(I + H Q H^H / σ²)`.
#[allow(clippy::too_many_arguments)]
pub fn kkt_residuals(h: &CMat<f64>, q: &CMat<f64>, mu: f64, noise_power: f64, bl: f64, br: f64, v: f64, tau: f64, bandwidth: f64, p_max: f64) -> KktResiduals {
    let k = q.nrows();
    let na = h.nrows();
    let w = tau * bandwidth * (bl - br) / std::f64::consts::LN_2;
    let hs = h / C64::new(noise_power.sqrt(), 0.0);
    let inner = (CMat::identity(na, na) + &hs * q * hs.adjoint()).try_inverse().expect("I + HQH^H is invertible");
    let grad = CMat::identity(k, k) * C64::new(v, 0.0) - hs.adjoint() * inner * &hs * C64::new(w, 0.0);
    let lambda = grad + CMat::identity(k, k) * C64::new(mu, 0.0);
    let lambda = (&lambda + lambda.adjoint()) * C64::new(0.5, 0.0);
    let top = hermitian_eigenvalues(&(hs.adjoint() * &hs)).first().copied().unwrap_or(0.0);
    let scale = (w.abs() * top).max(v).max(f64::MIN_POSITIVE);
    let q_scale = p_max.max(f64::MIN_POSITIVE);
    let min_eig = hermitian_eigenvalues(&lambda).last().copied().unwrap_or(0.0);
    let tr: f64 = (0..k).map(|i| q[(i, i)].re).sum();
    KktResiduals {
        stationarity: (&lambda * q).norm() / (scale * q_scale),
        dual_infeasibility: (-min_eig).max(0.0) / scale,
        slackness: (mu * (p_max - tr)).abs() / (scale * q_scale),
    }
}

/// LP optimum of `max Σ b_k f_k / J_k` over `0 ≤ f_k ≤ c_k`, `Σ f_k ≤ F`
/// by enumerating every vertex: each variable at 0 or at its cap, with
/// at most one variable fixed by the coupling constraint.
pub fn cpu_lp_vertex_optimum(backlog_remote: &[f64], cycles_per_bit: &[f64], f_max: f64, tau: f64) -> (f64, Vec<f64>) {
    let n = backlog_remote.len();
    assert!(n < 20, "vertex enumeration is exponential");
    let caps: Vec<f64> = (0..n).map(|k| f_max.min(backlog_remote[k] * cycles_per_bit[k] / tau)).collect();
    let value = |f: &[f64]| -> f64 { (0..n).map(|k| backlog_remote[k] * f[k] / cycles_per_bit[k]).sum() };
    let mut best = (0.0, vec![0.0; n]);
    for mask in 0u32..(1 << n) {
        let base: Vec<f64> = (0..n).map(|k| if mask >> k & 1 == 1 { caps[k] } else { 0.0 }).collect();
        let used: f64 = base.iter().sum();
        if used <= f_max * (1.0 + 1e-15) {
            let v = value(&base);
            if v > best.0 {
                best = (v, base.clone());
            }
        }
        for free in 0..n {
            if mask >> free & 1 == 1 {
                continue;
            }
            let rest = f_max - used;
            if rest > 0.0 && rest <= caps[free] {
                let mut f = base.clone();
                f[free] = rest;
                let v = value(&f);
                if v > best.0 {
                    best = (v, f);
                }
            }
        }
    }
    best
}
