//! Node geometry, mmWave channel sampling, blocking and the end-to-end
//! channel/rate model.
//!
//! Large-scale gain is free-space `(λ / 4πd)²`. Small-scale fading is Rician:
//! a deterministic line-of-sight term built from half-wavelength uniform
//! linear array responses plus an i.i.d. `CN(0, 1)` scattered term. The AP
//! array lies along the y axis, RIS and user arrays along the x axis.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{dims, invalid, Result};
use crate::linalg::{self, CMat};
use crate::ris::RisConfig;
use crate::scalar::{log2_factor, Real};

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub ap_position: Point,
    pub ris_position: Point,
    pub user_positions: Vec<Point>,
}

/// Raw channels of one user: direct `N_a x K`, user to RIS `M x K`,
/// RIS to AP `N_a x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTriple<T: Real> {
    pub direct: CMat<T>,
    pub user_to_ris: CMat<T>,
    pub ris_to_ap: CMat<T>,
}

impl<T: Real> ChannelTriple<T> {
    pub fn ap_antennas(&self) -> usize {
        self.direct.nrows()
    }

    pub fn user_antennas(&self) -> usize {
        self.direct.ncols()
    }

    pub fn ris_elements(&self) -> usize {
        self.user_to_ris.nrows()
    }

    fn check(&self) -> Result<()> {
        let (na, k, m) = (self.ap_antennas(), self.user_antennas(), self.ris_elements());
        if self.user_to_ris.shape() != (m, k) {
            return Err(dims("user-to-RIS channel", (m, k), self.user_to_ris.shape()));
        }
        if self.ris_to_ap.shape() != (na, m) {
            return Err(dims("RIS-to-AP channel", (na, m), self.ris_to_ap.shape()));
        }
        Ok(())
    }
}

/// Blocking flags of one user in one slot (`true` = blocked).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Blockage {
    pub direct: bool,
    pub indirect: bool,
}

/// Per-user blocking state of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkState {
    pub links: Vec<Blockage>,
}

impl LinkState {
    pub fn unblocked(users: usize) -> Self {
        LinkState { links: vec![Blockage::default(); users] }
    }

    pub fn all_blocked(users: usize) -> Self {
        LinkState { links: vec![Blockage { direct: true, indirect: true }; users] }
    }
}

/// Composed `N_a x K` channel of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel<T: Real>(pub CMat<T>);

impl<T: Real> EffectiveChannel<T> {
    pub fn matrix(&self) -> &CMat<T> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        linalg::is_zero(&self.0)
    }
}

/// Places the AP and RIS at their configured anchors and drops users
/// uniformly in the service area.
pub fn generate_geometry<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> NodeGeometry {
    let [w, h] = config.service_area;
    let user_positions = (0..config.num_users)
        .map(|_| {
            loop {
                let p = [rng.random::<f64>() * w, rng.random::<f64>() * h, config.user_height];
                if p != config.ap_position && p != config.ris_position {
                    break p;
                }
            }
        })
        .collect();
    NodeGeometry {
        ap_position: config.ap_position,
        ris_position: config.ris_position,
        user_positions,
    }
}

fn distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Free-space power gain `(λ / 4πd)²`.
pub fn path_gain(wavelength: f64, d: f64) -> f64 {
    path_gain_exponent(wavelength, d, 2.0)
}

/// `(λ / 4π)² d^{-η}`: free-space gain at 1 m with distance exponent `η`.
pub fn path_gain_exponent(wavelength: f64, d: f64, exponent: f64) -> f64 {
    let a = wavelength / (4.0 * std::f64::consts::PI);
    a * a * d.powf(-exponent)
}

const X_AXIS: Point = [1.0, 0.0, 0.0];
const Y_AXIS: Point = [0.0, 1.0, 0.0];

/// Half-wavelength ULA response towards `to`, seen from `from`.
fn steering(n: usize, axis: &Point, from: &Point, to: &Point) -> Vec<Complex<f64>> {
    let d = distance(from, to);
    let cos = (0..3).map(|i| axis[i] * (to[i] - from[i]) / d).sum::<f64>();
    (0..n)
        .map(|i| Complex::from_polar(1.0, std::f64::consts::PI * i as f64 * cos))
        .collect()
}

/// Line-of-sight `n_rx x n_tx` matrix with unit-modulus entries.
fn los_matrix(
    wavelength: f64,
    (tx, tx_axis, n_tx): (&Point, &Point, usize),
    (rx, rx_axis, n_rx): (&Point, &Point, usize),
) -> DMatrix<Complex<f64>> {
    let d = distance(tx, rx);
    let common = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * d / wavelength);
    let a_rx = steering(n_rx, rx_axis, rx, tx);
    let a_tx = steering(n_tx, tx_axis, tx, rx);
    DMatrix::from_fn(n_rx, n_tx, |i, j| common * a_rx[i] * a_tx[j].conj())
}

/// One Rician link: mean gain, LoS part, and mixing weights.
#[derive(Debug, Clone)]
struct LinkModel {
    gain: f64,
    los: DMatrix<Complex<f64>>,
    los_weight: f64,
    nlos_weight: f64,
}

impl LinkModel {
    fn new(gain: f64, los: DMatrix<Complex<f64>>, rician_k_db: f64) -> Self {
        let (los_weight, nlos_weight) = if rician_k_db == f64::INFINITY {
            (1.0, 0.0)
        } else {
            let k = 10f64.powf(rician_k_db / 10.0);
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        };
        LinkModel { gain, los, los_weight, nlos_weight }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<Complex<f64>> {
        let amp = self.gain.sqrt();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (rows, cols) = self.los.shape();
        if self.nlos_weight == 0.0 {
            return self.los.map(|z| z * (amp * self.los_weight));
        }
        DMatrix::from_fn(rows, cols, |i, j| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            (self.los[(i, j)] * self.los_weight + Complex::new(re * s, im * s) * self.nlos_weight) * amp
        })
    }
}

/// Channel generator for a fixed geometry; the LoS responses are
/// precomputed, only fading is drawn per call.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    direct: Vec<LinkModel>,
    user_to_ris: Vec<LinkModel>,
    ris_to_ap: LinkModel,
}

impl ChannelModel {
    pub fn new(config: &SystemConfig, geometry: &NodeGeometry) -> Self {
        let lambda = config.wavelength();
        let (na, k, m) = (config.ap_antennas, config.user_antennas, config.ris_elements);
        let ap = &geometry.ap_position;
        let ris = &geometry.ris_position;
        let kdb = config.rician_k_db;
        let element_gain = 10f64.powf(config.ris_element_gain_db / 10.0);
        let direct = geometry
            .user_positions
            .iter()
            .map(|u| {
                let los = los_matrix(lambda, (u, &X_AXIS, k), (ap, &Y_AXIS, na));
                let gain = path_gain_exponent(lambda, distance(u, ap), config.direct_path_loss_exponent);
                LinkModel::new(gain, los, kdb)
            })
            .collect();
        let user_to_ris = geometry
            .user_positions
            .iter()
            .map(|u| {
                let los = los_matrix(lambda, (u, &X_AXIS, k), (ris, &X_AXIS, m));
                let gain = path_gain(lambda, distance(u, ris)) * element_gain;
                LinkModel::new(gain, los, kdb)
            })
            .collect();
        let los = los_matrix(lambda, (ris, &X_AXIS, m), (ap, &Y_AXIS, na));
        let ris_to_ap = LinkModel::new(path_gain(lambda, distance(ris, ap)), los, kdb);
        ChannelModel { direct, user_to_ris, ris_to_ap }
    }

    pub fn num_users(&self) -> usize {
        self.direct.len()
    }

    /// Mean power gain of the direct link of `user`.
    pub fn direct_gain(&self, user: usize) -> f64 {
        self.direct[user].gain
    }

    /// Draws all three matrices of `user` independently.
    pub fn sample_triple<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> ChannelTriple<f64> {
        ChannelTriple {
            direct: self.direct[user].sample(rng),
            user_to_ris: self.user_to_ris[user].sample(rng),
            ris_to_ap: self.ris_to_ap.sample(rng),
        }
    }

    /// Draws one slot's channels for every user; the RIS-to-AP matrix is a
    /// single draw shared by all users.
    pub fn sample_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ChannelTriple<f64>> {
        let ris_to_ap = self.ris_to_ap.sample(rng);
        (0..self.num_users())
            .map(|k| ChannelTriple {
                direct: self.direct[k].sample(rng),
                user_to_ris: self.user_to_ris[k].sample(rng),
                ris_to_ap: ris_to_ap.clone(),
            })
            .collect()
    }
}

pub fn sample_channel_triple<R: Rng + ?Sized>(
    config: &SystemConfig,
    geometry: &NodeGeometry,
    user: usize,
    rng: &mut R,
) -> Result<ChannelTriple<f64>> {
    if user >= geometry.user_positions.len() {
        return Err(invalid(format!("user index {user} out of range")));
    }
    Ok(ChannelModel::new(config, geometry).sample_triple(user, rng))
}

/// Independent Bernoulli blocking of every direct and indirect link.
pub fn sample_blocking<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> LinkState {
    let links = (0..config.num_users)
        .map(|k| Blockage {
            direct: rng.random::<f64>() < config.p_direct(k),
            indirect: rng.random::<f64>() < config.p_indirect(k),
        })
        .collect();
    LinkState { links }
}

/// `direct_gain · H_d + indirect_gain · H_ra diag(r) H_r`; a missing RIS
/// drops the indirect term.
pub fn compose_weighted<T: Real>(
    triple: &ChannelTriple<T>,
    ris: Option<&RisConfig<T>>,
    direct_gain: T,
    indirect_gain: T,
) -> Result<EffectiveChannel<T>> {
    triple.check()?;
    let mut h = triple.direct.map(|z| z * direct_gain);
    if let Some(ris) = ris {
        let m = triple.ris_elements();
        if ris.len() != m {
            return Err(dims("RIS vector", (m, 1), (ris.len(), 1)));
        }
        if indirect_gain != T::zero() {
            let mut scaled = triple.ris_to_ap.clone();
            for (i, mut col) in scaled.column_iter_mut().enumerate() {
                col *= ris.reflection()[i] * indirect_gain;
            }
            h += scaled * &triple.user_to_ris;
        }
    }
    Ok(EffectiveChannel(h))
}

/// End-to-end channel under the realized blocking state.
pub fn compose_channel<T: Real>(
    triple: &ChannelTriple<T>,
    ris: Option<&RisConfig<T>>,
    state: Blockage,
) -> Result<EffectiveChannel<T>> {
    let gain = |blocked: bool| if blocked { T::zero() } else { T::one() };
    compose_weighted(triple, ris, gain(state.direct), gain(state.indirect))
}

/// Expected-blocking channel used by the optimizer under statistical
/// knowledge: the flags are replaced by their probabilities.
pub fn compose_channel_statistical<T: Real>(
    triple: &ChannelTriple<T>,
    ris: Option<&RisConfig<T>>,
    p_direct: T,
    p_indirect: T,
) -> Result<EffectiveChannel<T>> {
    let unit = T::zero()..=T::one();
    if !unit.contains(&p_direct) || !unit.contains(&p_indirect) {
        return Err(invalid("blocking probabilities must lie in [0, 1]"));
    }
    compose_weighted(triple, ris, T::one() - p_direct, T::one() - p_indirect)
}

/// `W log2 det(I + σ^{-2} H Q H^H)` in bits/s, without validating `Q`.
pub fn rate_unchecked<T: Real>(h: &CMat<T>, q: &CMat<T>, bandwidth: T, noise_power: T) -> T {
    if linalg::is_zero(q) || linalg::is_zero(h) {
        return T::zero();
    }
    let inv = Complex::new(T::one() / noise_power, T::zero());
    let x = h * q * h.adjoint() * inv;
    bandwidth * linalg::ln_det_identity_plus(&x) * log2_factor::<T>()
}

/// Achievable uplink rate in bits/s.
pub fn achievable_rate<T: Real>(
    h: &EffectiveChannel<T>,
    q: &CMat<T>,
    bandwidth: T,
    noise_power: T,
) -> Result<T> {
    if !(noise_power > T::zero()) {
        return Err(invalid("noise power must be positive"));
    }
    let k = h.0.ncols();
    if q.shape() != (k, k) {
        return Err(dims("transmit covariance", (k, k), q.shape()));
    }
    if !linalg::all_finite(&h.0) {
        return Err(invalid("channel has non-finite entries"));
    }
    linalg::check_psd(q, "transmit covariance")?;
    Ok(rate_unchecked(&h.0, q, bandwidth, noise_power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn scalar_triple(d: Complex<f64>, ur: Complex<f64>, ra: Complex<f64>) -> ChannelTriple<f64> {
        ChannelTriple {
            direct: CMat::from_element(1, 1, d),
            user_to_ris: CMat::from_element(1, 1, ur),
            ris_to_ap: CMat::from_element(1, 1, ra),
        }
    }

    #[test]
    fn geometry_is_deterministic_and_inside_area() {
        let cfg = SystemConfig::default();
        let a = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        let b = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        let other = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(8));
        assert_ne!(a.user_positions, other.user_positions);
        for p in &a.user_positions {
            assert!((0.0..=50.0).contains(&p[0]) && (0.0..=50.0).contains(&p[1]));
            assert_eq!(p[2], 1.5);
        }
    }

    #[test]
    fn single_user_geometry() {
        let cfg = SystemConfig { num_users: 1, ..Default::default() };
        let g = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(g.user_positions.len(), 1);
    }

    #[test]
    fn triple_dimensions_follow_config() {
        let cfg = SystemConfig::default();
        let g = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let t = sample_channel_triple(&cfg, &g, 0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(t.direct.shape(), (4, 4));
        assert_eq!(t.user_to_ris.shape(), (64, 4));
        assert_eq!(t.ris_to_ap.shape(), (4, 64));
        assert!(sample_channel_triple(&cfg, &g, 6, &mut ChaCha8Rng::seed_from_u64(2)).is_err());
    }

    #[test]
    fn pure_los_draws_repeat() {
        let cfg = SystemConfig { rician_k_db: f64::INFINITY, ..Default::default() };
        let g = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let model = ChannelModel::new(&cfg, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = model.sample_triple(2, &mut rng);
        let b = model.sample_triple(2, &mut rng);
        assert_eq!(a, b);
    }

    #[test]
    fn blocking_degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let never = SystemConfig { block_prob_direct: 0.0.into(), block_prob_indirect: 1.0.into(), ..Default::default() };
        for _ in 0..1000 {
            let s = sample_blocking(&never, &mut rng);
            assert!(s.links.iter().all(|b| !b.direct && b.indirect));
        }
    }

    #[test]
    fn compose_blocking_cases() {
        let t = scalar_triple(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let r = RisConfig::from_phases(&[std::f64::consts::PI]);
        let both = compose_channel(&t, Some(&r), Blockage { direct: true, indirect: true }).unwrap();
        assert!(both.is_zero());
        let direct_only = compose_channel(&t, Some(&r), Blockage { direct: false, indirect: true }).unwrap();
        assert_eq!(direct_only.0, t.direct);
        // 1 + e^{jπ} = 0
        let open = compose_channel(&t, Some(&r), Blockage::default()).unwrap();
        assert!(open.0[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn statistical_composition() {
        let t = scalar_triple(c(2.0, -1.0), c(0.3, 0.1), c(-0.5, 0.2));
        let r = RisConfig::from_phases(&[0.4]);
        let open = compose_channel(&t, Some(&r), Blockage::default()).unwrap();
        assert_eq!(compose_channel_statistical(&t, Some(&r), 0.0, 0.0).unwrap(), open);
        assert!(compose_channel_statistical(&t, Some(&r), 1.0, 1.0).unwrap().is_zero());
        let half = compose_channel_statistical(&t, Some(&r), 0.5, 1.0).unwrap();
        assert_eq!(half.0[(0, 0)], c(1.0, -0.5));
        assert!(compose_channel_statistical(&t, Some(&r), 1.5, 0.0).is_err());
    }

    #[test]
    fn absent_ris_drops_indirect_term() {
        let t = scalar_triple(c(1.0, 0.0), c(5.0, 0.0), c(5.0, 0.0));
        let h = compose_channel(&t, None, Blockage::default()).unwrap();
        assert_eq!(h.0, t.direct);
    }

    #[test]
    fn compose_rejects_mismatched_dimensions() {
        let mut t = scalar_triple(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let r = RisConfig::from_phases(&[0.0, 0.0]);
        assert!(compose_channel(&t, Some(&r), Blockage::default()).is_err());
        t.ris_to_ap = CMat::zeros(2, 1);
        assert!(compose_channel(&t, None, Blockage::default()).is_err());
    }

    #[test]
    fn rate_scalar_cases() {
        let one = EffectiveChannel(CMat::from_element(1, 1, c(1.0, 0.0)));
        let sigma2 = 0.25;
        let q = CMat::from_element(1, 1, c(sigma2, 0.0));
        assert!((achievable_rate(&one, &q, 1.0, sigma2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(achievable_rate(&one, &CMat::zeros(1, 1), 1.0, sigma2).unwrap(), 0.0);
        let zero = EffectiveChannel(CMat::zeros(1, 1));
        assert_eq!(achievable_rate(&zero, &q, 1.0, sigma2).unwrap(), 0.0);
        let neg = CMat::from_element(1, 1, c(-1.0, 0.0));
        assert!(achievable_rate(&one, &neg, 1.0, sigma2).is_err());
        assert!(achievable_rate(&one, &q, 1.0, 0.0).is_err());
    }
}
