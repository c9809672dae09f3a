//! Scenario constants and their validation.
//!
//! Configuration files are TOML key-value documents whose keys mirror the
//! fields of [`SystemConfig`]; missing keys take the defaults below.
//! Per-user quantities accept either a single number (applied to every
//! user) or an array with one entry per user.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeMode {
    Instantaneous,
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RisMode {
    Optimized,
    Random,
    Absent,
}

impl std::str::FromStr for KnowledgeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instantaneous" => Ok(Self::Instantaneous),
            "statistical" => Ok(Self::Statistical),
            other => Err(Error::Config(format!("unknown knowledge mode `{other}`"))),
        }
    }
}

impl std::str::FromStr for RisMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(Self::Optimized),
            "random" => Ok(Self::Random),
            "absent" => Ok(Self::Absent),
            other => Err(Error::Config(format!("unknown RIS mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for KnowledgeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Instantaneous => "instantaneous",
            Self::Statistical => "statistical",
        })
    }
}

impl std::fmt::Display for RisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Optimized => "optimized",
            Self::Random => "random",
            Self::Absent => "absent",
        })
    }
}

/// A per-user quantity: one value shared by all users, or one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerUser {
    pub fn get(&self, user: usize) -> f64 {
        match self {
            PerUser::Uniform(v) => *v,
            PerUser::Each(v) => v[user],
        }
    }

    fn check(&self, name: &str, users: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
        let values: Vec<f64> = match self {
            PerUser::Uniform(v) => vec![*v],
            PerUser::Each(v) => {
                if v.len() != users {
                    return Err(Error::Config(format!(
                        "{name}: expected {users} per-user values, got {}",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        match values.iter().find(|&&v| !ok(v)) {
            Some(bad) => Err(Error::Config(format!("{name}: value {bad} out of range"))),
            None => Ok(()),
        }
    }
}

impl From<f64> for PerUser {
    fn from(v: f64) -> Self {
        PerUser::Uniform(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_users: usize,
    pub user_antennas: usize,
    pub ap_antennas: usize,
    pub ris_elements: usize,
    /// Slot duration in seconds.
    pub slot_duration: f64,
    /// Total uplink bandwidth in Hz, split equally among users unless
    /// `bandwidth_per_user` is given.
    pub total_bandwidth: f64,
    pub bandwidth_per_user: Option<PerUser>,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Maximum transmit power per user in W.
    pub max_tx_power: PerUser,
    /// Edge host CPU frequency in cycles/s.
    pub max_cpu: f64,
    pub cycles_per_bit: PerUser,
    pub lyapunov_v: f64,
    /// Mean task arrival rate in bits/s.
    pub arrival_rate: PerUser,
    pub block_prob_direct: PerUser,
    pub block_prob_indirect: PerUser,
    pub pgm_iterations: usize,
    pub pgm_step: f64,
    pub pgm_max_halvings: u32,
    /// Early stop when the sup-norm change of the RIS vector falls below this.
    pub pgm_tolerance: f64,
    /// 0 = continuous phases.
    pub phase_bits: u32,
    pub knowledge_mode: KnowledgeMode,
    pub ris_mode: RisMode,
    pub carrier_freq: f64,
    pub rician_k_db: f64,
    /// Path-loss exponent of the direct user-AP link (2 = free space).
    pub direct_path_loss_exponent: f64,
    /// Power gain applied to every RIS element's re-radiation, in dB.
    pub ris_element_gain_db: f64,
    pub ap_position: [f64; 3],
    pub ris_position: [f64; 3],
    /// Users are dropped uniformly in `[0, x] x [0, y]` at `user_height`.
    pub service_area: [f64; 2],
    pub user_height: f64,
    pub num_slots: usize,
    /// Fraction of leading slots excluded from time averages.
    pub warmup_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_users: 6,
            user_antennas: 4,
            ap_antennas: 4,
            ris_elements: 64,
            slot_duration: 0.01,
            total_bandwidth: 1e6,
            bandwidth_per_user: None,
            // -174 dBm/Hz
            noise_psd: dbm_to_watt(-174.0),
            max_tx_power: PerUser::Uniform(0.1),
            max_cpu: 4.5e9,
            cycles_per_bit: PerUser::Uniform(500.0),
            lyapunov_v: 1e9,
            arrival_rate: PerUser::Uniform(1e6),
            block_prob_direct: PerUser::Uniform(0.5),
            block_prob_indirect: PerUser::Uniform(0.0),
            pgm_iterations: 20,
            pgm_step: 1e-4,
            pgm_max_halvings: 10,
            pgm_tolerance: 1e-6,
            phase_bits: 0,
            knowledge_mode: KnowledgeMode::Instantaneous,
            ris_mode: RisMode::Optimized,
            carrier_freq: 28e9,
            rician_k_db: 10.0,
            direct_path_loss_exponent: 3.5,
            ris_element_gain_db: 20.0,
            ap_position: [0.0, 0.0, 6.0],
            ris_position: [25.0, 25.0, 6.0],
            service_area: [50.0, 50.0],
            user_height: 1.5,
            num_slots: 10_000,
            warmup_fraction: 0.1,
            rng_seed: 1,
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SystemConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn bandwidth(&self, user: usize) -> f64 {
        match &self.bandwidth_per_user {
            Some(b) => b.get(user),
            None => self.total_bandwidth / self.num_users as f64,
        }
    }

    /// `σ_k² = N0 · W_k`.
    pub fn noise_power(&self, user: usize) -> f64 {
        self.noise_psd * self.bandwidth(user)
    }

    pub fn max_power(&self, user: usize) -> f64 {
        self.max_tx_power.get(user)
    }

    pub fn cycles(&self, user: usize) -> f64 {
        self.cycles_per_bit.get(user)
    }

    pub fn p_direct(&self, user: usize) -> f64 {
        self.block_prob_direct.get(user)
    }

    pub fn p_indirect(&self, user: usize) -> f64 {
        self.block_prob_indirect.get(user)
    }

    pub fn arrivals(&self, user: usize) -> f64 {
        self.arrival_rate.get(user)
    }

    pub fn wavelength(&self) -> f64 {
        299_792_458.0 / self.carrier_freq
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_users;
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if n == 0 || self.user_antennas == 0 || self.ap_antennas == 0 || self.ris_elements == 0 {
            return fail("all counts must be >= 1");
        }
        if self.pgm_iterations == 0 {
            return fail("pgm_iterations must be >= 1");
        }
        if self.num_slots == 0 {
            return fail("num_slots must be >= 1");
        }
        let positive = [
            ("slot_duration", self.slot_duration),
            ("total_bandwidth", self.total_bandwidth),
            ("noise_psd", self.noise_psd),
            ("max_cpu", self.max_cpu),
            ("pgm_step", self.pgm_step),
            ("carrier_freq", self.carrier_freq),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.lyapunov_v.is_finite() && self.lyapunov_v >= 0.0) {
            return fail("lyapunov_v must be nonnegative");
        }
        if !(self.pgm_tolerance >= 0.0) {
            return fail("pgm_tolerance must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return fail("warmup_fraction must lie in [0, 1)");
        }
        if !(self.direct_path_loss_exponent.is_finite() && self.direct_path_loss_exponent > 0.0) {
            return fail("direct_path_loss_exponent must be positive");
        }
        if !self.ris_element_gain_db.is_finite() {
            return fail("ris_element_gain_db must be finite");
        }
        if self.rician_k_db.is_nan() {
            return fail("rician_k_db is NaN");
        }
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if let Some(b) = &self.bandwidth_per_user {
            b.check("bandwidth_per_user", n, pos)?;
        }
        self.max_tx_power.check("max_tx_power", n, pos)?;
        self.cycles_per_bit.check("cycles_per_bit", n, pos)?;
        self.arrival_rate.check("arrival_rate", n, |v| v.is_finite() && v >= 0.0)?;
        self.block_prob_direct.check("block_prob_direct", n, prob)?;
        self.block_prob_indirect.check("block_prob_indirect", n, prob)?;
        let finite3 = |p: &[f64; 3]| p.iter().all(|v| v.is_finite());
        if !finite3(&self.ap_position) || !finite3(&self.ris_position) {
            return fail("node positions must be finite");
        }
        if self.ap_position == self.ris_position {
            return fail("AP and RIS must not coincide");
        }
        if !(self.service_area.iter().all(|&v| pos(v)) && self.user_height.is_finite()) {
            return fail("service area must be positive");
        }
        Ok(())
    }
}
