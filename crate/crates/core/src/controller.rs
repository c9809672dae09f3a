//! Per-slot controller: alternating RIS projected-gradient steps and
//! per-user water-filling, followed by CPU scheduling.

use crate::channel::{compose_channel, rate_unchecked, ChannelTriple, LinkState};
use crate::config::{KnowledgeMode, RisMode, SystemConfig};
use crate::error::{invalid, Result};
use crate::linalg::CMat;
use crate::precoder::{optimize_covariance, PrecoderInput};
use crate::queues::QueueState;
use crate::ris::{self, RisConfig, RisUserTerm};
use crate::scheduler::allocate_cpu;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strategy {
    pub ris_mode: RisMode,
    pub knowledge: KnowledgeMode,
    /// 0 = continuous phases; only used with an optimized RIS.
    pub phase_bits: u32,
}

impl Strategy {
    pub const fn new(ris_mode: RisMode, knowledge: KnowledgeMode, phase_bits: u32) -> Self {
        Strategy { ris_mode, knowledge, phase_bits }
    }

    pub const fn optimized() -> Self {
        Self::new(RisMode::Optimized, KnowledgeMode::Instantaneous, 0)
    }

    pub const fn no_ris() -> Self {
        Self::new(RisMode::Absent, KnowledgeMode::Instantaneous, 0)
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        Self::new(config.ris_mode, config.knowledge_mode, config.phase_bits)
    }

    /// Short identifier used in CSV output, e.g. `optimized`,
    /// `optimized-2bit`, `optimized-statistical`, `random`, `absent`.
    pub fn label(&self) -> String {
        let mut s = self.ris_mode.to_string();
        if self.ris_mode == RisMode::Optimized && self.phase_bits > 0 {
            s.push_str(&format!("-{}bit", self.phase_bits));
        }
        if self.knowledge == KnowledgeMode::Statistical {
            s.push_str("-statistical");
        }
        s
    }

    pub fn parse_label(label: &str) -> Result<Self> {
        let mut parts = label.split('-');
        let ris_mode = parts.next().unwrap_or_default().parse()?;
        let mut strategy = Strategy::new(ris_mode, KnowledgeMode::Instantaneous, 0);
        for part in parts {
            if part == "statistical" {
                strategy.knowledge = KnowledgeMode::Statistical;
            } else if let Some(bits) = part.strip_suffix("bit") {
                strategy.phase_bits = bits.parse().map_err(|_| invalid(format!("bad strategy `{label}`")))?;
            } else {
                return Err(invalid(format!("bad strategy `{label}`")));
            }
        }
        Ok(strategy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    pub covariances: Vec<CMat<f64>>,
    /// `tr(Q_k)` in W.
    pub tx_powers: Vec<f64>,
    pub ris: RisConfig<f64>,
    /// Cycles/s per user.
    pub cpu: Vec<f64>,
    /// Rates in bits/s over the realized channel.
    pub rates: Vec<f64>,
    /// Radio objective as seen by the optimizer: the warm start, then one
    /// entry per accepted gradient iteration.
    pub objective_trace: Vec<f64>,
    /// Radio objective after phase quantization, when quantization ran.
    pub quantized_objective: Option<f64>,
}

/// Link multipliers the optimizer sees for `user`.
fn optimizer_gains(strategy: &Strategy, config: &SystemConfig, links: &LinkState, user: usize) -> (f64, f64) {
    let (direct, indirect) = match strategy.knowledge {
        KnowledgeMode::Instantaneous => {
            let b = links.links[user];
            (if b.direct { 0.0 } else { 1.0 }, if b.indirect { 0.0 } else { 1.0 })
        }
        KnowledgeMode::Statistical => (1.0 - config.p_direct(user), 1.0 - config.p_indirect(user)),
    };
    match strategy.ris_mode {
        RisMode::Absent => (direct, 0.0),
        _ => (direct, indirect),
    }
}

fn solve_covariances(
    terms: &[RisUserTerm<'_, f64>],
    ris: Option<&RisConfig<f64>>,
    config: &SystemConfig,
) -> Result<Vec<CMat<f64>>> {
    terms
        .iter()
        .enumerate()
        .map(|(k, term)| {
            let h = term.compose(ris)?;
            let input = PrecoderInput {
                channel: &h,
                backlog_local: term.backlog_local,
                backlog_remote: term.backlog_remote,
                v: config.lyapunov_v,
                tau: config.slot_duration,
                bandwidth: term.bandwidth,
                noise_power: term.noise_power,
                max_power: config.max_power(k),
            };
            Ok(optimize_covariance(&input)?.covariance)
        })
        .collect()
}

/// Runs one slot of the controller.
///
/// `warm_ris` is the starting point of the gradient iterations for an
/// optimized RIS and the fixed reflection vector for a random one; it is
/// ignored without a RIS.
pub fn optimize_slot(
    queues: &QueueState<f64>,
    triples: &[ChannelTriple<f64>],
    links: &LinkState,
    strategy: &Strategy,
    config: &SystemConfig,
    warm_ris: &RisConfig<f64>,
) -> Result<SlotDecision> {
    let n = config.num_users;
    if queues.num_users() != n || triples.len() != n || links.links.len() != n {
        return Err(invalid("queues, channels and link states must cover every user"));
    }
    if warm_ris.len() != config.ris_elements {
        return Err(invalid("warm RIS vector has the wrong length"));
    }
    let (v, tau) = (config.lyapunov_v, config.slot_duration);
    let terms: Vec<RisUserTerm<'_, f64>> = (0..n)
        .map(|k| {
            let (direct_gain, indirect_gain) = optimizer_gains(strategy, config, links, k);
            RisUserTerm {
                triple: &triples[k],
                direct_gain,
                indirect_gain,
                backlog_local: queues.local[k],
                backlog_remote: queues.remote[k],
                bandwidth: config.bandwidth(k),
                noise_power: config.noise_power(k),
            }
        })
        .collect();
    let use_ris = strategy.ris_mode != RisMode::Absent;

    let mut r = warm_ris.clone();
    let ris_ref = |r: &RisConfig<f64>| -> Option<RisConfig<f64>> { use_ris.then(|| r.clone()) };
    let mut covs = solve_covariances(&terms, ris_ref(&r).as_ref(), config)?;
    let mut objective = ris::radio_objective(&terms, ris_ref(&r).as_ref(), &covs, v, tau)?;
    let mut trace = vec![objective];
    let mut quantized_objective = None;

    if strategy.ris_mode == RisMode::Optimized {
        for _ in 0..config.pgm_iterations {
            let effective = ris::compose_all(&terms, Some(&r))?;
            let grad = ris::gradient_wrt_ris(&terms, &effective, &covs, tau)?;
            if grad.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                break;
            }
            let mut step = config.pgm_step;
            let mut accepted = None;
            for _ in 0..=config.pgm_max_halvings {
                let candidate = ris::pgm_step(&r, &grad, step)?;
                let f = ris::radio_objective(&terms, Some(&candidate), &covs, v, tau)?;
                if f <= objective {
                    accepted = Some(candidate);
                    break;
                }
                step *= 0.5;
            }
            let Some(next) = accepted else { break };
            let change = next
                .reflection()
                .iter()
                .zip(r.reflection().iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            r = next;
            covs = solve_covariances(&terms, Some(&r), config)?;
            objective = ris::radio_objective(&terms, Some(&r), &covs, v, tau)?;
            trace.push(objective);
            if change < config.pgm_tolerance {
                break;
            }
        }
        if strategy.phase_bits > 0 {
            r = ris::quantize_phases(&r, strategy.phase_bits)?;
            covs = solve_covariances(&terms, Some(&r), config)?;
            quantized_objective = Some(ris::radio_objective(&terms, Some(&r), &covs, v, tau)?);
        }
    }

    let cycles: Vec<f64> = (0..n).map(|k| config.cycles(k)).collect();
    let cpu = allocate_cpu(&queues.remote, &cycles, config.max_cpu, tau)?.frequencies;

    let realized_ris = ris_ref(&r);
    let rates = (0..n)
        .map(|k| {
            let h = compose_channel(&triples[k], realized_ris.as_ref(), links.links[k])?;
            Ok(rate_unchecked(h.matrix(), &covs[k], config.bandwidth(k), config.noise_power(k)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let tx_powers = covs.iter().map(crate::linalg::trace_re).collect();

    Ok(SlotDecision {
        covariances: covs,
        tx_powers,
        ris: r,
        cpu,
        rates,
        objective_trace: trace,
        quantized_objective,
    })
}
