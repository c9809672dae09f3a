//! Slotted simulation loop, arrival process and run-level metrics.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::channel::{generate_geometry, sample_blocking, ChannelModel, NodeGeometry};
use crate::config::{RisMode, SystemConfig};
use crate::controller::{optimize_slot, Strategy};
use crate::error::Result;
use crate::queues::{average_delay, dpp_objective, lyapunov, QueueState};
use crate::ris::{random_phases, RisConfig};

/// Independent random streams of one run, so that strategies simulated
/// with the same seed see the same users, fading, blocking and arrivals.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Geometry = 0,
    Channel = 1,
    Blocking = 2,
    Arrivals = 3,
    RisPhases = 4,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// One slot of the trace. Backlogs are the state the decision was taken
/// in (before the slot's update).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub rates: Vec<f64>,
    pub powers: Vec<f64>,
    pub local: Vec<f64>,
    pub remote: Vec<f64>,
    pub cpu: Vec<f64>,
    pub arrivals: Vec<f64>,
    pub direct_blocked: Vec<bool>,
    pub indirect_blocked: Vec<bool>,
    pub lyapunov: f64,
    pub dpp_objective: f64,
}

impl SlotRecord {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn total_backlog(&self) -> f64 {
        self.local.iter().chain(&self.remote).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<SlotRecord>,
    pub slot_duration: f64,
    pub warmup_fraction: f64,
    pub final_queues: QueueState<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Time-averaged `Σ_k tr(Q_k)` in W.
    pub mean_power: f64,
    /// Per-user Little's-law delay in s.
    pub delays: Vec<f64>,
    pub mean_delay: f64,
    /// Plateau test on the total backlog.
    pub stable: bool,
}

impl RunSummary {
    pub fn mean_power_mw(&self) -> f64 {
        self.mean_power * 1e3
    }

    pub fn mean_delay_ms(&self) -> f64 {
        self.mean_delay * 1e3
    }
}

/// True when the mean total backlog over the last quarter of the trace
/// exceeds the second-quarter mean by less than 20%.
pub fn plateau_test(totals: &[f64]) -> bool {
    let n = totals.len();
    if n < 4 {
        return true;
    }
    let q = n / 4;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let second = mean(&totals[q..2 * q]);
    let last = mean(&totals[n - q..]);
    last <= 1.2 * second
}

impl MetricsLog {
    /// Rows left after discarding the warm-up prefix.
    pub fn steady_rows(&self) -> &[SlotRecord] {
        let skip = ((self.rows.len() as f64) * self.warmup_fraction).floor() as usize;
        &self.rows[skip.min(self.rows.len().saturating_sub(1))..]
    }

    pub fn summary(&self) -> Result<RunSummary> {
        let rows = self.steady_rows();
        let mean_power = rows.iter().map(SlotRecord::total_power).sum::<f64>() / rows.len() as f64;
        let delays = average_delay(rows, self.slot_duration)?;
        let mean_delay = delays.iter().sum::<f64>() / delays.len() as f64;
        let totals: Vec<f64> = self.rows.iter().map(SlotRecord::total_backlog).collect();
        Ok(RunSummary { mean_power, delays, mean_delay, stable: plateau_test(&totals) })
    }

    /// Long-format CSV: one line per slot and user.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "slot", "user", "rate_bps", "power_w", "local_bits", "remote_bits", "cpu_hz", "arrivals_bits",
            "direct_blocked", "indirect_blocked", "lyapunov", "dpp_objective",
        ])?;
        for row in &self.rows {
            for k in 0..row.rates.len() {
                w.write_record([
                    row.slot.to_string(),
                    k.to_string(),
                    row.rates[k].to_string(),
                    row.powers[k].to_string(),
                    row.local[k].to_string(),
                    row.remote[k].to_string(),
                    row.cpu[k].to_string(),
                    row.arrivals[k].to_string(),
                    u8::from(row.direct_blocked[k]).to_string(),
                    u8::from(row.indirect_blocked[k]).to_string(),
                    row.lyapunov.to_string(),
                    row.dpp_objective.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Poisson number of bits arriving in one slot, mean `rate · τ`.
pub fn sample_arrivals<R: Rng + ?Sized>(rate: f64, tau: f64, rng: &mut R) -> f64 {
    let mean = rate * tau;
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

/// Node geometry used by a run with this seed.
pub fn run_geometry(config: &SystemConfig, seed: u64) -> NodeGeometry {
    generate_geometry(config, &mut stream(seed, Stream::Geometry))
}

/// Simulates `config.num_slots` slots from empty queues.
pub fn run_simulation(config: &SystemConfig, strategy: &Strategy, seed: u64) -> Result<MetricsLog> {
    config.validate()?;
    let n = config.num_users;
    let tau = config.slot_duration;
    let geometry = run_geometry(config, seed);
    let model = ChannelModel::new(config, &geometry);
    let mut channel_rng = stream(seed, Stream::Channel);
    let mut blocking_rng = stream(seed, Stream::Blocking);
    let mut arrival_rng = stream(seed, Stream::Arrivals);

    let mut ris = match strategy.ris_mode {
        RisMode::Random => random_phases(config.ris_elements, &mut stream(seed, Stream::RisPhases)),
        _ => RisConfig::all_ones(config.ris_elements),
    };
    let cycles: Vec<f64> = (0..n).map(|k| config.cycles(k)).collect();
    let mut queues = QueueState::<f64>::empty(n);
    let mut rows = Vec::with_capacity(config.num_slots);

    for slot in 0..config.num_slots {
        let links = sample_blocking(config, &mut blocking_rng);
        let triples = model.sample_slot(&mut channel_rng);
        let arrivals: Vec<f64> = (0..n).map(|k| sample_arrivals(config.arrivals(k), tau, &mut arrival_rng)).collect();

        let decision = optimize_slot(&queues, &triples, &links, strategy, config, &ris)?;
        let dpp = dpp_objective(
            &queues,
            &decision.rates,
            &arrivals,
            &decision.cpu,
            &cycles,
            &decision.covariances,
            config.lyapunov_v,
            tau,
        )?;
        rows.push(SlotRecord {
            slot,
            rates: decision.rates.clone(),
            powers: decision.tx_powers.clone(),
            local: queues.local.clone(),
            remote: queues.remote.clone(),
            cpu: decision.cpu.clone(),
            arrivals: arrivals.clone(),
            direct_blocked: links.links.iter().map(|b| b.direct).collect(),
            indirect_blocked: links.links.iter().map(|b| b.indirect).collect(),
            lyapunov: lyapunov(&queues),
            dpp_objective: dpp.dpp_objective,
        });
        queues.advance(&decision.rates, &arrivals, &decision.cpu, &cycles, tau)?;
        if strategy.ris_mode == RisMode::Optimized {
            ris = decision.ris;
        }
    }
    Ok(MetricsLog {
        rows,
        slot_duration: tau,
        warmup_fraction: config.warmup_fraction,
        final_queues: queues,
    })
}
