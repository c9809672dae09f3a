//! Oracle and invariant checks runnable from the command line. Each check
//! draws its own random instances from a fixed seed and reports the worst
//! case it saw.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::EffectiveChannel;
use crate::oracle::{self, RadioInstance};
use crate::precoder::{optimize_covariance, wf_objective, PrecoderInput};
use crate::queues::{update_local_queue, update_remote_queue, QueueState};
use crate::ris::{compose_all, gradient_wrt_ris};
use crate::scheduler::{allocate_cpu, cpu_objective};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {} ({:.2} s)", self.name, self.detail, self.seconds)
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = body();
    CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Smallest cosine similarity between the analytic RIS gradient and
/// central finite differences over `instances` random problems.
pub fn gradient_min_cosine(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..instances {
        let inst = RadioInstance::random(2, 2, 8, &mut rng);
        let terms = inst.terms();
        let effective = compose_all(&terms, Some(&inst.ris)).expect("consistent instance");
        let analytic = gradient_wrt_ris(&terms, &effective, &inst.covariances, inst.tau).expect("consistent instance");
        let numeric = oracle::finite_difference_gradient(&inst, inst.ris.reflection(), 1e-6);
        worst = worst.min(oracle::cosine_similarity(&analytic, &numeric));
    }
    worst
}

pub fn check_gradient(instances: usize, seed: u64) -> CheckOutcome {
    timed("ris gradient vs finite differences", || {
        let worst = gradient_min_cosine(instances, seed);
        (worst >= 0.999, format!("min cosine {worst:.6} over {instances} instances"))
    })
}

/// Worst-case figures of the water-filling comparison.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaterFillingStats {
    pub max_relative_gap: f64,
    pub max_stationarity: f64,
    pub max_dual_infeasibility: f64,
    pub max_slackness: f64,
    /// Largest amount by which a random feasible covariance beat the
    /// solver, relative to the objective scale (should be ≤ 0).
    pub max_random_improvement: f64,
}

pub fn water_filling_stats(instances: usize, seed: u64) -> WaterFillingStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = WaterFillingStats { max_random_improvement: f64::NEG_INFINITY, ..Default::default() };
    for _ in 0..instances {
        let k = rng.random_range(1..=3);
        let na = rng.random_range(1..=3);
        let h = EffectiveChannel(oracle::complex_gaussian(na, k, &mut rng));
        let input = PrecoderInput {
            channel: &h,
            backlog_local: rng.random_range(0.0..4.0),
            backlog_remote: if rng.random_bool(0.2) { 5.0 } else { rng.random_range(0.0..1.0) },
            v: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..2.0) },
            tau: rng.random_range(0.5..1.5),
            bandwidth: rng.random_range(0.5..2.0),
            noise_power: rng.random_range(0.2..2.0),
            max_power: rng.random_range(0.1..3.0),
        };
        let solved = optimize_covariance(&input).expect("valid instance");
        let f_solver = wf_objective(&input, &solved.covariance).expect("solver output is feasible");
        let reference = oracle::water_filling_reference(
            h.matrix(),
            input.noise_power,
            input.backlog_local,
            input.backlog_remote,
            input.v,
            input.tau,
            input.bandwidth,
            input.max_power,
        );
        let w = input.weight().max(0.0);
        let g_top = reference.mode_gains.first().copied().unwrap_or(0.0);
        let scale = (input.v * input.max_power).max(w * (g_top * input.max_power).ln_1p()).max(f64::MIN_POSITIVE);
        let denom = reference.objective.abs().max(1e-12 * scale);
        s.max_relative_gap = s.max_relative_gap.max((f_solver - reference.objective).abs() / denom);

        if w > 0.0 {
            let mu = w * solved.water_level_dual;
            let kkt = oracle::kkt_residuals(
                h.matrix(),
                &solved.covariance,
                mu,
                input.noise_power,
                input.backlog_local,
                input.backlog_remote,
                input.v,
                input.tau,
                input.bandwidth,
                input.max_power,
            );
            s.max_stationarity = s.max_stationarity.max(kkt.stationarity);
            s.max_dual_infeasibility = s.max_dual_infeasibility.max(kkt.dual_infeasibility);
            s.max_slackness = s.max_slackness.max(kkt.slackness);
        }
        for _ in 0..10 {
            let frac = rng.random_range(0.0..=1.0);
            let q = oracle::random_feasible_covariance(k, input.max_power, frac, &mut rng);
            let f = wf_objective(&input, &q).expect("feasible probe");
            s.max_random_improvement = s.max_random_improvement.max((f_solver - f) / scale);
        }
    }
    s
}

pub fn check_water_filling(instances: usize, seed: u64) -> CheckOutcome {
    timed("water-filling vs level-bisection oracle", || {
        let s = water_filling_stats(instances, seed);
        let ok = s.max_relative_gap <= 1e-6
            && s.max_stationarity <= 1e-6
            && s.max_dual_infeasibility <= 1e-6
            && s.max_slackness <= 1e-6
            && s.max_random_improvement <= 1e-9;
        let detail = format!(
            "gap {:.2e}, stationarity {:.2e}, dual {:.2e}, slackness {:.2e} over {instances} instances",
            s.max_relative_gap, s.max_stationarity, s.max_dual_infeasibility, s.max_slackness
        );
        (ok, detail)
    })
}

/// Largest relative gap between the greedy CPU allocation and the LP
/// vertex optimum.
pub fn cpu_max_relative_gap(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=4);
        let tau = 0.01;
        let f_max = rng.random_range(1e9..1e10);
        // backlogs on the scale where caps and the shared budget both bind
        let b: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..2e5) })
            .collect();
        let j: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 500.0 } else { rng.random_range(100.0..1000.0) }).collect();
        let greedy = allocate_cpu(&b, &j, f_max, tau).expect("valid instance");
        let ours = cpu_objective(&b, &j, &greedy);
        let (best, _) = oracle::cpu_lp_vertex_optimum(&b, &j, f_max, tau);
        let gap = if best == 0.0 { ours.abs() } else { (best - ours).abs() / best };
        worst = worst.max(gap);
        if greedy.total() > f_max || greedy.frequencies.iter().any(|&f| f < 0.0) {
            return f64::INFINITY;
        }
    }
    worst
}

pub fn check_cpu(instances: usize, seed: u64) -> CheckOutcome {
    timed("cpu greedy vs LP vertex enumeration", || {
        let worst = cpu_max_relative_gap(instances, seed);
        (worst <= 1e-9, format!("max relative gap {worst:.2e} over {instances} instances"))
    })
}

/// Hand-computed five-slot trace: inputs `(R, A, f)` per slot and the
/// expected `(B_l, B_r)` after each slot, with `τ = 0.25`, `J = 8`.
pub const QUEUE_TRACE_INPUTS: [(f64, f64, f64); 5] = [
    (0.0, 10_000.0, 0.0),
    (16_000.0, 5_000.0, 64_000.0),
    (80_000.0, 0.0, 32_000.0),
    (40_000.0, 2_500.0, 160_000.0),
    (4_000.0, 750.0, 640_000.0),
];
pub const QUEUE_TRACE_EXPECTED: [(f64, f64); 5] =
    [(10_000.0, 0.0), (11_000.0, 4_000.0), (0.0, 14_000.0), (2_500.0, 9_000.0), (2_250.0, 1_000.0)];
pub const QUEUE_TRACE_TAU: f64 = 0.25;
pub const QUEUE_TRACE_CYCLES: f64 = 8.0;

/// Replays the hand trace through both the scalar updates and
/// [`QueueState::advance`]; returns the first mismatching slot.
pub fn queue_trace_mismatch() -> Option<usize> {
    let (mut bl, mut br) = (0.0_f64, 0.0_f64);
    let mut state = QueueState::<f64>::empty(1);
    for (t, (&(r, a, f), &(el, er))) in QUEUE_TRACE_INPUTS.iter().zip(&QUEUE_TRACE_EXPECTED).enumerate() {
        let (next, moved) = update_local_queue(bl, r, a, QUEUE_TRACE_TAU);
        br = update_remote_queue(br, f, QUEUE_TRACE_CYCLES, moved, QUEUE_TRACE_TAU);
        bl = next;
        state.advance(&[r], &[a], &[f], &[QUEUE_TRACE_CYCLES], QUEUE_TRACE_TAU).expect("one user");
        let exact = |x: f64, y: f64| x.to_bits() == y.to_bits();
        if !(exact(bl, el) && exact(br, er) && exact(state.local[0], el) && exact(state.remote[0], er)) {
            return Some(t);
        }
    }
    None
}

pub fn check_queue_trace() -> CheckOutcome {
    timed("queue recursion on a hand-built trace", || match queue_trace_mismatch() {
        None => (true, "5 slots bit-exact".to_string()),
        Some(t) => (false, format!("mismatch at slot {t}")),
    })
}

/// Runs every check with instance counts matching the acceptance suite.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_gradient(50, seed),
        check_water_filling(100, seed.wrapping_add(1)),
        check_cpu(200, seed.wrapping_add(2)),
        check_queue_trace(),
    ]
}
