//! Parameter sweeps behind the delay/power trade-off and blocking-gain
//! experiments, plus their CSV and manifest outputs.
//!
//! Every (strategy, point) run with the same seed index reuses the same
//! per-run seed, so strategies are compared on common random numbers.

use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{PerUser, SystemConfig};
use crate::controller::Strategy;
use crate::error::{invalid, Result};
use crate::sim::{run_simulation, RunSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub v_values: Vec<f64>,
    pub p_direct_values: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub slots: usize,
    pub seeds: usize,
    /// Delay target in seconds for the blocking-gain sweep.
    pub delay_target: f64,
    pub bisection_iterations: usize,
    /// Relative acceptance window around the delay target.
    pub delay_tolerance: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            v_values: vec![1e10, 1e11, 1e12, 1e13],
            p_direct_values: vec![0.0, 0.5],
            strategies: vec![Strategy::optimized(), Strategy::no_ris()],
            slots: 10_000,
            seeds: 3,
            delay_target: 0.150,
            bisection_iterations: 12,
            delay_tolerance: 0.1,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.v_values.is_empty() || self.p_direct_values.is_empty() || self.strategies.is_empty() {
            return Err(invalid("sweep lists must be nonempty"));
        }
        if self.slots == 0 || self.seeds == 0 {
            return Err(invalid("slots and seeds must be >= 1"));
        }
        if self.v_values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("V values must be finite and nonnegative"));
        }
        if self.p_direct_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("blocking probabilities must lie in [0, 1]"));
        }
        if !(self.delay_target > 0.0 && self.delay_tolerance >= 0.0) {
            return Err(invalid("delay target must be positive"));
        }
        Ok(())
    }
}

/// Per-run seeds derived from the master seed.
pub fn run_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

fn point_config(config: &SystemConfig, v: f64, p_direct: f64, slots: usize) -> SystemConfig {
    SystemConfig {
        lyapunov_v: v,
        block_prob_direct: PerUser::Uniform(p_direct),
        num_slots: slots,
        ..config.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub strategy: String,
    pub v: f64,
    pub p_direct: f64,
    pub mean_power_mw: f64,
    pub mean_delay_ms: f64,
    pub seed: u64,
    /// Plateau test outcome (not part of the CSV).
    pub stable: bool,
}

/// One simulation per (strategy, p_a, V, seed).
pub fn sweep_fig1(spec: &SweepSpec, config: &SystemConfig) -> Result<Vec<Fig1Row>> {
    spec.validate()?;
    config.validate()?;
    let seeds = run_seeds(config.rng_seed, spec.seeds);
    let mut rows = Vec::new();
    for strategy in &spec.strategies {
        for &p in &spec.p_direct_values {
            for &v in &spec.v_values {
                let cfg = point_config(config, v, p, spec.slots);
                for &seed in &seeds {
                    let summary = run_simulation(&cfg, strategy, seed)?.summary()?;
                    rows.push(Fig1Row {
                        strategy: strategy.label(),
                        v,
                        p_direct: p,
                        mean_power_mw: summary.mean_power_mw(),
                        mean_delay_ms: summary.mean_delay_ms(),
                        seed,
                        stable: summary.stable,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Seed-averaged outcome of one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub v: f64,
    pub mean_power_mw: f64,
    pub mean_delay_ms: f64,
    /// Every seed passed the plateau test.
    pub stable: bool,
}

pub fn evaluate_point(config: &SystemConfig, strategy: &Strategy, v: f64, p_direct: f64, spec: &SweepSpec) -> Result<PointEstimate> {
    let cfg = point_config(config, v, p_direct, spec.slots);
    let seeds = run_seeds(config.rng_seed, spec.seeds);
    let (mut power, mut delay, mut stable) = (0.0, 0.0, true);
    for &seed in &seeds {
        let s = run_simulation(&cfg, strategy, seed)?.summary()?;
        power += s.mean_power_mw();
        delay += s.mean_delay_ms();
        stable &= s.stable;
    }
    let n = seeds.len() as f64;
    Ok(PointEstimate { v, mean_power_mw: power / n, mean_delay_ms: delay / n, stable })
}

/// Outcome of the delay-target search for one (strategy, p_a).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSearch {
    /// Accepted operating point; `None` when the target is unreachable.
    pub point: Option<PointEstimate>,
    /// Power at exactly the target delay, interpolated log-log between the
    /// closest stable evaluations on either side (the accepted point's own
    /// power when no such pair exists).
    pub power_at_target_mw: Option<f64>,
    pub evaluations: Vec<PointEstimate>,
}

impl TargetSearch {
    fn finish(point: Option<PointEstimate>, evaluations: Vec<PointEstimate>, target_ms: f64) -> Self {
        let power_at_target_mw = point.map(|p| interpolate_power(&evaluations, target_ms).unwrap_or(p.mean_power_mw));
        TargetSearch { point, power_at_target_mw, evaluations }
    }
}

fn interpolate_power(evaluations: &[PointEstimate], target_ms: f64) -> Option<f64> {
    let usable = || evaluations.iter().filter(|e| e.stable && e.mean_delay_ms > 0.0 && e.mean_power_mw > 0.0);
    let below = usable().filter(|e| e.mean_delay_ms <= target_ms).max_by(|a, b| a.mean_delay_ms.total_cmp(&b.mean_delay_ms))?;
    let above = usable().filter(|e| e.mean_delay_ms >= target_ms).min_by(|a, b| a.mean_delay_ms.total_cmp(&b.mean_delay_ms))?;
    if above.mean_delay_ms == below.mean_delay_ms {
        return Some(below.mean_power_mw);
    }
    let t = (target_ms.ln() - below.mean_delay_ms.ln()) / (above.mean_delay_ms.ln() - below.mean_delay_ms.ln());
    Some((below.mean_power_mw.ln() + t * (above.mean_power_mw.ln() - below.mean_power_mw.ln())).exp())
}

/// Bisection on `log V` between the smallest and largest V of the spec
/// for the operating point whose mean delay is within the tolerance of
/// the target. Mean delay grows with V while power falls.
pub fn search_delay_target(config: &SystemConfig, strategy: &Strategy, p_direct: f64, spec: &SweepSpec) -> Result<TargetSearch> {
    spec.validate()?;
    let target = spec.delay_target * 1e3;
    let window = spec.delay_tolerance * target;
    let positive: Vec<f64> = spec.v_values.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Err(invalid("delay-target search needs a positive V"));
    }
    let mut lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = positive.iter().copied().fold(0.0, f64::max);
    let mut evaluations = Vec::new();
    let eval = |v: f64, evaluations: &mut Vec<PointEstimate>| -> Result<PointEstimate> {
        let e = evaluate_point(config, strategy, v, p_direct, spec)?;
        evaluations.push(e);
        Ok(e)
    };
    let accept = |e: &PointEstimate| e.stable && (e.mean_delay_ms - target).abs() <= window;

    let low = eval(lo, &mut evaluations)?;
    if !low.stable || low.mean_delay_ms > target + window {
        return Ok(TargetSearch::finish(None, evaluations, target));
    }
    if accept(&low) && lo == hi {
        return Ok(TargetSearch::finish(Some(low), evaluations, target));
    }
    let high = eval(hi, &mut evaluations)?;
    if high.stable && high.mean_delay_ms <= target + window {
        return Ok(TargetSearch::finish(Some(high), evaluations, target));
    }
    let mut best = low;
    for _ in 0..spec.bisection_iterations {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        let e = eval(mid, &mut evaluations)?;
        if accept(&e) {
            return Ok(TargetSearch::finish(Some(e), evaluations, target));
        }
        if e.stable && e.mean_delay_ms < target {
            lo = mid;
            best = e;
        } else {
            hi = mid;
        }
    }
    Ok(TargetSearch::finish(Some(best), evaluations, target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Row {
    pub strategy: String,
    pub p_direct: f64,
    /// Mean total power at the delay target in mW; `None` if infeasible.
    pub power_at_delay_target: Option<f64>,
    /// `10 log10(P_no_ris / P_strategy)`; `None` if this strategy is
    /// infeasible, `+inf` if only the no-RIS reference is.
    pub gain_db_vs_no_ris: Option<f64>,
    pub v_at_target: Option<f64>,
    pub delay_at_target_ms: Option<f64>,
}

/// Power at the delay target per (strategy, p_a) and the gain over the
/// no-RIS reference, which is searched even when not listed.
pub fn sweep_fig2(spec: &SweepSpec, config: &SystemConfig) -> Result<Vec<Fig2Row>> {
    spec.validate()?;
    config.validate()?;
    let reference = Strategy::no_ris();
    let mut rows = Vec::new();
    for &p in &spec.p_direct_values {
        let ref_search = search_delay_target(config, &reference, p, spec)?;
        let ref_power = ref_search.power_at_target_mw;
        for strategy in &spec.strategies {
            let search = if *strategy == reference {
                ref_search.clone()
            } else {
                search_delay_target(config, strategy, p, spec)?
            };
            let power = search.power_at_target_mw;
            let gain = match (power, ref_power) {
                (None, _) => None,
                (Some(_), None) => Some(f64::INFINITY),
                (Some(p), Some(r)) => Some(10.0 * (r / p).log10()),
            };
            rows.push(Fig2Row {
                strategy: strategy.label(),
                p_direct: p,
                power_at_delay_target: power,
                gain_db_vs_no_ris: gain,
                v_at_target: search.point.map(|e| e.v),
                delay_at_target_ms: search.point.map(|e| e.mean_delay_ms),
            });
        }
    }
    Ok(rows)
}

pub const FIG1_HEADER: [&str; 6] = ["strategy", "V", "p_a", "mean_power_mW", "mean_delay_ms", "seed"];
pub const FIG2_HEADER: [&str; 4] = ["strategy", "p_a", "power_at_delay_target", "gain_dB_vs_no_ris"];

pub fn write_fig1_csv<W: Write>(rows: &[Fig1Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIG1_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.v.to_string(),
            r.p_direct.to_string(),
            r.mean_power_mw.to_string(),
            r.mean_delay_ms.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fig2_csv<W: Write>(rows: &[Fig2Row], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIG2_HEADER)?;
    for r in rows {
        let power = r.power_at_delay_target.map_or("infeasible".to_string(), |p| p.to_string());
        let gain = r.gain_db_vs_no_ris.map_or("infeasible".to_string(), |g| g.to_string());
        w.write_record([r.strategy.clone(), r.p_direct.to_string(), power, gain])?;
    }
    w.flush()?;
    Ok(())
}

fn manifest_base(command: &str, config: &SystemConfig) -> serde_json::Value {
    serde_json::json!({
        "code_version": crate::CODE_VERSION,
        "command": command,
        "seed": config.rng_seed,
        "config": config,
    })
}

fn write_json(dir: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut file = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Writes `manifest.json` for a sweep: configuration echo, master seed,
/// derived run seeds, sweep parameters and code version.
pub fn write_sweep_manifest(dir: &Path, command: &str, config: &SystemConfig, spec: &SweepSpec) -> Result<()> {
    let mut manifest = manifest_base(command, config);
    manifest["sweep"] = serde_json::json!({
        "v_values": spec.v_values,
        "p_direct_values": spec.p_direct_values,
        "strategies": spec.strategies.iter().map(Strategy::label).collect::<Vec<_>>(),
        "slots": spec.slots,
        "seeds": spec.seeds,
        "run_seeds": run_seeds(config.rng_seed, spec.seeds),
        "delay_target_s": spec.delay_target,
        "bisection_iterations": spec.bisection_iterations,
        "delay_tolerance": spec.delay_tolerance,
    });
    write_json(dir, &manifest)
}

/// Writes `manifest.json` for a single run, including its summary.
pub fn write_run_manifest(dir: &Path, config: &SystemConfig, strategy: &Strategy, summary: &RunSummary) -> Result<()> {
    let mut manifest = manifest_base("run", config);
    manifest["strategy"] = strategy.label().into();
    manifest["summary"] = serde_json::json!({
        "mean_power_mW": summary.mean_power_mw(),
        "mean_delay_ms": summary.mean_delay_ms(),
        "per_user_delay_ms": summary.delays.iter().map(|d| d * 1e3).collect::<Vec<_>>(),
        "stable": summary.stable,
    });
    write_json(dir, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SystemConfig {
        SystemConfig { num_users: 2, ris_elements: 4, num_slots: 50, ..Default::default() }
    }

    #[test]
    fn single_point_gives_single_rows() {
        let spec = SweepSpec {
            v_values: vec![1e11],
            p_direct_values: vec![0.5],
            strategies: vec![Strategy::no_ris()],
            slots: 40,
            seeds: 1,
            ..Default::default()
        };
        let rows = sweep_fig1(&spec, &tiny()).unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_fig1_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("strategy,V,p_a,mean_power_mW,mean_delay_ms,seed\n"));
    }

    #[test]
    fn no_ris_gain_against_itself_is_zero() {
        let spec = SweepSpec {
            v_values: vec![1e10, 1e12],
            p_direct_values: vec![0.3],
            strategies: vec![Strategy::no_ris()],
            slots: 60,
            seeds: 1,
            bisection_iterations: 2,
            delay_target: 0.05,
            ..Default::default()
        };
        let rows = sweep_fig2(&spec, &tiny()).unwrap();
        assert_eq!(rows.len(), 1);
        if rows[0].power_at_delay_target.is_some() {
            assert_eq!(rows[0].gain_db_vs_no_ris, Some(0.0));
        }
    }

    #[test]
    fn rejects_empty_spec() {
        let spec = SweepSpec { v_values: vec![], ..Default::default() };
        assert!(sweep_fig1(&spec, &tiny()).is_err());
        let spec = SweepSpec { seeds: 0, ..Default::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn infeasible_rows_are_marked() {
        let rows = vec![Fig2Row {
            strategy: "absent".into(),
            p_direct: 0.9,
            power_at_delay_target: None,
            gain_db_vs_no_ris: None,
            v_at_target: None,
            delay_at_target_ms: None,
        }];
        let mut buf = Vec::new();
        write_fig2_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "strategy,p_a,power_at_delay_target,gain_dB_vs_no_ris\nabsent,0.9,infeasible,infeasible\n");
    }
}
