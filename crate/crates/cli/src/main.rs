use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ris_mec::config::PerUser;
use ris_mec::sweep::{self, SweepSpec};
use ris_mec::{selftest, KnowledgeMode, RisMode, Strategy, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "ris-mec", version, about = "RIS-assisted MIMO computation offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single simulation; writes run.csv and manifest.json.
    Run(Common),
    /// Delay/power trade-off over V; writes fig1.csv and manifest.json.
    SweepFig1(SweepArgs),
    /// Power at a delay target versus direct-link blocking; writes fig2.csv.
    SweepFig2(SweepArgs),
    /// Oracle and invariant checks.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML file with SystemConfig fields; omitted fields keep defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    strategy: Option<RisMode>,
    #[arg(long)]
    knowledge: Option<KnowledgeMode>,
    /// 0 keeps continuous phases.
    #[arg(long)]
    phase_bits: Option<u32>,
    #[arg(long)]
    slots: Option<usize>,
    /// Lyapunov trade-off values.
    #[arg(long, value_delimiter = ',')]
    v: Vec<f64>,
    /// Direct-link blocking probabilities.
    #[arg(long, value_delimiter = ',')]
    p_direct: Vec<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Strategy labels such as optimized, optimized-2bit,
    /// optimized-statistical, random, absent. Defaults to the single
    /// strategy given by --strategy/--knowledge/--phase-bits, or to all
    /// five when none of those is set.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Delay target for sweep-fig2, in ms.
    #[arg(long, default_value_t = 150.0)]
    delay_target_ms: f64,
    #[arg(long, default_value_t = 12)]
    bisection_iterations: usize,
}

const ALL_STRATEGIES: [&str; 5] = ["optimized", "optimized-2bit", "optimized-statistical", "random", "absent"];

impl Common {
    fn load(&self) -> anyhow::Result<SystemConfig> {
        let mut config = match &self.config {
            Some(path) => SystemConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => SystemConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        if let Some(slots) = self.slots {
            config.num_slots = slots;
        }
        if let Some(mode) = self.strategy {
            config.ris_mode = mode;
        }
        if let Some(knowledge) = self.knowledge {
            config.knowledge_mode = knowledge;
        }
        if let Some(bits) = self.phase_bits {
            config.phase_bits = bits;
        }
        Ok(config)
    }

    fn strategy_flags_set(&self) -> bool {
        self.strategy.is_some() || self.knowledge.is_some() || self.phase_bits.is_some()
    }
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(args: &Common) -> anyhow::Result<()> {
    let mut config = args.load()?;
    match args.v.as_slice() {
        [] => {}
        [v] => config.lyapunov_v = *v,
        _ => bail!("`run` takes a single --v value"),
    }
    match args.p_direct.as_slice() {
        [] => {}
        [p] => config.block_prob_direct = PerUser::Uniform(*p),
        _ => bail!("`run` takes a single --p-direct value"),
    }
    config.validate()?;
    let strategy = Strategy::from_config(&config);
    let log = ris_mec::run_simulation(&config, &strategy, config.rng_seed)?;
    let summary = log.summary()?;
    create_out(&args.out)?;
    log.write_csv(BufWriter::new(File::create(args.out.join("run.csv"))?))?;
    sweep::write_run_manifest(&args.out, &config, &strategy, &summary)?;
    println!(
        "{}: mean power {:.4} mW, mean delay {:.2} ms, {}",
        strategy.label(),
        summary.mean_power_mw(),
        summary.mean_delay_ms(),
        if summary.stable { "stable" } else { "backlog still growing" }
    );
    Ok(())
}

fn sweep_spec(args: &SweepArgs, config: &SystemConfig) -> anyhow::Result<SweepSpec> {
    let defaults = SweepSpec::default();
    let strategies = if !args.strategies.is_empty() {
        args.strategies.iter().map(|s| Strategy::parse_label(s)).collect::<Result<Vec<_>, _>>()?
    } else if args.common.strategy_flags_set() {
        vec![Strategy::from_config(config)]
    } else {
        ALL_STRATEGIES.iter().map(|s| Strategy::parse_label(s)).collect::<Result<Vec<_>, _>>()?
    };
    let spec = SweepSpec {
        v_values: if args.common.v.is_empty() { defaults.v_values } else { args.common.v.clone() },
        p_direct_values: if args.common.p_direct.is_empty() { defaults.p_direct_values } else { args.common.p_direct.clone() },
        strategies,
        slots: config.num_slots,
        seeds: args.seeds,
        delay_target: args.delay_target_ms * 1e-3,
        bisection_iterations: args.bisection_iterations,
        ..defaults
    };
    spec.validate()?;
    Ok(spec)
}

fn sweep_fig1(args: &SweepArgs) -> anyhow::Result<()> {
    let config = args.common.load()?;
    let spec = sweep_spec(args, &config)?;
    let rows = sweep::sweep_fig1(&spec, &config)?;
    create_out(&args.common.out)?;
    sweep::write_fig1_csv(&rows, BufWriter::new(File::create(args.common.out.join("fig1.csv"))?))?;
    sweep::write_sweep_manifest(&args.common.out, "sweep-fig1", &config, &spec)?;
    println!("wrote {} rows to {}", rows.len(), args.common.out.join("fig1.csv").display());
    Ok(())
}

fn sweep_fig2(args: &SweepArgs) -> anyhow::Result<()> {
    let config = args.common.load()?;
    let spec = sweep_spec(args, &config)?;
    let rows = sweep::sweep_fig2(&spec, &config)?;
    create_out(&args.common.out)?;
    sweep::write_fig2_csv(&rows, BufWriter::new(File::create(args.common.out.join("fig2.csv"))?))?;
    sweep::write_sweep_manifest(&args.common.out, "sweep-fig2", &config, &spec)?;
    for r in &rows {
        match (r.power_at_delay_target, r.gain_db_vs_no_ris) {
            (Some(p), Some(g)) => println!("{} p_a={}: {p:.4} mW, {g:+.2} dB vs no RIS", r.strategy, r.p_direct),
            _ => println!("{} p_a={}: delay target not reachable", r.strategy, r.p_direct),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::SweepFig1(args) => sweep_fig1(args),
        Command::SweepFig2(args) => sweep_fig2(args),
        Command::Selftest { seed } => {
            let outcomes = selftest::run_all(*seed);
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().all(|o| o.passed) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("self-test failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
