use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xlab_core::exact::{
    build_generator, kac_check, mixing_time_exact, spectral_gap, stationary_exact, wilson_lower_bound, wilson_residual, WilsonVariant,
};
use xlab_core::harness::{list_presets, run_preset, ExperimentSpec, SpecOverrides};
use xlab_core::{BoundaryParams, Configuration};

#[derive(Parser)]
#[command(name = "xlab", version, about = "Exclusion-process experiments: simulation presets and exact small-N analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the preset catalog.
    List,
    /// Run a preset and write summary.json plus one CSV per series.
    Run {
        #[arg(long)]
        preset: String,
        /// JSON file with any of: preset, params, sizes, replicas, horizon, seed, out, options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the replica count.
        #[arg(long)]
        replicas: Option<usize>,
        /// Override the size list, comma separated.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Print the resolved spec as JSON and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Exact computations on the full state space of a small segment.
    Exact {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        rates: Rates,
        #[arg(long, value_enum, default_value = "stationary")]
        quantity: Quantity,
        /// Threshold for the mixing time and the lower bound.
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// Excursions for the return-time check.
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct Rates {
    /// Parameters as `p=..,alpha=..,beta=..,gamma=..,delta=..`; overrides the single flags.
    #[arg(long)]
    params: Option<BoundaryParams>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

impl Rates {
    fn resolve(&self) -> Result<BoundaryParams, Box<dyn std::error::Error>> {
        match self.params {
            Some(p) => Ok(p),
            None => Ok(BoundaryParams::new(self.p, self.alpha, self.beta, self.gamma, self.delta)?),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    /// Stationary law as `configuration,weight` CSV.
    Stationary,
    MixingTime,
    SpectralGap,
    /// Return time to the empty configuration: linear solve, Kac formula and simulation.
    Kac,
    /// Approximate-eigenfunction certificate and lower bound (p = 1/2).
    Wilson,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::List => {
            for p in list_presets() {
                let criteria: Vec<String> = p.criteria.iter().map(|c| c.to_string()).collect();
                println!("{:<22} criteria {:<6} {}", p.name, criteria.join(","), p.result);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { preset, config, seed, out, replicas, sizes, dry_run } => {
            let mut spec = ExperimentSpec::preset_default(&preset)?;
            if let Some(path) = config {
                spec = spec.apply(SpecOverrides::from_json(&std::fs::read_to_string(path)?)?)?;
            }
            spec = spec.apply(SpecOverrides { seed, out, replicas, sizes, ..Default::default() })?;
            if dry_run {
                println!("{}", serde_json::to_string_pretty(&spec)?);
                return Ok(ExitCode::SUCCESS);
            }
            let record = run_preset(&spec)?;
            for m in &record.metrics {
                let verdict = match m.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "-",
                };
                let target = m.target.map(|t| format!(" target {t}")).unwrap_or_default();
                let se = m.stderr.map(|s| format!(" +- {s}")).unwrap_or_default();
                println!("[{:>2}] {verdict:<4} {} = {}{se}{target}", m.criterion, m.name, m.value);
            }
            eprintln!("wall clock {:.2?}", record.wall_clock);
            if let Some(dir) = &spec.out {
                eprintln!("outputs in {}", dir.display());
            }
            Ok(if record.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Exact { n, rates, quantity, eps, replicas, seed } => {
            let params = rates.resolve()?;
            match quantity {
                Quantity::Stationary => {
                    let pi = stationary_exact(&build_generator(&params, n)?)?;
                    print!("{}", pi.to_golden_csv());
                }
                Quantity::MixingTime => println!("{}", mixing_time_exact(&build_generator(&params, n)?, eps)?),
                Quantity::SpectralGap => println!("{}", spectral_gap(&build_generator(&params, n)?)?),
                Quantity::Kac => {
                    let zero = Configuration::empty(xlab_core::Topology::Segment(n));
                    println!("{}", serde_json::to_string_pretty(&kac_check(&params, &zero, replicas, seed)?)?);
                }
                Quantity::Wilson => {
                    let variant = if params.alpha + params.gamma > 0.0 { WilsonVariant::TwoSided } else { WilsonVariant::OneSided };
                    let cert = wilson_residual(&params, n, variant)?;
                    let bound = wilson_lower_bound(&cert, eps).ok();
                    let out = serde_json::json!({ "certificate": cert, "lower_bound": bound });
                    println!("{}", serde_json::to_string_pretty(&out)?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
