use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use samlab::harness::{execute, Experiment, ExperimentConfig, Overrides};
use samlab::optim::Algorithm;
use samlab::sharpness::SharpnessType;

/// Experiments on sharpness-aware minimization. Exits with 0 iff every
/// asserted claim passes.
#[derive(Parser, Debug)]
#[command(name = "samlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config file; command-line flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for summary.json and CSV files
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    eta: Option<f64>,

    #[arg(long, global = true)]
    rho: Option<f64>,

    #[arg(long, global = true)]
    steps: Option<u64>,

    /// sam, one_sam, asc_gd
    #[arg(long, global = true, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,

    /// Sharpness type for explicit-bias: max, asc, avg
    #[arg(long = "type", global = true, value_parser = parse_type)]
    kind: Option<SharpnessType>,

    /// Print the resolved config as TOML and exit
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Full-batch SAM on a quadratic: fixed norm, alignment, invariant sets
    Quadratic,
    /// Minimizer selected by SAM, 1-SAM or GD on the ascent loss on the 4D toy
    Toy4d,
    /// Discrete run against the matching limiting flow
    FlowCompare,
    /// Sharpness functionals against their limits as ρ shrinks
    SharpnessScan,
    /// Direct minimization of L + R^type and the regularizer it selects
    ExplicitBias,
    /// Fast property checks
    Selftest,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: samlab::Error| e.to_string())
}

fn parse_type(s: &str) -> Result<SharpnessType, String> {
    s.parse().map_err(|e: samlab::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let experiment = match cli.command {
        Command::Quadratic => Experiment::Quadratic,
        Command::Toy4d => Experiment::Toy4d,
        Command::FlowCompare => Experiment::FlowCompare,
        Command::SharpnessScan => Experiment::SharpnessScan,
        Command::ExplicitBias => Experiment::ExplicitBias,
        Command::Selftest => Experiment::Selftest,
    };
    let ov = Overrides {
        eta: cli.eta,
        rho: cli.rho,
        n_steps: cli.steps,
        seed: cli.seed,
        algorithm: cli.algorithm,
        sharpness: cli.kind,
        out: cli.out.clone(),
    };
    let cfg = match ExperimentConfig::load(experiment, cli.config.as_deref(), &ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("samlab: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    match execute(&cfg) {
        Ok((outcome, dir)) => {
            for c in &outcome.summary.claims {
                println!("{}", c.line());
            }
            for n in &outcome.summary.notes {
                println!("note: {n}");
            }
            println!("wrote {}", dir.display());
            if outcome.summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("samlab: {e}");
            ExitCode::from(2)
        }
    }
}
