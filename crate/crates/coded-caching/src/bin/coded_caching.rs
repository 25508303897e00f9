//! Command-line front end: seeded runs, cache-size sweeps, oracle
//! comparison, and config validation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible scenario.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coded_caching::error::Error;
use coded_caching::harness::{self, metrics_csv, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "coded-caching",
    version,
    about = "cooperative coded-caching simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides [output].dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the [agent].kind field.
    #[arg(long)]
    agent: Option<String>,
    /// Override the serving discipline.
    #[arg(long, value_parser = ["mds", "uncoded"])]
    discipline: Option<String>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment, one CSV per seed.
    Run(Common),
    /// Run every (scheme, K, seed) combination from [sweep].
    Sweep(Common),
    /// Run with a per-slot similarity trace against value iteration.
    Compare(Common),
    /// Parse and validate a config, printing the resolved form.
    ValidateConfig(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, common) = match &cli.command {
        Command::Run(c) => ("run", c),
        Command::Sweep(c) => ("sweep", c),
        Command::Compare(c) => ("compare", c),
        Command::ValidateConfig(c) => ("validate-config", c),
    };
    match execute(verb, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible(_) | Error::ActionSpaceTooLarge { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn execute(verb: &str, common: &Common) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(agent) = &common.agent {
        cfg.agent.kind = agent.parse()?;
    }
    if let Some(disc) = &common.discipline {
        cfg.agent.discipline = disc.parse()?;
    }
    if let Some(seed) = common.seed {
        cfg.schedule.seeds = vec![seed];
    }
    cfg.validate()?;
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));

    match verb {
        "validate-config" => {
            if !common.quiet {
                print!(
                    "{}",
                    toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?
                );
            }
            Ok(())
        }
        "run" => {
            let outcomes = harness::run_experiment(&cfg, &out_dir)?;
            if !common.quiet {
                for (seed, o) in &outcomes {
                    println!("seed {seed}: converged rho {:.6}", o.converged_rho);
                }
                println!(
                    "wrote {} run file(s) to {}",
                    outcomes.len(),
                    out_dir.display()
                );
            }
            Ok(())
        }
        "sweep" => {
            let rows = harness::sweep(&cfg)?;
            let path = harness::write_sweep(&cfg, &rows, &out_dir)?;
            if !common.quiet {
                for r in rows.iter().filter(|r| r.status != "ok") {
                    eprintln!("warning: {} K={}: {}", r.scheme, r.k, r.status);
                }
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        "compare" => {
            std::fs::create_dir_all(&out_dir)?;
            for &seed in &cfg.schedule.seeds.clone() {
                let outcome = harness::compare(&cfg, seed)?;
                let path =
                    out_dir.join(format!("compare_{}_seed{seed}.csv", cfg.agent.kind.name()));
                std::fs::write(&path, metrics_csv(&outcome.rows))?;
                if !common.quiet {
                    let final_sim = outcome
                        .rows
                        .last()
                        .and_then(|r| r.cosine_similarity)
                        .unwrap_or(f64::NAN);
                    println!("seed {seed}: final similarity {final_sim:.6}");
                }
            }
            Ok(())
        }
        _ => unreachable!(),
    }
}
