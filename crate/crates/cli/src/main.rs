use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rcmdp::env::Environment;
use rcmdp::harness::{compare_wallclock, run_experiment, ExperimentConfig};
use rcmdp::Error;

/// Robust constrained MDP experiments.
#[derive(Parser)]
#[command(name = "rcmdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm and repeat.
    Run(Target),
    /// Time algorithms against epirc at a matched evaluator budget.
    Compare(Target),
    /// Check a config and build its environment without running anything.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override both the environment and the optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, env = "RCMDP_OUT")]
    out: Option<PathBuf>,
}

impl Target {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.set_seed(seed);
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(t) => {
            let config = t.load()?;
            let summary = run_experiment(&config)?;
            for r in &summary.rows {
                println!(
                    "{} r{}: best iteration {}, native {:?}, feasible {}, {:.1} ms, {} evaluator calls",
                    r.algorithm, r.repeat, r.best_iteration, r.native_values, r.feasible, r.wall_ms_total, r.evaluator_calls
                );
            }
            println!("summary: {}", summary.summary_file.display());
        }
        Command::Compare(t) => {
            let config = t.load()?;
            let report = compare_wallclock(&config)?;
            for r in &report.rows {
                println!(
                    "{}: {:.1} ms, {} evaluator calls, ratio to epirc {:.3}",
                    r.algorithm, r.wall_ms, r.evaluator_calls, r.ratio_to_epirc
                );
            }
            println!("compare: {}", report.compare_file.display());
        }
        Command::Validate(t) => {
            let config = t.load()?;
            let env = Environment::new(config.env.clone())?;
            let m = &env.model;
            println!(
                "ok: {} with {} states, {} actions, {} constraint(s); algorithms {:?}",
                config.env.name,
                m.n_states,
                m.n_actions,
                m.n_constraints(),
                config.algorithms.iter().map(|a| a.name()).collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
