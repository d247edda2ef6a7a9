use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isea::aircomp::Scheme;
use isea::par::{init_threads_from_env, Execution};
use isea::pipeline::experiments;
use isea::pipeline::ExperimentConfig;
use isea::Error;

/// Monte Carlo experiments for prior-aided sensing and over-the-air
/// feature aggregation.
#[derive(Parser)]
#[command(name = "isea", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimator MSE and noise-free accuracy over the sensing SNR grid.
    EstimatorSweep(Common),
    /// Conditional entropy of the ML and MMSE aggregates.
    EntropyReport(Common),
    /// Both TDM designs over the communication SNR grid.
    TdmCompare(Common),
    /// FDM designs and baselines over the communication SNR grid.
    FdmCompare(Common),
    /// Accuracy of the configured solvers over the configured sweep.
    AccuracySweep(Common),
    /// Cross-check every solver against the brute-force oracle.
    ValidateSolvers {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per check.
        #[arg(long, default_value_t = 30)]
        instances: usize,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> isea::Result<(ExperimentConfig, Execution)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok((cfg, exec))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::NonConvergence { .. } | Error::ExclusionBudget { .. } => 3,
        _ => 2,
    }
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cmd: Command) -> isea::Result<bool> {
    match cmd {
        Command::EstimatorSweep(c) => {
            let (cfg, exec) = c.load()?;
            report(&experiments::estimator_sweep(&cfg, exec)?.1);
        }
        Command::EntropyReport(c) => {
            let (cfg, _) = c.load()?;
            report(&experiments::entropy_sweep(&cfg)?.1);
        }
        Command::TdmCompare(c) => {
            let (cfg, exec) = c.load()?;
            report(&experiments::compare(&cfg, Scheme::Tdm, exec)?.1);
        }
        Command::FdmCompare(c) => {
            let (cfg, exec) = c.load()?;
            report(&experiments::compare(&cfg, Scheme::Fdm, exec)?.1);
        }
        Command::AccuracySweep(c) => {
            let (cfg, exec) = c.load()?;
            let (r, files) = experiments::accuracy_sweep(&cfg, exec)?;
            if r.excluded > 0 {
                eprintln!("excluded {} of {} solver runs", r.excluded, r.total_runs);
            }
            report(&files);
        }
        Command::ValidateSolvers {
            seed,
            instances,
            sequential,
        } => {
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let checks = experiments::validate_solvers(seed, instances, exec)?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {:<28} worst {:.3e} (tol {:.0e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance
                );
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_threads_from_env();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
