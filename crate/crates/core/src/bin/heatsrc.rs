use clap::{Parser, Subcommand};
use heatsrc::config::RunConfig;
use heatsrc::error::{Error, Result};
use heatsrc::experiment::{Experiment, RunOptions};
use heatsrc::output::{
    summary_text, write_run_outputs, write_sweep_outputs, SweepRow, SweepSummary,
    ThinningComparison,
};
use heatsrc::verification::{
    forward_verification_text, ppp_diagnostics_text, run_forward_verification, run_ppp_diagnostics,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "heatsrc",
    version,
    about = "Point heat source recovery from boundary flux data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one reconstruction described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the seed stored in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Disable the removal sweep; also runs the thinned variant on the
        /// same data and reports both misfits.
        #[arg(long)]
        no_thinning: bool,
        /// Scale the noise by the l2 norm of the clean signal instead of
        /// its root mean square.
        #[arg(long)]
        literal_noise_norm: bool,
        #[arg(long, default_value = "runs")]
        output_dir: PathBuf,
        /// Cache assembled observation matrices here.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Run one config across seeds 0..k and aggregate the results.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        literal_noise_norm: bool,
        #[arg(long, default_value = "runs")]
        output_dir: PathBuf,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Cross-check the spectral flux evaluator against the finite
    /// difference oracle and a doubled-mode self-test.
    VerifyForward {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random extra cases beyond the fixed reference case.
        #[arg(long, default_value_t = 2)]
        cases: usize,
        #[arg(long, default_value_t = heatsrc::forward::DEFAULT_MODES)]
        modes: usize,
    },
    /// Distributional checks of the point process sampler.
    PppDiagnostics {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            no_thinning,
            literal_noise_norm,
            output_dir,
            cache_dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let exp = Experiment::assemble(cfg, cache_dir.as_deref())?;
            let seed = seed.unwrap_or(exp.config.seed);
            let literal = literal_noise_norm.then_some(true);
            let base = output_dir.join(&exp.config.name);

            if no_thinning {
                let thinned = exp.run(RunOptions {
                    seed,
                    thinning: Some(true),
                    literal_norm: literal,
                })?;
                let unthinned = exp.run(RunOptions {
                    seed,
                    thinning: Some(false),
                    literal_norm: literal,
                })?;
                let cmp = ThinningComparison {
                    thinning_misfit: thinned.final_misfit,
                    nothinning_misfit: unthinned.final_misfit,
                };
                write_run_outputs(
                    &base.join(format!("seed_{seed}")),
                    &thinned,
                    &exp.config.truth,
                    None,
                )?;
                let dir = base.join(format!("seed_{seed}_nothinning"));
                write_run_outputs(&dir, &unthinned, &exp.config.truth, Some(&cmp))?;
                print!("{}", summary_text(&unthinned, Some(&cmp)));
                println!("outputs: {}", dir.display());
            } else {
                let report = exp.run(RunOptions {
                    seed,
                    thinning: None,
                    literal_norm: literal,
                })?;
                let dir = base.join(format!("seed_{seed}"));
                write_run_outputs(&dir, &report, &exp.config.truth, None)?;
                print!("{}", summary_text(&report, None));
                println!("outputs: {}", dir.display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            seeds,
            literal_noise_norm,
            output_dir,
            cache_dir,
        } => {
            if seeds == 0 {
                return Err(Error::Config("sweep needs at least one seed".into()));
            }
            let cfg = RunConfig::load(&config)?;
            let exp = Experiment::assemble(cfg, cache_dir.as_deref())?;
            let literal = literal_noise_norm.then_some(true);
            let base = output_dir.join(&exp.config.name);
            let mut rows = Vec::with_capacity(seeds as usize);
            for seed in 0..seeds {
                let report = exp.run(RunOptions {
                    seed,
                    thinning: None,
                    literal_norm: literal,
                })?;
                write_run_outputs(
                    &base.join(format!("seed_{seed}")),
                    &report,
                    &exp.config.truth,
                    None,
                )?;
                rows.push(SweepRow::from_report(&report));
            }
            let summary = SweepSummary::from_rows(&exp.config.name, rows, exp.config.truth.len());
            write_sweep_outputs(&base, &summary)?;
            print!("{}", std::fs::read_to_string(base.join("aggregate.txt"))?);
            println!("outputs: {}", base.display());
            Ok(())
        }
        Command::VerifyForward { seed, cases, modes } => {
            let v = run_forward_verification(seed, cases, modes)?;
            print!("{}", forward_verification_text(&v));
            if v.pass {
                Ok(())
            } else {
                Err(Error::Numerics("forward verification failed".into()))
            }
        }
        Command::PppDiagnostics { seed, replications } => {
            let d = run_ppp_diagnostics(seed, replications)?;
            print!("{}", ppp_diagnostics_text(&d));
            if d.pass {
                Ok(())
            } else {
                Err(Error::Numerics("point process diagnostics failed".into()))
            }
        }
    }
}
