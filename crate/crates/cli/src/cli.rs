//! Argument parsing and exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::gen_data::{cmd_gen_data, Structure};
use crate::run::cmd_run;
use crate::validate::{cmd_validate, ValidateOptions};

#[derive(Debug, Parser)]
#[command(
    name = "portkey",
    version,
    about = "Bernoulli-factory Barker and portkey Barker experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the replications described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `experiment.seed`.
        #[arg(long, env = "PORTKEY_SEED")]
        seed: Option<u64>,
        /// Overrides `experiment.out_dir`.
        #[arg(long, env = "PORTKEY_OUT")]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the self-checks and exit nonzero if any fails.
    Validate {
        #[arg(long, hide = true)]
        corrupt_envelope: Option<f64>,
    },
    /// Write synthetic N(0, R) observations as CSV.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value_t = StructureArg::Identity)]
        structure: StructureArg,
        /// Common correlation for `--structure equicorrelated`.
        #[arg(long, required_if_eq("structure", "equicorrelated"))]
        rho: Option<f64>,
        /// p x p correlation matrix CSV for `--structure custom`.
        #[arg(long, required_if_eq("structure", "custom"))]
        matrix: Option<PathBuf>,
        #[arg(long, env = "PORTKEY_SEED", default_value_t = 0)]
        seed: u64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Identity,
    Equicorrelated,
    Custom,
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            if let Some(o) = out {
                cfg.experiment.out_dir = o;
            }
            let report = cmd_run(&cfg, threads)?;
            for f in &report.failures {
                eprintln!("run failed: {f}");
            }
            println!(
                "{} runs written to {} ({} failed)",
                report.rows.len(),
                report.out_dir.display(),
                report.failures.len()
            );
            Ok(report.failures.is_empty())
        }
        Command::Validate { corrupt_envelope } => {
            let results = cmd_validate(&ValidateOptions { corrupt_envelope });
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.pass { "ok  " } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            Ok(results.iter().all(|r| r.pass))
        }
        Command::GenData {
            n,
            p,
            structure,
            rho,
            matrix,
            seed,
            out,
        } => {
            let structure = match structure {
                StructureArg::Identity => Structure::Identity,
                StructureArg::Equicorrelated => Structure::Equicorrelated(rho.unwrap_or_default()),
                StructureArg::Custom => Structure::from_csv(&matrix.unwrap_or_default())?,
            };
            cmd_gen_data(n, p, &structure, seed, &out)?;
            println!("wrote {n} x {p} observations to {}", out.display());
            Ok(true)
        }
    }
}

/// Exit code 0 iff nothing errored and every check passed.
pub fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn gen_data_requires_rho_for_equicorrelated() {
        let args = [
            "portkey",
            "gen-data",
            "--n",
            "5",
            "--p",
            "3",
            "--structure",
            "equicorrelated",
            "--out",
            "y.csv",
        ];
        assert!(Cli::try_parse_from(args).is_err());
    }
}
