//! `ellcop`: fit, sample and benchmark Gaussian and Student's t copula
//! correlation matrices.
//!
//! Exit status: 0 on success, 2 when a fit ends without converging, 1 on
//! usage or input errors.

mod commands;
mod ingest;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::{BenchArgs, ExperimentArgs, FitArgs, GenCorrArgs, SampleArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Core(#[from] ellcop::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "ellcop", version, about = "Maximum-likelihood correlation matrices for Gaussian and Student's t copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a correlation matrix to a CSV of observations.
    Fit(FitArgs),
    /// Draw a pseudo-sample from a copula.
    Sample(SampleArgs),
    /// Generate a random correlation matrix with a random spectrum.
    GenCorr(GenCorrArgs),
    /// Compare the exact and approximate fits over random cases.
    ///
    /// Writes one CSV row per case with columns: case_id, d, nu, seed,
    /// min_eig, loglik_ig, loglik_approx, norm_diff, status_ig,
    /// status_approx, iters_ig, iters_approx. norm_diff is
    /// (loglik_ig - loglik_approx) / n_obs. The summary JSON holds, for each
    /// (d, nu) cell, the mean and nearest-rank 5th and 95th percentiles of
    /// norm_diff over cases where both fits converged, and the
    /// non-convergence rate of each method. Records are not binned by
    /// min_eig; that is left to downstream analysis.
    Experiment(ExperimentArgs),
    /// Time repeated exact fits of one generated case.
    Bench(BenchArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Sample(a) => commands::sample(a),
        Command::GenCorr(a) => commands::gen_corr(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
