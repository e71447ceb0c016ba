use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ellcop::copula::{sample_copula, transform};
use ellcop::estimate::{fit_approximate, fit_inverse_gradient, fit_naive_gradient, fit_t_full, TraceEntry};
use ellcop::experiment::{run_bench, run_sweep, summarize, SweepConfig, RECORD_COLUMNS};
use ellcop::testgen::{generate_case, random_correlation_with_spectrum, CaseSpec};
use ellcop::{CopulaModel, CorrelationMatrix, FitResult, StepConfig};
use serde::Serialize;

use crate::ingest::{ingest, InputFormat};
use crate::output::{csv_float, emit, sidecar, to_json, write_atomic, RunManifest};
use crate::CliError;

/// Exit status when a fit ends without converging.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Exact fit by inverse-gradient ascent.
    Ig,
    /// Projected fixed-point approximation.
    Approx,
    /// Gradient ascent on the inverse matrix.
    Naive,
    /// Exact fit with ν estimated by profile likelihood.
    FullT,
}

fn model_for(family: Family, nu: Option<f64>) -> Result<CopulaModel, CliError> {
    match (family, nu) {
        (Family::Gaussian, None) => Ok(CopulaModel::Gaussian),
        (Family::Gaussian, Some(_)) => Err(CliError::Usage("--nu only applies to --family t".into())),
        (Family::T, Some(nu)) => Ok(CopulaModel::student_t(nu)?),
        (Family::T, None) => Err(CliError::Usage("--family t requires --nu".into())),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct StepArgs {
    /// Initial step size [default: 1/n].
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Step shrink factor, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub k1: f64,
    /// Step growth factor, greater than 1.
    #[arg(long, default_value_t = 4.0 / 3.0)]
    pub k2: f64,
    /// Parameter tolerance: max-abs change in the correlation matrix.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Log-likelihood tolerance.
    #[arg(long, default_value_t = 1e-11)]
    pub tol_loglik: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
}

impl StepArgs {
    fn config(&self) -> StepConfig {
        StepConfig {
            lambda0: self.lambda0,
            k1: self.k1,
            k2: self.k2,
            tol_param: self.tol,
            tol_loglik: self.tol_loglik,
            max_iters: self.max_iters,
            ..StepConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV file, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Uniform)]
    pub format: InputFormat,
    #[arg(long, value_enum, default_value_t = Family::Gaussian)]
    pub family: Family,
    /// Degrees of freedom for --family t.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Ig)]
    pub method: Method,
    /// Lower end of the ν search interval for --method full-t.
    #[arg(long, default_value_t = 1.0)]
    pub nu_lo: f64,
    /// Upper end of the ν search interval for --method full-t.
    #[arg(long, default_value_t = 100.0)]
    pub nu_hi: f64,
    #[command(flatten)]
    pub step: StepArgs,
    /// Recorded in the manifest; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include the accepted steps and the starting matrix.
    #[arg(long)]
    pub trace: bool,
    /// Output JSON file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    method: Method,
    family: Family,
    nu: Option<f64>,
    n: usize,
    d: usize,
    rho_hat: Vec<Vec<f64>>,
    loglik: f64,
    iterations: usize,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_trace: Option<&'a [TraceEntry]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_sigma: Option<Vec<Vec<f64>>>,
    clamped: usize,
    manifest: RunManifest,
}

pub fn fit(args: &FitArgs) -> Result<i32, CliError> {
    let model = match args.method {
        Method::FullT => {
            if args.family != Family::T {
                return Err(CliError::Usage("--method full-t requires --family t".into()));
            }
            if args.nu.is_some() {
                return Err(CliError::Usage("--method full-t estimates ν; use --nu-lo/--nu-hi".into()));
            }
            None
        }
        _ => Some(model_for(args.family, args.nu)?),
    };
    let mut manifest = RunManifest::new("fit", args, vec![args.seed]);
    let data = manifest.time("ingest", || ingest(&args.input, args.format))?;
    if data.clamped > 0 {
        eprintln!("warning: {} values outside (0, 1) were clamped", data.clamped);
    }
    let cfg = args.step.config();
    let (fit, nu): (FitResult, Option<f64>) = manifest.time("fit", || -> Result<_, CliError> {
        Ok(match model {
            None => {
                let (fit, nu) = fit_t_full(&data.sample, (args.nu_lo, args.nu_hi), &cfg)?;
                (fit, Some(nu.get()))
            }
            Some(model) => {
                let z = transform(&data.sample, model)?;
                let fit = match args.method {
                    Method::Ig => fit_inverse_gradient(&z, model, &cfg)?,
                    Method::Naive => fit_naive_gradient(&z, model, &cfg)?,
                    Method::Approx => fit_approximate(&z, model, cfg.max_iters, cfg.tol_param)?,
                    Method::FullT => unreachable!(),
                };
                (fit, model.nu().map(|v| v.get()))
            }
        })
    })?;
    let out = FitOutput {
        method: args.method,
        family: args.family,
        nu,
        n: data.sample.n(),
        d: data.sample.d(),
        rho_hat: fit.rho_hat.to_rows(),
        loglik: fit.loglik,
        iterations: fit.iterations,
        status: fit.status.as_str(),
        lambda_trace: args.trace.then_some(fit.lambda_trace.as_slice()),
        seed_sigma: args.trace.then(|| fit.seed_sigma.to_rows()),
        clamped: data.clamped,
        manifest,
    };
    emit(args.out.as_deref(), &to_json(&out)?)?;
    Ok(if fit.status.is_converged() { 0 } else { EXIT_NOT_CONVERGED })
}

fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| csv_float(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Dimension of the random correlation matrix drawn from --seed.
    #[arg(long, required_unless_present = "corr")]
    pub dim: Option<usize>,
    /// CSV correlation matrix to sample from instead of a random one.
    #[arg(long, conflicts_with = "dim")]
    pub corr: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Family::Gaussian)]
    pub family: Family,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Number of observations.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the manifest is written next to it as <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SampleSidecar {
    rho: Vec<Vec<f64>>,
    manifest: RunManifest,
}

fn read_correlation(path: &Path) -> Result<CorrelationMatrix, CliError> {
    let data = crate::ingest::read_numeric_rows(path)?;
    Ok(CorrelationMatrix::from_rows(&data)?)
}

pub fn sample(args: &SampleArgs) -> Result<i32, CliError> {
    let model = model_for(args.family, args.nu)?;
    let mut manifest = RunManifest::new("sample", args, vec![args.seed]);
    let (rho, u) = manifest.time("sample", || -> Result<_, CliError> {
        Ok(match (&args.corr, args.dim) {
            (Some(path), _) => {
                let rho = read_correlation(path)?;
                let u = sample_copula(&rho, model, args.n, args.seed)?;
                (rho, u)
            }
            (None, Some(dim)) => generate_case(&CaseSpec { dim, model, n_obs: args.n, seed: args.seed })?,
            (None, None) => unreachable!("clap requires --dim or --corr"),
        })
    })?;
    let header: Vec<String> = (1..=u.d()).map(|j| format!("u{j}")).collect();
    let mut csv = header.join(",") + "\n";
    csv.push_str(&matrix_csv(&u.rows().map(|r| r.to_vec()).collect::<Vec<_>>()));
    write_atomic(&args.out, csv.as_bytes())?;
    let side = SampleSidecar { rho: rho.to_rows(), manifest };
    write_atomic(&sidecar(&args.out, "json"), to_json(&side)?.as_bytes())?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct GenCorrArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the spectrum and manifest go to <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct GenCorrSidecar {
    spectrum: Vec<f64>,
    min_eig: f64,
    manifest: RunManifest,
}

pub fn gen_corr(args: &GenCorrArgs) -> Result<i32, CliError> {
    let mut manifest = RunManifest::new("gen-corr", args, vec![args.seed]);
    let (rho, spectrum) = manifest.time("generate", || random_correlation_with_spectrum(args.dim, args.seed))?;
    write_atomic(&args.out, matrix_csv(&rho.to_rows()).as_bytes())?;
    let side = GenCorrSidecar { min_eig: *spectrum.last().expect("dim >= 2"), spectrum, manifest };
    write_atomic(&sidecar(&args.out, "json"), to_json(&side)?.as_bytes())?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Dimensions to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2,10,25")]
    pub dims: Vec<usize>,
    /// Degrees of freedom to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10,20,50")]
    pub nus: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub cases_per_cell: usize,
    #[arg(long, default_value_t = 100)]
    pub n_obs: usize,
    /// Base seed; case k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, env = "ELLCOP_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Output CSV of per-case records.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON [default: <out>.summary.json].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExperimentSummary {
    cells: Vec<ellcop::experiment::CellSummary>,
    manifest: RunManifest,
}

pub fn experiment(args: &ExperimentArgs) -> Result<i32, CliError> {
    let cfg = SweepConfig {
        dims: args.dims.clone(),
        nus: args.nus.clone(),
        cases_per_cell: args.cases_per_cell,
        n_obs: args.n_obs,
        seed: args.seed,
        step: StepConfig::default(),
    };
    let mut manifest = RunManifest::new("experiment", args, vec![args.seed]);
    let records = manifest.time("sweep", || run_sweep(&cfg, args.jobs))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RECORD_COLUMNS)?;
    for r in &records {
        writer.write_record([
            r.case_id.to_string(),
            r.d.to_string(),
            csv_float(r.nu),
            r.seed.to_string(),
            csv_float(r.min_eig),
            csv_float(r.loglik_ig),
            csv_float(r.loglik_approx),
            csv_float(r.norm_diff),
            r.status_ig.clone(),
            r.status_approx.clone(),
            r.iters_ig.to_string(),
            r.iters_approx.to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(&args.out, &bytes)?;
    let summary_path = args.summary.clone().unwrap_or_else(|| sidecar(&args.out, "summary.json"));
    let summary = ExperimentSummary { cells: summarize(&records), manifest };
    write_atomic(&summary_path, to_json(&summary)?.as_bytes())?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 25)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BenchOutput {
    #[serde(flatten)]
    report: ellcop::experiment::BenchReport,
    manifest: RunManifest,
}

pub fn bench(args: &BenchArgs) -> Result<i32, CliError> {
    let spec = CaseSpec {
        dim: args.dim,
        model: CopulaModel::student_t(args.nu)?,
        n_obs: args.n_obs,
        seed: args.seed,
    };
    let mut manifest = RunManifest::new("bench", args, vec![args.seed]);
    let report = manifest.time("bench", || run_bench(&spec, args.repeats, &StepConfig::default()))?;
    let all_converged = report.statuses.iter().all(|s| s == "Converged");
    emit(args.out.as_deref(), &to_json(&BenchOutput { report, manifest })?)?;
    Ok(if all_converged { 0 } else { EXIT_NOT_CONVERGED })
}
