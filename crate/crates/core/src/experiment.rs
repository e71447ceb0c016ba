//! Synthetic head-to-head experiments: exact fit against the approximate
//! fixed-point fit on random cases, plus fit timing.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{transform, CopulaModel, TransformedSample};
use crate::error::{Error, Result};
use crate::estimate::{fit_approximate, fit_inverse_gradient, FitResult, FitStatus, StepConfig};
use crate::linalg::sym_eigen;
use crate::testgen::{generate_case, CaseSpec};

/// One row of the experiment CSV. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub case_id: u64,
    pub d: usize,
    pub nu: f64,
    pub seed: u64,
    pub min_eig: f64,
    pub loglik_ig: f64,
    pub loglik_approx: f64,
    /// `(loglik_ig - loglik_approx) / n`.
    pub norm_diff: f64,
    pub status_ig: String,
    pub status_approx: String,
    pub iters_ig: usize,
    pub iters_approx: usize,
}

pub const RECORD_COLUMNS: [&str; 12] = [
    "case_id",
    "d",
    "nu",
    "seed",
    "min_eig",
    "loglik_ig",
    "loglik_approx",
    "norm_diff",
    "status_ig",
    "status_approx",
    "iters_ig",
    "iters_approx",
];

const ERROR_STATUS: &str = "Error";

impl ExperimentRecord {
    pub fn both_converged(&self) -> bool {
        let ok = FitStatus::Converged.as_str();
        self.status_ig == ok && self.status_approx == ok
    }
}

/// Everything computed for one case. The fits are `None` when they returned
/// an error.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub record: ExperimentRecord,
    pub sample: Option<TransformedSample>,
    pub ig: Option<FitResult>,
    pub approx: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub nus: Vec<f64>,
    pub cases_per_cell: usize,
    pub n_obs: usize,
    pub seed: u64,
    pub step: StepConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 10, 25],
            nus: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            cases_per_cell: 10,
            n_obs: 100,
            seed: 0,
            step: StepConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Cases in sweep order. Case ids run over cells in `dims × nus` order
    /// and each case's seed is `seed + case_id`.
    pub fn cases(&self) -> Result<Vec<(u64, CaseSpec)>> {
        let mut out = Vec::new();
        let mut id = 0u64;
        for &dim in &self.dims {
            for &nu in &self.nus {
                let model = CopulaModel::student_t(nu)?;
                for _ in 0..self.cases_per_cell {
                    let spec = CaseSpec { dim, model, n_obs: self.n_obs, seed: self.seed.wrapping_add(id) };
                    spec.validate()?;
                    out.push((id, spec));
                    id += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Generates a case and fits it both ways. Errors are recorded in the
/// statuses instead of being returned.
pub fn run_case(case_id: u64, spec: &CaseSpec, cfg: &StepConfig) -> CaseOutcome {
    let nu = spec.model.nu().map_or(f64::INFINITY, |v| v.get());
    let mut record = ExperimentRecord {
        case_id,
        d: spec.dim,
        nu,
        seed: spec.seed,
        min_eig: f64::NAN,
        loglik_ig: f64::NAN,
        loglik_approx: f64::NAN,
        norm_diff: f64::NAN,
        status_ig: ERROR_STATUS.into(),
        status_approx: ERROR_STATUS.into(),
        iters_ig: 0,
        iters_approx: 0,
    };
    let prepared = generate_case(spec).and_then(|(rho, u)| {
        record.min_eig = sym_eigen(rho.as_matrix())?.min_value();
        transform(&u, spec.model)
    });
    let Ok(sample) = prepared else {
        return CaseOutcome { record, sample: None, ig: None, approx: None };
    };
    let ig = fit_inverse_gradient(&sample, spec.model, cfg).ok();
    let approx = fit_approximate(&sample, spec.model, cfg.max_iters, cfg.tol_param).ok();
    if let Some(f) = &ig {
        record.loglik_ig = f.loglik;
        record.status_ig = f.status.as_str().into();
        record.iters_ig = f.iterations;
    }
    if let Some(f) = &approx {
        record.loglik_approx = f.loglik;
        record.status_approx = f.status.as_str().into();
        record.iters_approx = f.iterations;
    }
    record.norm_diff = (record.loglik_ig - record.loglik_approx) / spec.n_obs as f64;
    CaseOutcome { record, sample: Some(sample), ig, approx }
}

/// Runs every case of the sweep on a pool of `jobs` threads. Records come
/// back sorted by case id.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    let cases = cfg.cases()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let mut records: Vec<ExperimentRecord> = pool.install(|| {
        cases
            .par_iter()
            .map(|(id, spec)| run_case(*id, spec, &cfg.step).record)
            .collect()
    });
    records.sort_by_key(|r| r.case_id);
    Ok(records)
}

/// Nearest-rank percentile: the value at 1-based position `⌈p/100 · N⌉` of
/// the sorted data (position 1 for `p = 0`).
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Statistics for one `(d, ν)` cell. `mean`, `p5` and `p95` are over cases
/// where both fits converged; they are `None` if there are none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: usize,
    pub nu: f64,
    pub cases: usize,
    pub both_converged: usize,
    pub mean: Option<f64>,
    pub p5: Option<f64>,
    pub p95: Option<f64>,
    pub nonconvergence_rate_ig: f64,
    pub nonconvergence_rate_approx: f64,
}

pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, f64)> = Vec::new();
    for r in records {
        if !cells.iter().any(|&(d, nu)| d == r.d && nu.total_cmp(&r.nu).is_eq()) {
            cells.push((r.d, r.nu));
        }
    }
    let converged = FitStatus::Converged.as_str();
    cells
        .into_iter()
        .map(|(d, nu)| {
            let rows: Vec<&ExperimentRecord> =
                records.iter().filter(|r| r.d == d && r.nu.total_cmp(&nu).is_eq()).collect();
            let mut diffs: Vec<f64> =
                rows.iter().filter(|r| r.both_converged()).map(|r| r.norm_diff).collect();
            diffs.sort_by(f64::total_cmp);
            let cases = rows.len();
            let rate = |f: fn(&ExperimentRecord) -> &str| {
                rows.iter().filter(|r| f(r) != converged).count() as f64 / cases as f64
            };
            CellSummary {
                d,
                nu,
                cases,
                both_converged: diffs.len(),
                mean: (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64),
                p5: percentile_nearest_rank(&diffs, 5.0),
                p95: percentile_nearest_rank(&diffs, 95.0),
                nonconvergence_rate_ig: rate(|r| &r.status_ig),
                nonconvergence_rate_approx: rate(|r| &r.status_approx),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub dim: usize,
    pub n_obs: usize,
    pub nu: f64,
    pub seed: u64,
    /// Wall-clock seconds per repeat, covering the margin transform and the
    /// fit but not case generation.
    pub times: Vec<f64>,
    pub median: f64,
    pub max: f64,
    pub logliks: Vec<f64>,
    pub iterations: Vec<usize>,
    pub statuses: Vec<String>,
}

/// Times `repeats` exact fits of one generated case.
pub fn run_bench(spec: &CaseSpec, repeats: usize, cfg: &StepConfig) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be positive".into()));
    }
    let (_, u) = generate_case(spec)?;
    let mut times = Vec::with_capacity(repeats);
    let mut logliks = Vec::with_capacity(repeats);
    let mut iterations = Vec::with_capacity(repeats);
    let mut statuses = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let z = transform(&u, spec.model)?;
        let fit = fit_inverse_gradient(&z, spec.model, cfg)?;
        times.push(start.elapsed().as_secs_f64());
        logliks.push(fit.loglik);
        iterations.push(fit.iterations);
        statuses.push(fit.status.as_str().to_string());
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(BenchReport {
        dim: spec.dim,
        n_obs: spec.n_obs,
        nu: spec.model.nu().map_or(f64::INFINITY, |v| v.get()),
        seed: spec.seed,
        median,
        max: *sorted.last().expect("repeats > 0"),
        times,
        logliks,
        iterations,
        statuses,
    })
}
