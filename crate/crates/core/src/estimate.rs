//! Correlation-matrix estimators.
//!
//! * [`fit_inverse_gradient`]: exact maximum likelihood. Iterates
//!   `Σ ← Σ + λ V` with `V = -∂L*/∂Σ⁻¹`, `L* = L ∘ Π`, and an adaptive step
//!   chosen among `{k₁λ, λ, k₂λ}`.
//! * [`fit_approximate`]: the projected fixed-point baseline. For the
//!   Gaussian copula this is the projected moment matrix.
//! * [`fit_naive_gradient`]: plain ascent in the coordinates of `Σ⁻¹`, kept
//!   as a comparison baseline.
//! * [`fit_t_full`]: profile likelihood over `ν` on top of the exact fit.

use serde::{Deserialize, Serialize};

use crate::copula::{
    evaluate_direction, project_to_correlation, transform, CopulaModel, CorrelationMatrix,
    DirectionEval, PseudoSample, TransformedSample,
};
use crate::copula::log_likelihood;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, inverse_and_logdet, SymMatrix};
use crate::margins::Dof;

/// Candidates whose log-likelihoods agree within this are treated as ties;
/// the larger step wins.
const TIE_TOLERANCE: f64 = 1e-13;

/// Adaptive step-size and stopping configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Initial step. `None` means `1/n`.
    pub lambda0: Option<f64>,
    pub k1: f64,
    pub k2: f64,
    pub lambda_min: f64,
    pub max_iters: usize,
    /// A step is final when no entry of `Π(Σ)` moves by this much and `L*`
    /// gains less than `tol_loglik`.
    pub tol_param: f64,
    pub tol_loglik: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            lambda0: None,
            k1: 0.5,
            k2: 4.0 / 3.0,
            lambda_min: 1e-14,
            max_iters: 10_000,
            tol_param: 1e-9,
            tol_loglik: 1e-11,
        }
    }
}

impl StepConfig {
    /// Initial step for a sample of size `n`.
    pub fn initial_step(&self, n: usize) -> f64 {
        self.lambda0.unwrap_or(1.0 / n as f64)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let lambda0 = self.initial_step(n);
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return fail(format!("lambda0 must be positive, got {lambda0}"));
        }
        if !(self.k1 > 0.0 && self.k1 < 1.0 && self.k2 > 1.0 && self.k2.is_finite()) {
            return fail(format!("need 0 < k1 < 1 < k2, got k1={} k2={}", self.k1, self.k2));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < lambda0) {
            return fail(format!(
                "need 0 < lambda_min < lambda0, got {} and {lambda0}",
                self.lambda_min
            ));
        }
        if !(self.tol_param > 0.0 && self.tol_loglik > 0.0) {
            return fail("tolerances must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    MaxIters,
    StepUnderflow,
    Diverged,
}

impl FitStatus {
    pub fn is_converged(self) -> bool {
        self == FitStatus::Converged
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Converged => "Converged",
            FitStatus::MaxIters => "MaxIters",
            FitStatus::StepUnderflow => "StepUnderflow",
            FitStatus::Diverged => "Diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    InverseGradient,
    NaiveGradient,
    Approximate,
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub lambda: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub method: FitMethod,
    pub rho_hat: CorrelationMatrix,
    /// `L(rho_hat)`.
    pub loglik: f64,
    pub iterations: usize,
    pub status: FitStatus,
    pub lambda_trace: Vec<TraceEntry>,
    /// The starting matrix `Σ₀`.
    pub seed_sigma: SymMatrix,
    /// Final iterate; `rho_hat = Π(sigma_hat)`.
    pub sigma_hat: SymMatrix,
}

/// `Σ₀ = (1/n) Σ_t z_t z_tᵀ`, regularized by `εI` with `ε = 1e-8·tr/d` when
/// the moment matrix is not numerically positive definite.
pub fn initial_sigma(sample: &TransformedSample) -> Result<SymMatrix> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 observations, got {n}")));
    }
    let sigma = sample.scatter().scale(1.0 / n as f64);
    if cholesky(&sigma).is_ok() {
        return Ok(sigma);
    }
    let d = sigma.dim();
    let eps = 1e-8 * sigma.trace() / d as f64;
    let regularized = sigma.add_scaled(eps, &SymMatrix::identity(d));
    match cholesky(&regularized) {
        Ok(_) => Ok(regularized),
        Err(_) => Err(Error::DegenerateSample(format!(
            "moment matrix stays singular after adding {eps:e}·I (n = {n}, d = {d})"
        ))),
    }
}

/// Unconstrained Gaussian maximizer `(1/n) Σ_t g_t g_tᵀ`; the same matrix
/// as [`initial_sigma`].
pub fn gaussian_closed_form_sigma(sample: &TransformedSample) -> Result<SymMatrix> {
    initial_sigma(sample)
}

/// One step of the approximate fixed-point map, before projection:
/// `(1 + d/ν) (1/n) Σ_t s_t s_tᵀ / (1 + s_tᵀ ρ⁻¹ s_t / ν)`, or the moment
/// matrix for the Gaussian copula.
pub fn fixed_point_update(sample: &TransformedSample, rho: &CorrelationMatrix) -> Result<SymMatrix> {
    let d = sample.d();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.dim() });
    }
    let n = sample.n() as f64;
    match sample.model() {
        CopulaModel::Gaussian => Ok(sample.scatter().scale(1.0 / n)),
        CopulaModel::StudentT { nu } => {
            let nu = nu.get();
            let chol = rho.cholesky();
            let mut scratch = Vec::with_capacity(d);
            let mut acc = vec![0.0; d * d];
            for s in sample.rows() {
                let w = 1.0 / (1.0 + chol.quad_form_inv(s, &mut scratch) / nu);
                for i in 0..d {
                    for j in 0..=i {
                        acc[i * d + j] += w * s[i] * s[j];
                    }
                }
            }
            let c = (1.0 + d as f64 / nu) / n;
            Ok(SymMatrix::from_lower_fn(d, |i, j| c * acc[i * d + j]))
        }
    }
}

fn check_model(sample: &TransformedSample, model: CopulaModel) -> Result<()> {
    if sample.model() == model {
        Ok(())
    } else {
        Err(Error::InvalidSample(format!(
            "sample was transformed under {:?}, fit requested under {model:?}",
            sample.model()
        )))
    }
}

/// The approximate method: iterate the fixed-point map with a projection
/// after every step, until no entry of `ρ` moves by more than `tol`.
///
/// Returns `Diverged` if an iterate is not positive definite and `MaxIters`
/// if the iteration does not settle.
pub fn fit_approximate(
    sample: &TransformedSample,
    model: CopulaModel,
    max_iters: usize,
    tol: f64,
) -> Result<FitResult> {
    check_model(sample, model)?;
    let seed_sigma = initial_sigma(sample)?;
    let mut rho = project_to_correlation(&seed_sigma)?;
    let mut sigma = seed_sigma.clone();
    let n = sample.n();
    let mut trace = Vec::new();
    let mut status = FitStatus::MaxIters;
    let mut iterations = 0;

    if model == CopulaModel::Gaussian {
        status = FitStatus::Converged;
    } else {
        for m in 1..=max_iters {
            iterations = m;
            let next_sigma = fixed_point_update(sample, &rho)?;
            let next_rho = match cholesky(&next_sigma)
                .map_err(Error::from)
                .and_then(|_| project_to_correlation(&next_sigma))
            {
                Ok(r) => r,
                Err(_) => {
                    status = FitStatus::Diverged;
                    break;
                }
            };
            let change = next_rho.as_matrix().max_abs_diff(rho.as_matrix());
            rho = next_rho;
            sigma = next_sigma;
            trace.push(TraceEntry {
                iteration: m,
                // one fixed-point step is an unprojected step of size 2/n
                lambda: 2.0 / n as f64,
                loglik: log_likelihood(sample, &rho, model)?,
            });
            if change < tol {
                status = FitStatus::Converged;
                break;
            }
        }
    }
    let loglik = log_likelihood(sample, &rho, model)?;
    Ok(FitResult {
        method: FitMethod::Approximate,
        rho_hat: rho,
        loglik,
        iterations,
        status,
        lambda_trace: trace,
        seed_sigma,
        sigma_hat: sigma,
    })
}

/// State of an ascent run: the current iterate and what was evaluated there.
struct Iterate {
    sigma: SymMatrix,
    eval: DirectionEval,
}

/// Candidate `Σ` after a step of size `lambda` along `V`.
fn propose(method: FitMethod, it: &Iterate, sigma_inv: Option<&SymMatrix>, lambda: f64) -> Option<SymMatrix> {
    match method {
        FitMethod::InverseGradient => {
            let cand = it.sigma.add_scaled(lambda, &it.eval.direction);
            cholesky(&cand).ok().map(|_| cand)
        }
        FitMethod::NaiveGradient => {
            // Σ⁻¹ ← Σ⁻¹ + λ ∂L*/∂Σ⁻¹ = Σ⁻¹ - λ V
            let inv = sigma_inv.expect("naive step needs Σ⁻¹");
            let cand_inv = inv.add_scaled(-lambda, &it.eval.direction);
            let (cand, _) = inverse_and_logdet(&cand_inv).ok()?;
            cholesky(&cand).ok().map(|_| cand)
        }
        FitMethod::Approximate => unreachable!("not an ascent method"),
    }
}

struct Candidate {
    lambda: f64,
    sigma: SymMatrix,
    rho: CorrelationMatrix,
    loglik: f64,
}

fn evaluate_candidate(
    method: FitMethod,
    it: &Iterate,
    sigma_inv: Option<&SymMatrix>,
    lambda: f64,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<Option<Candidate>> {
    let Some(sigma) = propose(method, it, sigma_inv, lambda) else {
        return Ok(None);
    };
    let Ok(rho) = project_to_correlation(&sigma) else {
        return Ok(None);
    };
    let loglik = log_likelihood(sample, &rho, model)?;
    if !loglik.is_finite() {
        return Ok(None);
    }
    Ok(Some(Candidate { lambda, sigma, rho, loglik }))
}

fn fit_ascent(
    method: FitMethod,
    sample: &TransformedSample,
    model: CopulaModel,
    cfg: &StepConfig,
) -> Result<FitResult> {
    check_model(sample, model)?;
    cfg.validate(sample.n())?;
    let seed_sigma = initial_sigma(sample)?;
    let mut it = Iterate {
        eval: evaluate_direction(&seed_sigma, sample, model)?,
        sigma: seed_sigma.clone(),
    };
    let mut lambda = cfg.initial_step(sample.n());
    let mut trace = Vec::new();
    let mut iterations = 0;

    let finish = |it: Iterate, iterations, status, trace| FitResult {
        method,
        loglik: it.eval.loglik,
        rho_hat: it.eval.rho,
        iterations,
        status,
        lambda_trace: trace,
        seed_sigma: seed_sigma.clone(),
        sigma_hat: it.sigma,
    };

    if it.eval.direction.max_abs() == 0.0 {
        return Ok(finish(it, 0, FitStatus::Converged, trace));
    }

    while iterations < cfg.max_iters {
        let sigma_inv = match method {
            FitMethod::NaiveGradient => Some(inverse_and_logdet(&it.sigma)?.0),
            _ => None,
        };
        let current = it.eval.loglik;
        let accepted = loop {
            let mut best: Option<Candidate> = None;
            let mut smallest_move = None;
            // larger steps first, so ties keep the larger one
            for step in [cfg.k2 * lambda, lambda, cfg.k1 * lambda] {
                let Some(cand) = evaluate_candidate(method, &it, sigma_inv.as_ref(), step, sample, model)?
                else {
                    continue;
                };
                if step == cfg.k1 * lambda {
                    smallest_move = Some(cand.rho.as_matrix().max_abs_diff(it.eval.rho.as_matrix()));
                }
                if cand.loglik > current
                    && best.as_ref().is_none_or(|b| cand.loglik > b.loglik + TIE_TOLERANCE)
                {
                    best = Some(cand);
                }
            }
            if let Some(best) = best {
                break best;
            }
            // No candidate improves. Once even the smallest trial move is
            // below the parameter tolerance, the iterate is stationary.
            if smallest_move.is_some_and(|m| m < cfg.tol_param) {
                return Ok(finish(it, iterations, FitStatus::Converged, trace));
            }
            lambda *= cfg.k1;
            if lambda < cfg.lambda_min {
                return Ok(finish(it, iterations, FitStatus::StepUnderflow, trace));
            }
        };

        iterations += 1;
        lambda = accepted.lambda;
        let change = accepted.rho.as_matrix().max_abs_diff(it.eval.rho.as_matrix());
        let gain = accepted.loglik - current;
        debug_assert!(gain > 0.0);
        trace.push(TraceEntry { iteration: iterations, lambda, loglik: accepted.loglik });
        it = Iterate {
            eval: evaluate_direction(&accepted.sigma, sample, model)?,
            sigma: accepted.sigma,
        };
        if change < cfg.tol_param && gain < cfg.tol_loglik {
            return Ok(finish(it, iterations, FitStatus::Converged, trace));
        }
    }
    Ok(finish(it, iterations, FitStatus::MaxIters, trace))
}

/// Exact maximum-likelihood estimate of the copula correlation matrix.
///
/// Starting from the moment matrix `Σ₀`, each iteration computes
/// `ρ = Π(Σ)` and the direction `V = -∂L*/∂Σ⁻¹`, then tries the steps
/// `k₂λ`, `λ` and `k₁λ`. The best candidate that is positive definite and
/// strictly increases `L*` is accepted and its step becomes the new `λ`. If
/// none qualifies, `λ` is multiplied by `k₁` and the three trials repeat.
///
/// The fit stops once an accepted step changes `ρ` by less than `tol_param`
/// and `L*` by less than `tol_loglik`. Requiring both matters near the
/// boundary of the correlation space, where `ρ` can barely move while `L*`
/// still rises steeply.
///
/// Failures to converge are reported through [`FitResult::status`], not as
/// errors.
pub fn fit_inverse_gradient(
    sample: &TransformedSample,
    model: CopulaModel,
    cfg: &StepConfig,
) -> Result<FitResult> {
    fit_ascent(FitMethod::InverseGradient, sample, model, cfg)
}

/// Gradient ascent on the entries of `Σ⁻¹`, with the same step-size rule and
/// stopping criteria as [`fit_inverse_gradient`].
pub fn fit_naive_gradient(
    sample: &TransformedSample,
    model: CopulaModel,
    cfg: &StepConfig,
) -> Result<FitResult> {
    fit_ascent(FitMethod::NaiveGradient, sample, model, cfg)
}

/// Recomputes the accepted iterates of an ascent fit from its seed and
/// trace. Returns `(Σ_m, L*(Σ_m))` for `m = 0..=iterations`.
pub fn replay_trace(
    result: &FitResult,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<Vec<(SymMatrix, f64)>> {
    if !matches!(result.method, FitMethod::InverseGradient | FitMethod::NaiveGradient) {
        return Err(Error::InvalidConfig("only ascent fits can be replayed".into()));
    }
    let mut sigma = result.seed_sigma.clone();
    let mut eval = evaluate_direction(&sigma, sample, model)?;
    let mut out = vec![(sigma.clone(), eval.loglik)];
    for entry in &result.lambda_trace {
        let inv = match result.method {
            FitMethod::NaiveGradient => Some(inverse_and_logdet(&sigma)?.0),
            _ => None,
        };
        let it = Iterate { sigma, eval };
        sigma = propose(result.method, &it, inv.as_ref(), entry.lambda)
            .ok_or(Error::Linalg(crate::linalg::LinalgError::NotPositiveDefinite { pivot: 0 }))?;
        eval = evaluate_direction(&sigma, sample, model)?;
        out.push((sigma.clone(), eval.loglik));
    }
    Ok(out)
}

/// Joint estimate of `(ρ, ν)` for the Student's t copula by golden-section
/// search of the profile log-likelihood `ν ↦ max_ρ L(ρ; ν)` over `[lo, hi]`.
///
/// The search stops once the bracket is narrower than `1e-3·ν̂`. The
/// returned pair is the best of every probe evaluated, bracket ends
/// included.
pub fn fit_t_full(
    sample: &PseudoSample,
    nu_bracket: (f64, f64),
    cfg: &StepConfig,
) -> Result<(FitResult, Dof)> {
    let (lo, hi) = nu_bracket;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidConfig(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    golden_section_max(lo, hi, |nu| {
        let model = CopulaModel::student_t(nu)?;
        let z = transform(sample, model)?;
        Ok((fit_inverse_gradient(&z, model, cfg)?, Dof::new(nu)?))
    })
}

/// Golden-section search for the maximum of `f(x).0.loglik` over
/// `[lo, hi]`, stopping once the bracket is narrower than `1e-3·x̂`.
/// Returns the best probe, bracket ends included.
fn golden_section_max(
    lo: f64,
    hi: f64,
    f: impl Fn(f64) -> Result<(FitResult, Dof)>,
) -> Result<(FitResult, Dof)> {
    let mut best: Option<(FitResult, Dof)> = None;
    let mut probe = |x: f64| -> Result<f64> {
        let p = f(x)?;
        let ll = p.0.loglik;
        if best.as_ref().is_none_or(|b| ll > b.0.loglik) {
            best = Some(p);
        }
        Ok(ll)
    };

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let f_lo = probe(lo)?;
    let f_hi = probe(hi)?;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = probe(x1)?;
    let mut f2 = probe(x2)?;
    if f_lo > f1.max(f2) && f_hi > f1.max(f2) {
        return Err(Error::BracketError { lo, hi });
    }
    for _ in 0..200 {
        let center = if f1 >= f2 { x1 } else { x2 };
        if b - a < 1e-3 * center {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = probe(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = probe(x2)?;
        }
    }
    Ok(best.expect("at least four probes were evaluated"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{d_matrix, sample_copula};

    fn t5() -> CopulaModel {
        CopulaModel::student_t(5.0).unwrap()
    }

    fn rho3() -> CorrelationMatrix {
        CorrelationMatrix::from_rows(&[
            vec![1.0, 0.6, -0.3],
            vec![0.6, 1.0, 0.2],
            vec![-0.3, 0.2, 1.0],
        ])
        .unwrap()
    }

    fn sample(model: CopulaModel, n: usize, seed: u64) -> TransformedSample {
        let u = sample_copula(&rho3(), model, n, seed).unwrap();
        transform(&u, model).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(StepConfig::default().validate(100).is_ok());
        let bad = StepConfig { k1: 1.2, ..Default::default() };
        assert!(bad.validate(100).is_err());
        let bad = StepConfig { k2: 0.9, ..Default::default() };
        assert!(bad.validate(100).is_err());
        let bad = StepConfig { lambda0: Some(1e-15), ..Default::default() };
        assert!(bad.validate(100).is_err());
        assert_eq!(StepConfig::default().initial_step(100), 0.01);
    }

    #[test]
    fn initial_sigma_regularizes_rank_one() {
        let z = vec![1.0, 2.0, -1.0, -2.0];
        let s = TransformedSample::from_values(2, z, CopulaModel::Gaussian).unwrap();
        let sigma = initial_sigma(&s).unwrap();
        assert!(cholesky(&sigma).is_ok());
        let eps = 1e-8 * 5.0 / 2.0;
        assert!((sigma.get(0, 0) - (1.0 + eps)).abs() < 1e-15);
        assert_eq!(sigma.get(0, 1), 2.0);
    }

    #[test]
    fn initial_sigma_rejects_degenerate() {
        let z = vec![0.0; 6];
        let s = TransformedSample::from_values(2, z, CopulaModel::Gaussian).unwrap();
        assert!(matches!(initial_sigma(&s), Err(Error::DegenerateSample(_))));
        let one = TransformedSample::from_values(2, vec![1.0, 0.5], CopulaModel::Gaussian).unwrap();
        assert!(matches!(initial_sigma(&one), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn initial_sigma_large_iid_sample_near_identity() {
        let n = 20_000;
        let u = sample_copula(&CorrelationMatrix::identity(4), CopulaModel::Gaussian, n, 3).unwrap();
        let z = transform(&u, CopulaModel::Gaussian).unwrap();
        let sigma = initial_sigma(&z).unwrap();
        assert!(sigma.max_abs_diff(&SymMatrix::identity(4)) < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_approximate_is_projected_moment_matrix() {
        let z = sample(CopulaModel::Gaussian, 200, 1);
        let fit = fit_approximate(&z, CopulaModel::Gaussian, 100, 1e-10).unwrap();
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.status, FitStatus::Converged);
        let want = project_to_correlation(&gaussian_closed_form_sigma(&z).unwrap()).unwrap();
        assert_eq!(fit.rho_hat, want);
    }

    #[test]
    fn approximate_converges_in_one_step_from_fixed_point() {
        let z = sample(t5(), 300, 2);
        let first = fit_approximate(&z, t5(), 10_000, 1e-13).unwrap();
        assert_eq!(first.status, FitStatus::Converged);
        // the fixed point maps to itself
        let again = project_to_correlation(&fixed_point_update(&z, &first.rho_hat).unwrap()).unwrap();
        assert!(again.as_matrix().max_abs_diff(first.rho_hat.as_matrix()) < 1e-12);
    }

    #[test]
    fn zero_direction_converges_immediately() {
        // rows ±(1,1), ±(1,-1): moment matrix is the identity and is already
        // the Gaussian maximizer
        let z = vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        let s = TransformedSample::from_values(2, z, CopulaModel::Gaussian).unwrap();
        for fit in [
            fit_inverse_gradient(&s, CopulaModel::Gaussian, &StepConfig::default()).unwrap(),
            fit_naive_gradient(&s, CopulaModel::Gaussian, &StepConfig::default()).unwrap(),
        ] {
            assert_eq!(fit.iterations, 0);
            assert_eq!(fit.status, FitStatus::Converged);
            assert_eq!(fit.rho_hat.as_matrix(), &SymMatrix::identity(2));
        }
    }

    #[test]
    fn inverse_gradient_monotone_and_consistent() {
        for model in [CopulaModel::Gaussian, t5(), CopulaModel::student_t(0.5).unwrap()] {
            let z = sample(model, 100, 9);
            let fit = fit_inverse_gradient(&z, model, &StepConfig::default()).unwrap();
            assert_eq!(fit.status, FitStatus::Converged, "{model:?}");
            let recomputed = log_likelihood(&z, &fit.rho_hat, model).unwrap();
            assert!((fit.loglik - recomputed).abs() < 1e-9);
            assert!(fit.lambda_trace.windows(2).all(|w| w[1].loglik > w[0].loglik));
            let approx = fit_approximate(&z, model, 10_000, 1e-10).unwrap();
            assert!(fit.loglik >= approx.loglik - 1e-8);
        }
    }

    #[test]
    fn replay_reproduces_trace() {
        let z = sample(t5(), 100, 4);
        let fit = fit_inverse_gradient(&z, t5(), &StepConfig::default()).unwrap();
        let replay = replay_trace(&fit, &z, t5()).unwrap();
        assert_eq!(replay.len(), fit.lambda_trace.len() + 1);
        for (entry, (_, ll)) in fit.lambda_trace.iter().zip(&replay[1..]) {
            assert_eq!(entry.loglik, *ll);
        }
        assert_eq!(&replay.last().unwrap().0, &fit.sigma_hat);
    }

    #[test]
    fn naive_and_inverse_gradient_agree() {
        let z = sample(t5(), 150, 6);
        let ig = fit_inverse_gradient(&z, t5(), &StepConfig::default()).unwrap();
        let naive = fit_naive_gradient(&z, t5(), &StepConfig::default()).unwrap();
        assert!(naive.status.is_converged(), "{:?}", naive.status);
        assert!(ig.rho_hat.as_matrix().max_abs_diff(naive.rho_hat.as_matrix()) < 1e-3);
        let replay = replay_trace(&naive, &z, t5()).unwrap();
        assert_eq!(replay.last().unwrap().1, naive.loglik);
    }

    #[test]
    fn unprojected_step_recovers_fixed_point_map() {
        let z = sample(t5(), 60, 8);
        let rho = rho3();
        let step = rho
            .as_matrix()
            .add_scaled(-2.0 / z.n() as f64, &d_matrix(&z, &rho, t5()).unwrap());
        let fp = fixed_point_update(&z, &rho).unwrap();
        assert!(step.max_abs_diff(&fp) < 1e-12);
    }

    #[test]
    fn model_mismatch_rejected() {
        let z = sample(t5(), 50, 1);
        assert!(fit_inverse_gradient(&z, CopulaModel::Gaussian, &StepConfig::default()).is_err());
    }

    fn fake_probe(x: f64, ll: f64) -> Result<(FitResult, Dof)> {
        let z = sample(CopulaModel::Gaussian, 20, 1);
        let mut fit = fit_approximate(&z, CopulaModel::Gaussian, 1, 1e-9)?;
        fit.loglik = ll;
        Ok((fit, Dof::new(x)?))
    }

    #[test]
    fn golden_section_finds_interior_peak() {
        let (_, x) = golden_section_max(1.0, 50.0, |x| fake_probe(x, -(x - 12.0).powi(2))).unwrap();
        assert!((x.get() - 12.0).abs() < 1e-3 * 12.0);
    }

    #[test]
    fn golden_section_rejects_valley() {
        let err = golden_section_max(1.0, 50.0, |x| fake_probe(x, (x - 25.0).powi(2))).unwrap_err();
        assert_eq!(err, Error::BracketError { lo: 1.0, hi: 50.0 });
    }

    #[test]
    fn t_full_rejects_bad_bracket() {
        let u = sample_copula(&rho3(), t5(), 50, 1).unwrap();
        assert!(fit_t_full(&u, (5.0, 2.0), &StepConfig::default()).is_err());
        assert!(fit_t_full(&u, (0.0, 2.0), &StepConfig::default()).is_err());
    }
}
