//! Copula log-densities, the log-likelihood, and its matrix derivatives.
//!
//! Matrix derivatives treat every entry of the argument as an independent
//! variable, so `∂L/∂ρ⁻¹` is the symmetric matrix whose `(i, j)` entry is the
//! partial with respect to `ρ⁻¹_ij` alone. A symmetric perturbation of both
//! `(i, j)` and `(j, i)` by `h` therefore changes `L` by `h (D_ij + D_ji)`.

use crate::copula::{project_to_correlation, CopulaModel, CorrelationMatrix, TransformedSample};
use crate::error::{Error, Result};
use crate::linalg::{inverse_and_logdet, SymMatrix};
use crate::margins::{log_gamma_ratio, Dof};

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn check_sample(sample: &TransformedSample, rho_dim: usize, model: CopulaModel) -> Result<()> {
    check_dim(rho_dim, sample.d())?;
    if sample.model() != model {
        return Err(Error::InvalidSample(format!(
            "sample was transformed under {:?}, evaluated under {model:?}",
            sample.model()
        )));
    }
    Ok(())
}

/// `lnΓ((ν+d)/2) + (d-1) lnΓ(ν/2) - d lnΓ((ν+1)/2)`, written as gamma
/// ratios so it stays accurate for very large `ν`.
fn t_log_constant(d: usize, nu: f64) -> f64 {
    let d = d as f64;
    let half_nu = 0.5 * nu;
    -log_gamma_ratio(half_nu, 0.5 * d) + d * log_gamma_ratio(half_nu, 0.5)
}

/// Log-density of the Gaussian copula at a transformed point `g = Φ⁻¹(u)`.
pub fn gaussian_log_density(g_row: &[f64], rho: &CorrelationMatrix) -> Result<f64> {
    check_dim(rho.dim(), g_row.len())?;
    let mut scratch = Vec::with_capacity(g_row.len());
    let q = rho.cholesky().quad_form_inv(g_row, &mut scratch);
    let gg: f64 = g_row.iter().map(|v| v * v).sum();
    Ok(-0.5 * rho.log_det() - 0.5 * q + 0.5 * gg)
}

/// Log-density of the Student's t copula at a transformed point `s = t_ν⁻¹(u)`.
pub fn t_log_density(s_row: &[f64], rho: &CorrelationMatrix, nu: Dof) -> Result<f64> {
    let d = rho.dim();
    check_dim(d, s_row.len())?;
    let nu = nu.get();
    let mut scratch = Vec::with_capacity(d);
    let q = rho.cholesky().quad_form_inv(s_row, &mut scratch);
    let margins: f64 = s_row.iter().map(|v| (v * v / nu).ln_1p()).sum();
    Ok(t_log_constant(d, nu) - 0.5 * rho.log_det() - 0.5 * (nu + d as f64) * (q / nu).ln_1p()
        + 0.5 * (nu + 1.0) * margins)
}

/// Sums the quadratic forms `z_tᵀ ρ⁻¹ z_t` (Gaussian) or `ln(1 + z_tᵀ ρ⁻¹ z_t / ν)` (t),
/// and optionally accumulates the weighted scatter used by `𝒟(ρ)`.
struct RowPass {
    loglik: f64,
    /// Σ_t w_t z_t z_tᵀ with w_t = 1 (Gaussian) or 1/(1 + q_t/ν) (t); lower
    /// triangle, row-major.
    weighted_scatter: Option<Vec<f64>>,
}

fn row_pass(
    sample: &TransformedSample,
    rho: &CorrelationMatrix,
    model: CopulaModel,
    want_scatter: bool,
) -> RowPass {
    let d = sample.d();
    let n = sample.n() as f64;
    let chol = rho.cholesky();
    let mut scratch = Vec::with_capacity(d);
    match model {
        CopulaModel::Gaussian => {
            let q_sum: f64 = sample.rows().map(|z| chol.quad_form_inv(z, &mut scratch)).sum();
            RowPass {
                loglik: -0.5 * n * rho.log_det() - 0.5 * q_sum + sample.margin_term(),
                // the Gaussian weights are all one: reuse the cached scatter
                weighted_scatter: want_scatter.then(|| sample.scatter().as_slice().to_vec()),
            }
        }
        CopulaModel::StudentT { nu } => {
            let nu = nu.get();
            let mut scatter = want_scatter.then(|| vec![0.0; d * d]);
            let mut log_sum = 0.0;
            for z in sample.rows() {
                let q = chol.quad_form_inv(z, &mut scratch);
                log_sum += (q / nu).ln_1p();
                if let Some(acc) = scatter.as_mut() {
                    let w = 1.0 / (1.0 + q / nu);
                    for i in 0..d {
                        let wi = w * z[i];
                        for j in 0..=i {
                            acc[i * d + j] += wi * z[j];
                        }
                    }
                }
            }
            let loglik = n * t_log_constant(d, nu) - 0.5 * n * rho.log_det()
                - 0.5 * (nu + d as f64) * log_sum
                + sample.margin_term();
            RowPass { loglik, weighted_scatter: scatter }
        }
    }
}

/// `L(ρ) = Σ_t log c(u_t; ρ)`.
pub fn log_likelihood(
    sample: &TransformedSample,
    rho: &CorrelationMatrix,
    model: CopulaModel,
) -> Result<f64> {
    check_sample(sample, rho.dim(), model)?;
    Ok(row_pass(sample, rho, model, false).loglik)
}

fn assemble_d_matrix(
    sample: &TransformedSample,
    rho: &CorrelationMatrix,
    model: CopulaModel,
    scatter: &[f64],
) -> SymMatrix {
    let d = sample.d();
    let half_n = 0.5 * sample.n() as f64;
    let c = match model {
        CopulaModel::Gaussian => 0.5,
        CopulaModel::StudentT { nu } => (nu.get() + d as f64) / (2.0 * nu.get()),
    };
    SymMatrix::from_lower_fn(d, |i, j| half_n * rho.get(i, j) - c * scatter[i * d + j])
}

/// `𝒟(ρ) = ∂L/∂ρ⁻¹`:
/// Gaussian `(n/2)ρ - ½ Σ g gᵀ`; t `(n/2)ρ - (ν+d)/(2ν) Σ s sᵀ / (1 + sᵀρ⁻¹s/ν)`.
pub fn d_matrix(
    sample: &TransformedSample,
    rho: &CorrelationMatrix,
    model: CopulaModel,
) -> Result<SymMatrix> {
    check_sample(sample, rho.dim(), model)?;
    let pass = row_pass(sample, rho, model, true);
    let scatter = pass.weighted_scatter.expect("scatter requested");
    Ok(assemble_d_matrix(sample, rho, model, &scatter))
}

/// Everything one inverse-gradient iteration needs at the current `Σ`.
#[derive(Debug, Clone)]
pub(crate) struct DirectionEval {
    pub rho: CorrelationMatrix,
    /// `L*(Σ) = L(Π(Σ))`.
    pub loglik: f64,
    /// `V = -∂L*/∂Σ⁻¹`.
    pub direction: SymMatrix,
}

pub(crate) fn evaluate_direction(
    sigma: &SymMatrix,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<DirectionEval> {
    check_sample(sample, sigma.dim(), model)?;
    let rho = project_to_correlation(sigma)?;
    let pass = row_pass(sample, &rho, model, true);
    let scatter = pass.weighted_scatter.expect("scatter requested");
    let dm = assemble_d_matrix(sample, &rho, model, &scatter);

    let d = sigma.dim();
    let rho_inv = rho.inverse();
    // k = diag(𝒟 ρ⁻¹)
    let k: Vec<f64> = (0..d)
        .map(|i| dm.row(i).iter().zip(rho_inv.row(i)).map(|(a, b)| a * b).sum())
        .collect();
    // 𝒟 - ρ diag(k) ρ, then the congruence by A⁻¹ = diag(√Σ_ii), negated
    let a_inv: Vec<f64> = sigma.diag().iter().map(|v| v.sqrt()).collect();
    let direction = SymMatrix::from_lower_fn(d, |i, j| {
        let inner: f64 = (0..d).map(|l| rho.get(i, l) * k[l] * rho.get(l, j)).sum();
        -a_inv[i] * (dm.get(i, j) - inner) * a_inv[j]
    });
    Ok(DirectionEval { rho, loglik: pass.loglik, direction })
}

/// The inverse-gradient direction `V = -∂L*/∂Σ⁻¹` where `L* = L ∘ Π`:
/// `V = -A⁻¹ (𝒟(ρ) - ρ diag(𝒟(ρ) ρ⁻¹) ρ) A⁻¹` with `ρ = Π(Σ)`.
pub fn inverse_gradient_direction(
    sigma: &SymMatrix,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<SymMatrix> {
    Ok(evaluate_direction(sigma, sample, model)?.direction)
}

/// `∂L*/∂Σ = -Σ⁻¹ (∂L*/∂Σ⁻¹) Σ⁻¹ = Σ⁻¹ V Σ⁻¹`.
pub fn sigma_gradient(
    sigma: &SymMatrix,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<SymMatrix> {
    let v = inverse_gradient_direction(sigma, sample, model)?;
    let (sigma_inv, _) = inverse_and_logdet(sigma)?;
    Ok(v.congruence(&sigma_inv))
}

/// `L*(Σ) = L(Π(Σ))`.
pub fn projected_log_likelihood(
    sigma: &SymMatrix,
    sample: &TransformedSample,
    model: CopulaModel,
) -> Result<f64> {
    let rho = project_to_correlation(sigma)?;
    log_likelihood(sample, &rho, model)
}
