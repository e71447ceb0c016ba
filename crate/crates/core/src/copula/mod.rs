//! Gaussian and Student's t copulas: parameter space, data containers,
//! likelihoods and their matrix derivatives, and samplers.

mod likelihood;
mod sampler;

pub use likelihood::{
    d_matrix, gaussian_log_density, inverse_gradient_direction, log_likelihood,
    projected_log_likelihood, sigma_gradient, t_log_density,
};
pub(crate) use likelihood::{evaluate_direction, DirectionEval};
pub use sampler::sample_copula;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CholeskyFactor, SymMatrix};
use crate::margins::{norm_quantile, t_quantile, Dof};

/// Symmetric positive-definite matrix with unit diagonal.
///
/// The Cholesky factor is computed once at construction; it is both the
/// proof of definiteness and the workhorse for quadratic forms.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    m: SymMatrix,
    chol: CholeskyFactor,
}

impl PartialEq for CorrelationMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        let m = SymMatrix::identity(dim);
        let chol = cholesky(&m).expect("identity is positive definite");
        Self { m, chol }
    }

    /// Validates a candidate correlation matrix. Diagonal entries within
    /// `1e-12` of one are snapped to exactly one.
    pub fn new(m: SymMatrix) -> Result<Self> {
        let dim = m.dim();
        for i in 0..dim {
            let v = m.get(i, i);
            if (v - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {v}, expected 1"
                )));
            }
        }
        for i in 0..dim {
            for j in 0..i {
                let v = m.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
            }
        }
        let m = SymMatrix::from_lower_fn(dim, |i, j| if i == j { 1.0 } else { m.get(i, j) });
        let chol = cholesky(&m)?;
        Ok(Self { m, chol })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn as_matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    pub fn inverse(&self) -> SymMatrix {
        self.chol.inverse()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.m.to_rows()
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrelationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = SymMatrix::deserialize(d)?;
        CorrelationMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Copula family. The Student's t copula carries its degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaModel {
    Gaussian,
    StudentT { nu: Dof },
}

impl CopulaModel {
    pub fn student_t(nu: f64) -> Result<Self> {
        Ok(CopulaModel::StudentT { nu: Dof::new(nu)? })
    }

    pub fn nu(&self) -> Option<Dof> {
        match *self {
            CopulaModel::Gaussian => None,
            CopulaModel::StudentT { nu } => Some(nu),
        }
    }

    /// Margin quantile: `Φ⁻¹` or `t_ν⁻¹`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(match *self {
            CopulaModel::Gaussian => norm_quantile(u)?,
            CopulaModel::StudentT { nu } => t_quantile(u, nu)?,
        })
    }
}

/// `n x d` pseudo-observations, every entry strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    n: usize,
    d: usize,
    u: Vec<f64>,
}

impl PseudoSample {
    /// `u` holds `n * d` values in row-major order.
    pub fn new(d: usize, u: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSample(format!("dimension must be at least 2, got {d}")));
        }
        if u.is_empty() || u.len() % d != 0 {
            return Err(Error::InvalidSample(format!(
                "{} values do not form rows of length {d}",
                u.len()
            )));
        }
        if let Some(pos) = u.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidSample(format!(
                "value {} at row {}, column {} is outside (0, 1)",
                u[pos],
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n: u.len() / d, d, u })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::new(d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.u[t * self.d..(t + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.u.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }
}

/// Observations mapped through the margin quantile of a model: `g` for the
/// Gaussian copula, `s` for the Student's t copula.
///
/// Quantities that do not depend on the correlation matrix are cached here,
/// since every likelihood evaluation would otherwise recompute them.
#[derive(Debug, Clone)]
pub struct TransformedSample {
    n: usize,
    d: usize,
    z: Vec<f64>,
    model: CopulaModel,
    /// Σ_t g_t g_tᵀ.
    scatter: SymMatrix,
    /// Σ_t of the log of the product of margin densities, up to constants:
    /// ½ gᵀg (Gaussian) or ((ν+1)/2) Σ_i ln(1 + s_i²/ν) (t).
    margin_term: f64,
}

impl TransformedSample {
    /// Wraps already-transformed values (`n * d`, row-major).
    pub fn from_values(d: usize, z: Vec<f64>, model: CopulaModel) -> Result<Self> {
        if d < 2 || z.is_empty() || z.len() % d != 0 {
            return Err(Error::InvalidSample(format!(
                "{} values do not form rows of length {d} (d >= 2)",
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("non-finite transformed value".into()));
        }
        let n = z.len() / d;
        let mut scatter = vec![0.0; d * d];
        for row in z.chunks_exact(d) {
            for i in 0..d {
                let ri = row[i];
                for j in 0..=i {
                    scatter[i * d + j] += ri * row[j];
                }
            }
        }
        let scatter = SymMatrix::from_lower_fn(d, |i, j| scatter[i * d + j]);
        let margin_term = match model {
            CopulaModel::Gaussian => 0.5 * z.iter().map(|v| v * v).sum::<f64>(),
            CopulaModel::StudentT { nu } => {
                let nu = nu.get();
                0.5 * (nu + 1.0) * z.iter().map(|v| (v * v / nu).ln_1p()).sum::<f64>()
            }
        };
        Ok(Self { n, d, z, model, scatter, margin_term })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn model(&self) -> CopulaModel {
        self.model
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.z[t * self.d..(t + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.z.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    /// `Σ_t z_t z_tᵀ`.
    pub fn scatter(&self) -> &SymMatrix {
        &self.scatter
    }

    pub(crate) fn margin_term(&self) -> f64 {
        self.margin_term
    }
}

/// Elementwise margin quantile transform of a pseudo-sample.
pub fn transform(sample: &PseudoSample, model: CopulaModel) -> Result<TransformedSample> {
    let z = sample
        .values()
        .iter()
        .map(|&u| model.quantile(u))
        .collect::<Result<Vec<_>>>()?;
    TransformedSample::from_values(sample.d(), z, model)
}

/// The projection `Σ ↦ AΣA` with `A = diag(1/√Σ_ii)` onto correlation matrices.
pub fn project_to_correlation(sigma: &SymMatrix) -> Result<CorrelationMatrix> {
    let diag = sigma.diag();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    let inv_sqrt: Vec<f64> = diag.iter().map(|v| 1.0 / v.sqrt()).collect();
    let m = SymMatrix::from_lower_fn(sigma.dim(), |i, j| {
        if i == j {
            1.0
        } else {
            sigma.get(i, j) * inv_sqrt[i] * inv_sqrt[j]
        }
    });
    let chol = cholesky(&m)?;
    Ok(CorrelationMatrix { m, chol })
}
