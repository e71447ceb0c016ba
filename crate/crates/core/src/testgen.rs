//! Random correlation matrices with a random spectrum, and synthetic fitting
//! cases built from them.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::copula::{sample_copula, CopulaModel, CorrelationMatrix, PseudoSample};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

const MIN_EIGENVALUE: f64 = 1e-12;
const MAX_ATTEMPTS: usize = 100;

/// One synthetic case: dimension, copula family, sample size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub dim: usize,
    pub model: CopulaModel,
    pub n_obs: usize,
    pub seed: u64,
}

impl CaseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidConfig(format!("dim must be at least 2, got {}", self.dim)));
        }
        if self.n_obs < 2 {
            return Err(Error::InvalidConfig(format!("n_obs must be at least 2, got {}", self.n_obs)));
        }
        Ok(())
    }
}

/// Haar-distributed orthogonal matrix, row-major: modified Gram-Schmidt on
/// the columns of a standard normal matrix. MGS yields `R` with a positive
/// diagonal, which is the sign convention that makes `Q` Haar.
pub fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    // columns stored contiguously while orthogonalizing
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for k in 0..dim {
        let norm = cols[k].iter().map(|x| x * x).sum::<f64>().sqrt();
        cols[k].iter_mut().for_each(|x| *x /= norm);
        let (done, rest) = cols.split_at_mut(k + 1);
        let q = &done[k];
        for c in rest.iter_mut() {
            let r: f64 = q.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(q).for_each(|(x, qi)| *x -= r * qi);
        }
    }
    let mut out = vec![0.0; dim * dim];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            out[i * dim + j] = *v;
        }
    }
    out
}

/// `O diag(values) Oᵀ` for row-major orthogonal `o`.
fn similarity(o: &[f64], values: &[f64]) -> SymMatrix {
    let d = values.len();
    SymMatrix::from_lower_fn(d, |i, j| {
        (0..d).map(|k| o[i * d + k] * values[k] * o[j * d + k]).sum()
    })
}

/// Rotates pairs of coordinates until every diagonal entry equals one,
/// leaving the eigenvalues unchanged. Requires `tr(a) = dim`.
///
/// Each rotation sets `a_ii = 1` for the smallest diagonal entry below one,
/// paired with the largest entry above one.
pub fn balance_diagonal(a: &SymMatrix) -> SymMatrix {
    let d = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut fixed = vec![false; d];
    loop {
        let free = || (0..d).filter(|&k| !fixed[k]);
        let low = free()
            .filter(|&k| m[k * d + k] < 1.0)
            .min_by(|&x, &y| m[x * d + x].total_cmp(&m[y * d + y]));
        let high = free()
            .filter(|&k| m[k * d + k] > 1.0)
            .max_by(|&x, &y| m[x * d + x].total_cmp(&m[y * d + y]));
        let (Some(i), Some(j)) = (low, high) else { break };
        let (aii, ajj, aij) = (m[i * d + i], m[j * d + j], m[i * d + j]);
        // t solves (ajj - 1) t² + 2 aij t + (aii - 1) = 0; the product of the
        // roots is negative, so the discriminant is positive.
        let disc = aij * aij - (aii - 1.0) * (ajj - 1.0);
        let q = -(aij + aij.signum() * disc.sqrt());
        let t = (aii - 1.0) / q;
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = c * t;
        // rows then columns: x_i' = c x_i + s x_j, x_j' = -s x_i + c x_j
        for k in 0..d {
            let (ri, rj) = (m[i * d + k], m[j * d + k]);
            m[i * d + k] = c * ri + s * rj;
            m[j * d + k] = -s * ri + c * rj;
        }
        for k in 0..d {
            let (ci, cj) = (m[k * d + i], m[k * d + j]);
            m[k * d + i] = c * ci + s * cj;
            m[k * d + j] = -s * ci + c * cj;
        }
        fixed[i] = true;
    }
    SymMatrix::from_lower_fn(d, |i, j| if i == j { 1.0 } else { 0.5 * (m[i * d + j] + m[j * d + i]) })
}

/// Random correlation matrix whose eigenvalues are iid `Uniform(0, 1)` draws
/// rescaled to sum to `dim`. Returns the matrix and its eigenvalues in
/// descending order.
pub fn random_correlation_with_spectrum(dim: usize, rng_seed: u64) -> Result<(CorrelationMatrix, Vec<f64>)> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!("dim must be at least 2, got {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_ATTEMPTS {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut values: Vec<f64> = raw.iter().map(|v| v * dim as f64 / total).collect();
        if values.iter().any(|&v| v < MIN_EIGENVALUE) {
            continue;
        }
        let o = random_orthogonal(dim, &mut rng);
        let balanced = balance_diagonal(&similarity(&o, &values));
        let rho = match CorrelationMatrix::new(balanced) {
            Ok(r) => r,
            Err(_) => continue,
        };
        values.sort_by(|a, b| b.total_cmp(a));
        return Ok((rho, values));
    }
    Err(Error::DegenerateSpectrum { attempts: MAX_ATTEMPTS })
}

pub fn random_correlation(dim: usize, rng_seed: u64) -> Result<CorrelationMatrix> {
    random_correlation_with_spectrum(dim, rng_seed).map(|(r, _)| r)
}

/// Seed handed to the sampler; independent of the stream used for `ρ`.
fn sample_seed(seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng.next_u64()
}

pub fn generate_case(spec: &CaseSpec) -> Result<(CorrelationMatrix, PseudoSample)> {
    spec.validate()?;
    let rho = random_correlation(spec.dim, spec.seed)?;
    let sample = sample_copula(&rho, spec.model, spec.n_obs, sample_seed(spec.seed))?;
    Ok((rho, sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    #[test]
    fn two_dimensional_spectrum() {
        for seed in 0..20 {
            let (rho, values) = random_correlation_with_spectrum(2, seed).unwrap();
            let r = rho.get(0, 1);
            assert!((values[0] - (1.0 + r.abs())).abs() < 1e-10);
            assert!((values[1] - (1.0 - r.abs())).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 7;
        let o = random_orthogonal(d, &mut rng);
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| o[k * d + i] * o[k * d + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn balancing_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [3, 6, 12] {
            let mut values: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let total: f64 = values.iter().sum();
            values.iter_mut().for_each(|v| *v *= d as f64 / total);
            let o = random_orthogonal(d, &mut rng);
            let a = similarity(&o, &values);
            let before = sym_eigen(&a).unwrap().values;
            let after = sym_eigen(&balance_diagonal(&a)).unwrap().values;
            for (x, y) in before.iter().zip(&after) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn case_generation_is_deterministic() {
        let spec = CaseSpec { dim: 2, model: CopulaModel::student_t(5.0).unwrap(), n_obs: 100, seed: 42 };
        let (r1, s1) = generate_case(&spec).unwrap();
        let (r2, s2) = generate_case(&spec).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(s1.values(), s2.values());
        assert!(s1.values().iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn invalid_specs() {
        let spec = CaseSpec { dim: 1, model: CopulaModel::Gaussian, n_obs: 10, seed: 0 };
        assert!(generate_case(&spec).is_err());
        let spec = CaseSpec { dim: 3, model: CopulaModel::Gaussian, n_obs: 1, seed: 0 };
        assert!(generate_case(&spec).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn generated_matrices_match_spectrum(dim in 2usize..16, seed in any::<u64>()) {
            let (rho, values) = random_correlation_with_spectrum(dim, seed).unwrap();
            let m = rho.as_matrix();
            for i in 0..dim {
                prop_assert_eq!(m.get(i, i), 1.0);
            }
            prop_assert_eq!(m.trace(), dim as f64);
            let eig = sym_eigen(m).unwrap();
            prop_assert!(eig.min_value() > 0.0);
            for (x, y) in eig.values.iter().zip(&values) {
                prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
            }
        }
    }
}
