use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::copula::{CopulaModel, CorrelationMatrix, PseudoSample};
use crate::error::{Error, Result};
use crate::margins::{norm_cdf, t_cdf};

/// Largest double below one.
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Draws `n` observations from a Gaussian or Student's t copula.
///
/// Gaussian: `u = Φ(L z)`. Student's t: `u = t_ν(L z · √(ν / w))` with
/// `w ~ χ²_ν`. `L` is the Cholesky factor of `rho`. Results are clamped to
/// `[f64::MIN_POSITIVE, 1 - ε/2]` so that a draw whose probability rounds to
/// 0 or 1 still lands strictly inside the unit interval.
pub fn sample_copula(
    rho: &CorrelationMatrix,
    model: CopulaModel,
    n: usize,
    rng_seed: u64,
) -> Result<PseudoSample> {
    if n == 0 {
        return Err(Error::InvalidSample("sample size must be at least 1".into()));
    }
    let d = rho.dim();
    let chol = rho.cholesky();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chi2 = match model {
        CopulaModel::Gaussian => None,
        CopulaModel::StudentT { nu } => Some(
            ChiSquared::new(nu.get())
                .map_err(|e| Error::InvalidConfig(format!("chi-squared sampler: {e}")))?,
        ),
    };
    let mut u = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let y = chol.mul_lower(&z);
        match (model, &chi2) {
            (CopulaModel::StudentT { nu }, Some(chi2)) => {
                let w: f64 = chi2.sample(&mut rng);
                let scale = (nu.get() / w).sqrt();
                u.extend(y.iter().map(|&v| t_cdf(v * scale, nu)));
            }
            _ => u.extend(y.iter().map(|&v| norm_cdf(v))),
        }
    }
    u.iter_mut().for_each(|v| *v = v.clamp(f64::MIN_POSITIVE, U_MAX));
    PseudoSample::new(d, u)
}
