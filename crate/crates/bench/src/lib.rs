//! Fixtures shared by the criterion benches.

use ellcop::copula::transform;
use ellcop::testgen::{generate_case, CaseSpec};
use ellcop::{CopulaModel, PseudoSample, Result, TransformedSample};

/// A generated t-copula case and its transformed sample, ready to fit.
pub fn prepared_case(dim: usize, n_obs: usize, nu: f64, seed: u64) -> Result<(CopulaModel, PseudoSample, TransformedSample)> {
    let model = CopulaModel::student_t(nu)?;
    let (_, u) = generate_case(&CaseSpec { dim, model, n_obs, seed })?;
    let z = transform(&u, model)?;
    Ok((model, u, z))
}
