use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_radius_exact, power_method};
use crate::ssm::{DiscretizedOperator, SelectiveSsm};
use crate::stats::{mean_abs_error, pearson};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerValidation {
    pub n: usize,
    pub k: usize,
    pub rho_exact: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub mae: f64,
    pub max_abs_error: f64,
    /// `None` when either sample is constant.
    pub pearson: Option<f64>,
}

/// Power method (start seed `seed + layer`) against the exact radius on
/// each operator.
pub fn validate_power_method(ops: &[DiscretizedOperator], k: usize, seed: u64) -> Result<PowerValidation> {
    if ops.is_empty() {
        return Err(Error::Empty("operators"));
    }
    let mut rho_exact = Vec::with_capacity(ops.len());
    let mut rho_hat = Vec::with_capacity(ops.len());
    for op in ops {
        rho_exact.push(eig_radius_exact(&op.abar)?.rho_hat);
        rho_hat.push(power_method(&op.abar, k, seed.wrapping_add(op.layer as u64))?.rho_hat);
    }
    let max_abs_error = rho_exact
        .iter()
        .zip(&rho_hat)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PowerValidation {
        n: ops.len(),
        k,
        mae: mean_abs_error(&rho_exact, &rho_hat),
        max_abs_error,
        pearson: pearson(&rho_exact, &rho_hat),
        rho_exact,
        rho_hat,
    })
}

/// [`validate_power_method`] on `n` operators sampled from the model.
pub fn validate_spectral(ssm: &SelectiveSsm, n: usize, k: usize, seed: u64) -> Result<PowerValidation> {
    if n == 0 {
        return Err(Error::invalid("n_matrices must be >= 1"));
    }
    validate_power_method(&ssm.sample_operators(n, seed)?, k, 0)
}
