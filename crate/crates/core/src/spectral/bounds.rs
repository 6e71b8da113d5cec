//! Memory-horizon and perturbation certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_radius_exact, eigenvalues, solve_discrete_lyapunov, Matrix};
use crate::ssm::{DiscretizedOperator, SelectiveSsm};

/// Difference between the two largest eigenvalue magnitudes (0 for d = 1).
pub fn spectral_gap(op: &DiscretizedOperator) -> f64 {
    let mut mags: Vec<f64> = if op.abar.is_diagonal() {
        op.abar.as_slice().iter().map(|v| v.abs()).collect()
    } else {
        eigenvalues(&op.abar).map_or_else(|_| Vec::new(), |v| v.iter().map(|z| z.norm()).collect())
    };
    if mags.len() < 2 {
        return 0.0;
    }
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[0] - mags[1]
}

/// Largest eigenvalue of the controllability Gramian. Diagonal operators
/// use the closed form `W_ij = b_i b_j / (1 - a_i a_j)`.
pub fn gramian_energy(op: &DiscretizedOperator) -> Result<f64> {
    let w = if op.abar.is_diagonal() {
        let rho = op.abar.max_abs();
        if rho >= 1.0 {
            return Err(Error::GramianDiverges { rho });
        }
        let a = op.abar.as_slice();
        let b = op.bbar.as_slice();
        let n = a.len();
        let data = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                b[i] * b[j] / (1.0 - a[i] * a[j])
            })
            .collect();
        Matrix::dense(n, n, data)?
    } else {
        solve_discrete_lyapunov(&op.abar, &op.bbar)?
    };
    if w.max_abs() == 0.0 {
        return Ok(0.0);
    }
    Ok(eigenvalues(&w)?.iter().map(|z| z.re).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonInputs {
    pub rho: f64,
    pub kappa: f64,
    pub h0_norm: f64,
    pub epsilon: f64,
    pub lambda_max_wc: f64,
}

impl Default for HorizonInputs {
    fn default() -> Self {
        Self {
            rho: 0.99,
            kappa: 1.0,
            h0_norm: 1.0,
            epsilon: 1e-5,
            lambda_max_wc: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonBound {
    pub tokens: f64,
    /// The log argument was <= 1; `tokens` is reported as 0.
    pub vacuous: bool,
}

/// `H_eff <= ln(kappa * sqrt(||h0||^2 / (eps^2 lambda_max))) / ln(1 / rho)`.
pub fn horizon_bound(inputs: &HorizonInputs) -> Result<HorizonBound> {
    let HorizonInputs {
        rho,
        kappa,
        h0_norm,
        epsilon,
        lambda_max_wc,
    } = *inputs;
    if rho >= 1.0 {
        return Err(Error::BoundUndefined { rho });
    }
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be in (0, 1), got {rho}")));
    }
    if !(kappa >= 1.0) || !(h0_norm > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) || !(lambda_max_wc > 0.0) {
        return Err(Error::invalid(format!("invalid horizon inputs {inputs:?}")));
    }
    let arg = kappa * (h0_norm * h0_norm / (epsilon * epsilon * lambda_max_wc)).sqrt();
    if arg <= 1.0 {
        return Ok(HorizonBound {
            tokens: 0.0,
            vacuous: true,
        });
    }
    Ok(HorizonBound {
        tokens: arg.ln() / (1.0 / rho).ln(),
        vacuous: false,
    })
}

/// Near-critical form `ln(kappa / eps) / eta` for `rho = 1 - eta`.
pub fn near_critical_horizon(eta: f64, kappa: f64, epsilon: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::invalid(format!("eta must be in (0, 0.5), got {eta}")));
    }
    if !(kappa >= 1.0) || !(epsilon > 0.0) {
        return Err(Error::invalid("kappa >= 1 and epsilon > 0 required"));
    }
    Ok((kappa / epsilon).ln() / eta)
}

/// `L_A = ||A||_2 exp(delta_max ||A||_2)`.
pub fn lipschitz_certificate(a_norm: f64, delta_max: f64) -> f64 {
    a_norm * (delta_max * a_norm).exp()
}

/// Smallest step change `|dDelta|` that can move rho by `delta_rho`.
pub fn min_delta_perturbation(delta_rho: f64, lipschitz: f64) -> f64 {
    delta_rho / lipschitz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub max_ratio: f64,
    pub bound: f64,
    pub violations: usize,
    pub pairs: usize,
}

/// Samples `(d1, d2)` uniformly in `[delta_min, delta_max]` and records the
/// largest `|rho(exp(d1 A)) - rho(exp(d2 A))| / |d1 - d2|` for diagonal `A`.
pub fn verify_lipschitz_rates(
    rates: &[f64],
    delta_min: f64,
    delta_max: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LipschitzCheck> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let a_norm = rates.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let bound = lipschitz_certificate(a_norm, delta_max);
    let rho = |d: f64| -> Result<f64> {
        let m = Matrix::diagonal(rates.iter().map(|a| (d * a).exp()).collect())?;
        Ok(eig_radius_exact(&m)?.rho_hat)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = LipschitzCheck {
        max_ratio: 0.0,
        bound,
        violations: 0,
        pairs: 0,
    };
    for _ in 0..n_samples {
        let d1 = rng.random_range(delta_min..=delta_max);
        let d2 = rng.random_range(delta_min..=delta_max);
        if d1 == d2 {
            continue;
        }
        let ratio = (rho(d1)? - rho(d2)?).abs() / (d1 - d2).abs();
        check.pairs += 1;
        check.max_ratio = check.max_ratio.max(ratio);
        if ratio > bound {
            check.violations += 1;
        }
    }
    Ok(check)
}

/// [`verify_lipschitz_rates`] on one layer of a model.
pub fn verify_lipschitz(ssm: &SelectiveSsm, layer: usize, n_samples: usize, seed: u64) -> Result<LipschitzCheck> {
    if layer >= ssm.n_layers() {
        return Err(Error::invalid(format!("layer {layer} out of range")));
    }
    verify_lipschitz_rates(
        &ssm.rates(layer),
        ssm.config.delta_min,
        ssm.config.delta_max,
        n_samples,
        seed,
    )
}
