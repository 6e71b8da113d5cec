use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    Power,
    ExactEig,
    DiagonalClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub rho_hat: f64,
    pub iterations_used: usize,
    pub method: SpectralMethod,
    /// Multiply-adds spent in the iteration mat-vecs (k per estimate).
    pub matvec_flops: u64,
    /// Set when the operator annihilated the start vector (zero matrix).
    pub degenerate: bool,
}

/// Deterministic unit-norm Gaussian start vector.
pub fn start_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = l2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

enum Outcome {
    Estimate(SpectralEstimate),
    Underflow,
}

/// Power iteration: `k` normalised products `v <- M v / ||M v||`, then the
/// Rayleigh quotient magnitude `|v^T M v|`.
pub fn power_method(m: &Matrix, k: usize, seed: u64) -> Result<SpectralEstimate> {
    let n = m.require_square()?;
    if k == 0 {
        return Err(Error::invalid("power method needs k >= 1"));
    }
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if m.max_abs() == 0.0 {
        return Ok(SpectralEstimate {
            rho_hat: 0.0,
            iterations_used: 0,
            method: SpectralMethod::Power,
            matvec_flops: 0,
            degenerate: true,
        });
    }
    match iterate(m, k, seed)? {
        Outcome::Estimate(e) => Ok(e),
        Outcome::Underflow => match iterate(m, k, seed.wrapping_add(1))? {
            Outcome::Estimate(e) => Ok(e),
            Outcome::Underflow => Err(Error::Underflow),
        },
    }
}

fn iterate(m: &Matrix, k: usize, seed: u64) -> Result<Outcome> {
    let mut v = start_vector(m.rows(), seed);
    let mut flops = 0u64;
    for _ in 0..k {
        let (w, cost) = m.matvec(&v)?;
        flops += cost;
        let norm = l2(&w);
        if !(norm > f64::MIN_POSITIVE) {
            return Ok(Outcome::Underflow);
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    let (mv, _) = m.matvec(&v)?;
    let rayleigh: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
    Ok(Outcome::Estimate(SpectralEstimate {
        rho_hat: rayleigh.abs(),
        iterations_used: k,
        method: SpectralMethod::Power,
        matvec_flops: flops,
        degenerate: false,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_exact() {
        let e = power_method(&Matrix::identity(16), 3, 42).unwrap();
        assert_eq!(e.rho_hat, 1.0);
        assert_eq!(e.matvec_flops, 48);
    }

    #[test]
    fn dominant_eigenvalue_of_two_by_two() {
        let m = Matrix::diagonal(vec![0.9, 0.3]).unwrap();
        let e = power_method(&m, 20, 0).unwrap();
        assert!((e.rho_hat - 0.9).abs() < 1e-9, "{}", e.rho_hat);
    }

    #[test]
    fn zero_matrix_is_flagged() {
        let e = power_method(&Matrix::zeros(4, 4), 3, 1).unwrap();
        assert_eq!(e.rho_hat, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn nilpotent_underflows() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(power_method(&m, 3, 0), Err(Error::Underflow)));
    }

    #[test]
    fn dense_flop_count() {
        let e = power_method(&Matrix::identity(16).to_dense(), 3, 7).unwrap();
        assert_eq!(e.matvec_flops, 768);
    }

    #[test]
    fn deterministic() {
        let m = Matrix::from_rows(&[&[0.5, 0.2], &[0.1, 0.4]]).unwrap();
        assert_eq!(power_method(&m, 3, 9).unwrap(), power_method(&m, 3, 9).unwrap());
    }
}
