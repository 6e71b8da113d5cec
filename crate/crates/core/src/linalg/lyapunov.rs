use super::eigen::{eig_radius_exact, MAX_EXACT_DIM};
use super::matrix::Matrix;
use super::power::power_method;
use crate::error::{Error, Result};

const MAX_DOUBLINGS: usize = 64;

/// Controllability Gramian `W = sum_k A^k B B^T (A^T)^k`, the fixed point of
/// `W = A W A^T + B B^T`, by the doubling recursion
/// `W <- W + A_k W A_k^T`, `A_k <- A_k^2`.
pub fn solve_discrete_lyapunov(abar: &Matrix, bbar: &Matrix) -> Result<Matrix> {
    let n = abar.require_square()?;
    if bbar.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bbar.rows(),
        });
    }
    let rho = stability_radius(abar)?;
    if rho >= 1.0 {
        return Err(Error::GramianDiverges { rho });
    }
    let q = bbar.to_dense().matmul(&bbar.to_dense().transpose())?;
    let mut w = q;
    let mut ak = abar.clone();
    for _ in 0..MAX_DOUBLINGS {
        let update = ak.matmul(&w)?.matmul(&ak.transpose())?;
        let step = update.max_abs();
        w = w.add(&update)?;
        if step <= f64::EPSILON * w.max_abs() || ak.max_abs() == 0.0 {
            break;
        }
        ak = ak.matmul(&ak)?;
    }
    Ok(symmetrize(&w))
}

fn stability_radius(abar: &Matrix) -> Result<f64> {
    if abar.is_diagonal() || abar.rows() <= MAX_EXACT_DIM {
        Ok(eig_radius_exact(abar)?.rho_hat)
    } else {
        Ok(power_method(abar, 200, 0)?.rho_hat)
    }
}

fn symmetrize(w: &Matrix) -> Matrix {
    let t = w.transpose();
    w.add(&t).map(|s| s.scale(0.5)).unwrap_or_else(|_| w.clone())
}

/// `||W - A W A^T - B B^T||_F`.
pub fn lyapunov_residual(abar: &Matrix, bbar: &Matrix, w: &Matrix) -> Result<f64> {
    let q = bbar.to_dense().matmul(&bbar.to_dense().transpose())?;
    let awa = abar.matmul(w)?.matmul(&abar.transpose())?;
    Ok(w.sub(&awa)?.sub(&q)?.frobenius_norm())
}
