//! Matrix exponential.
//!
//! Diagonal inputs use the element-wise closed form. Dense inputs use
//! scaling and squaring: `exp(X) = exp(X / 2^s)^(2^s)` with the inner
//! exponential evaluated by a truncated Taylor series once `||X / 2^s||_1`
//! is at most [`SCALED_NORM`].

use super::matrix::{Matrix, MatrixKind};
use crate::error::{Error, Result};

const SCALED_NORM: f64 = 0.5;
/// Truncation error of the series at norm 0.5 is below 0.5^21 / 21! ~ 1e-26.
const TAYLOR_ORDER: usize = 20;

/// `exp(dt * m)`.
pub fn mat_exp(m: &Matrix, dt: f64) -> Result<Matrix> {
    let n = m.require_square()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive and finite, got {dt}")));
    }
    match m.kind() {
        MatrixKind::Diagonal => Matrix::diagonal(m.as_slice().iter().map(|a| (dt * a).exp()).collect()),
        MatrixKind::Dense => {
            let x = m.scale(dt);
            let norm = x.norm_1();
            let squarings = if norm > SCALED_NORM {
                (norm / SCALED_NORM).log2().ceil() as i32
            } else {
                0
            };
            let y = x.scale(0.5f64.powi(squarings));
            let mut result = taylor(&y, n, TAYLOR_ORDER)?;
            for _ in 0..squarings {
                result = result.matmul(&result)?;
            }
            Ok(result)
        }
    }
}

fn taylor(y: &Matrix, n: usize, order: usize) -> Result<Matrix> {
    let mut sum = Matrix::identity(n).to_dense();
    let mut term = sum.clone();
    for k in 1..=order {
        term = term.matmul(y)?.scale(1.0 / k as f64);
        sum = sum.add(&term)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_from_log_two() {
        let m = Matrix::diagonal(vec![-1.0]).unwrap();
        let e = mat_exp(&m, std::f64::consts::LN_2).unwrap();
        assert!((e.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let e = mat_exp(&Matrix::zeros(3, 3), 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rejects_bad_dt_and_shape() {
        let m = Matrix::identity(2);
        assert!(mat_exp(&m, 0.0).is_err());
        assert!(mat_exp(&m, -1.0).is_err());
        assert!(matches!(
            mat_exp(&Matrix::zeros(2, 3), 1.0),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn rotation_generator() {
        // exp(t [[0,-1],[1,0]]) is the rotation by t.
        let g = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        let t = 2.5;
        let e = mat_exp(&g, t).unwrap();
        assert!((e.get(0, 0) - t.cos()).abs() < 1e-13);
        assert!((e.get(0, 1) + t.sin()).abs() < 1e-13);
        assert!((e.get(1, 0) - t.sin()).abs() < 1e-13);
    }
}
