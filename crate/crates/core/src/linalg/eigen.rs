//! Dense eigenvalues by Householder reduction to upper Hessenberg form
//! followed by Francis double-shift QR, plus eigenvector-based conditioning.

use num_complex::Complex64;

use super::matrix::{Matrix, MatrixKind};
use super::power::{SpectralEstimate, SpectralMethod};
use crate::error::{Error, Result};

/// Validation-scale limit for the exact routines.
pub const MAX_EXACT_DIM: usize = 64;
/// QR sweeps allowed per unit of dimension.
pub const SWEEPS_PER_DIM: usize = 100;

/// Spectral radius from the full spectrum.
pub fn eig_radius_exact(m: &Matrix) -> Result<SpectralEstimate> {
    let n = m.require_square()?;
    if n > MAX_EXACT_DIM {
        return Err(Error::TooLarge {
            dim: n,
            limit: MAX_EXACT_DIM,
        });
    }
    if m.is_diagonal() {
        return Ok(SpectralEstimate {
            rho_hat: m.max_abs(),
            iterations_used: 0,
            method: SpectralMethod::DiagonalClosedForm,
            matvec_flops: 0,
            degenerate: false,
        });
    }
    let (values, sweeps) = eigenvalues_with_sweeps(m)?;
    Ok(SpectralEstimate {
        rho_hat: values.iter().map(|z| z.norm()).fold(0.0, f64::max),
        iterations_used: sweeps,
        method: SpectralMethod::ExactEig,
        matvec_flops: 0,
        degenerate: false,
    })
}

/// All eigenvalues of a square matrix (no dimension limit).
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    m.require_square()?;
    if m.is_diagonal() {
        return Ok(m.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect());
    }
    eigenvalues_with_sweeps(m).map(|(v, _)| v)
}

fn eigenvalues_with_sweeps(m: &Matrix) -> Result<(Vec<Complex64>, usize)> {
    let n = m.rows();
    let mut a = m.to_dense().as_slice().to_vec();
    hessenberg(&mut a, n);
    hqr(&mut a, n)
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        // A <- (I - 2vv^T) A
        for j in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(p, vp)| vp * a[(k + 1 + p) * n + j]).sum();
            for (p, vp) in v.iter().enumerate() {
                a[(k + 1 + p) * n + j] -= 2.0 * vp * dot;
            }
        }
        // A <- A (I - 2vv^T)
        for i in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(p, vp)| vp * a[i * n + k + 1 + p]).sum();
            for (p, vp) in v.iter().enumerate() {
                a[i * n + k + 1 + p] -= 2.0 * vp * dot;
            }
        }
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Exceptional
/// shifts are applied after 10 and 20 stalled sweeps on the same block.
fn hqr(a: &mut [f64], n: usize) -> Result<(Vec<Complex64>, usize)> {
    let budget = SWEEPS_PER_DIM * n.max(1);
    let idx = |i: isize, j: isize| (i as usize) * n + j as usize;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i * n + j].abs();
        }
    }
    let mut total = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 1 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= f64::EPSILON * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nn, nn)];
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[idx(nn - 1, nn - 1)];
            let mut w = a[idx(nn, nn - 1)] * a[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                let (i0, i1) = ((nn - 1) as usize, nn as usize);
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[i0] = x + z;
                    wr[i1] = if z != 0.0 { x - w / z } else { x + z };
                    wi[i0] = 0.0;
                    wi[i1] = 0.0;
                } else {
                    wr[i0] = x + p;
                    wr[i1] = x + p;
                    wi[i0] = -z;
                    wi[i1] = z;
                }
                nn -= 2;
                break;
            }
            if total >= budget {
                return Err(Error::NoConvergence { budget });
            }
            if its == 10 || its == 20 {
                t += x;
                for i in 0..=nn {
                    a[idx(i, i)] -= x;
                }
                let s = a[idx(nn, nn - 1)].abs() + a[idx(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total += 1;
            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = a[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                q = a[idx(m + 1, m + 1)] - z - rr - ss;
                r = a[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[idx(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[idx(i, i - 3)] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[idx(k, k - 1)];
                    q = a[idx(k + 1, k - 1)];
                    r = if k + 1 != nn { a[idx(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                        }
                    } else {
                        a[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                        if k + 1 != nn {
                            pp += r * a[idx(k + 2, j)];
                            a[idx(k + 2, j)] -= pp * z;
                        }
                        a[idx(k + 1, j)] -= pp * y;
                        a[idx(k, j)] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                        if k + 1 != nn {
                            pp += z * a[idx(i, k + 2)];
                            a[idx(i, k + 2)] -= pp * r;
                        }
                        a[idx(i, k + 1)] -= pp * q;
                        a[idx(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((
        wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect(),
        total,
    ))
}

/// Condition number of the eigenvector matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditioning {
    pub kappa: f64,
    /// True when kappa came from numerically computed eigenvectors.
    pub approximate: bool,
}

/// `kappa = ||V||_2 ||V^-1||_2` for the eigenvector matrix `V` (unit columns).
pub fn condition_number(m: &Matrix) -> Result<Conditioning> {
    let n = m.require_square()?;
    if m.kind() == MatrixKind::Diagonal || m.is_symmetric(1e-12) {
        return Ok(Conditioning {
            kappa: 1.0,
            approximate: false,
        });
    }
    if n > MAX_EXACT_DIM {
        return Err(Error::TooLarge {
            dim: n,
            limit: MAX_EXACT_DIM,
        });
    }
    let values = eigenvalues(m)?;
    let dense = m.to_dense();
    let v = eigenvector_matrix(&dense, &values)?;
    let sigma_max = largest_singular_value(&v, n)?;
    let inverse = match complex_inverse(&v, n) {
        Some(inv) => inv,
        None => return Err(Error::Defective { ratio: 0.0 }),
    };
    let inv_sigma_max = largest_singular_value(&inverse, n)?;
    let kappa = sigma_max * inv_sigma_max;
    let ratio = 1.0 / kappa;
    if !kappa.is_finite() || ratio < 1e-10 {
        return Err(Error::Defective { ratio });
    }
    Ok(Conditioning {
        kappa,
        approximate: true,
    })
}

/// Column-major-free helper: `v[i * n + j]` is component i of eigenvector j.
fn eigenvector_matrix(m: &Matrix, values: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = m.rows();
    let scale = m.max_abs().max(1.0);
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, lambda) in values.iter().enumerate() {
        let shift = lambda + Complex64::new(1e-10 * scale, 0.0);
        let mut shifted: Vec<Complex64> = m.as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for i in 0..n {
            shifted[i * n + i] -= shift;
        }
        let lu = ComplexLu::factor(shifted, n, true);
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i % 3) as f64))
            .collect();
        for _ in 0..3 {
            x = lu.solve(&x);
            let norm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Defective { ratio: 0.0 });
            }
            x.iter_mut().for_each(|c| *c /= norm);
        }
        for i in 0..n {
            v[i * n + j] = x[i];
        }
    }
    Ok(v)
}

/// `sqrt(lambda_max(V^H V))`, via the real symmetric embedding of the
/// Hermitian Gram matrix.
fn largest_singular_value(v: &[Complex64], n: usize) -> Result<f64> {
    let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = (0..n).map(|k| v[k * n + i].conj() * v[k * n + j]).sum();
        }
    }
    let big = 2 * n;
    let mut real = vec![0.0; big * big];
    for i in 0..n {
        for j in 0..n {
            let g = gram[i * n + j];
            real[i * big + j] = g.re;
            real[i * big + n + j] = -g.im;
            real[(n + i) * big + j] = g.im;
            real[(n + i) * big + n + j] = g.re;
        }
    }
    let values = eigenvalues(&Matrix::dense(big, big, real)?)?;
    let lambda = values.iter().map(|z| z.re).fold(0.0, f64::max);
    Ok(lambda.sqrt())
}

fn complex_inverse(v: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let lu = ComplexLu::factor(v.to_vec(), n, false);
    if lu.singular {
        return None;
    }
    let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[j] = Complex64::new(1.0, 0.0);
        let col = lu.solve(&e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

struct ComplexLu {
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    n: usize,
    singular: bool,
}

impl ComplexLu {
    /// Partial-pivoting LU. With `regularize`, exact zero pivots are nudged
    /// (inverse iteration wants a nearly singular system).
    fn factor(mut a: Vec<Complex64>, n: usize, regularize: bool) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
                .unwrap_or(k);
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            if a[k * n + k].norm() <= f64::EPSILON * scale * 1e-6 {
                if regularize {
                    a[k * n + k] = Complex64::new(f64::EPSILON * scale, 0.0);
                } else {
                    singular = true;
                    continue;
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= f * u;
                }
            }
        }
        Self {
            lu: a,
            perm,
            n,
            singular,
        }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                y[i] = y[i] - l * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[i * n + k];
                y[i] = y[i] - u * y[k];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }
}
