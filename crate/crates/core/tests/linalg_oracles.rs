use specguard::linalg::{
    condition_number, eig_radius_exact, eigenvalues, lyapunov_residual, mat_exp, power_method, solve_discrete_lyapunov,
    Matrix,
};

fn dense(n: usize, f: impl Fn(usize, usize) -> f64) -> Matrix {
    Matrix::dense(n, n, (0..n * n).map(|k| f(k / n, k % n)).collect()).unwrap()
}

fn to_vec(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Plain Taylor series to order 30, no scaling.
fn taylor_exp(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut term: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let mut sum = term.clone();
    for k in 1..=30 {
        term = mul(&term, a);
        for row in term.iter_mut() {
            row.iter_mut().for_each(|v| *v /= k as f64);
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    sum
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for k in 0..n {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn dense_exponential_matches_taylor_series() {
    let a = dense(4, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2);
    let got = to_vec(&mat_exp(&a, 1.3).unwrap());
    let want = taylor_exp(&to_vec(&a.scale(1.3)));
    for i in 0..4 {
        for j in 0..4 {
            assert!(
                (got[i][j] - want[i][j]).abs() < 1e-12,
                "{i},{j}: {} vs {}",
                got[i][j],
                want[i][j]
            );
        }
    }
}

#[test]
fn diagonal_exponential_is_elementwise() {
    let a = Matrix::diagonal(vec![-0.002, -2.0, -3.0]).unwrap();
    let e = mat_exp(&a, 0.5).unwrap();
    assert_eq!(e.diag(), vec![(-0.001f64).exp(), (-1.0f64).exp(), (-1.5f64).exp()]);
}

#[test]
fn fibonacci_matrix_gives_golden_ratio() {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 0.0]]).unwrap();
    assert!((power_method(&m, 60, 3).unwrap().rho_hat - phi).abs() < 1e-12);
    assert!((eig_radius_exact(&m).unwrap().rho_hat - phi).abs() < 1e-12);
}

#[test]
fn rotation_eigenvalues_lie_on_circle() {
    let (c, s) = (0.6, 0.8);
    let m = Matrix::from_rows(&[&[0.9 * c, -0.9 * s], &[0.9 * s, 0.9 * c]]).unwrap();
    let ev = eigenvalues(&m).unwrap();
    assert_eq!(ev.len(), 2);
    for z in ev {
        assert!((z.norm() - 0.9).abs() < 1e-12);
        assert!((z.re - 0.54).abs() < 1e-12);
    }
}

#[test]
fn companion_matrix_roots() {
    // (x - 0.5)(x + 0.25)(x - 0.8) = x^3 - 1.05x^2 + 0.075x + 0.1
    let m = Matrix::from_rows(&[&[1.05, -0.075, -0.1], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
    let mut re: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    for (g, w) in re.iter().zip([-0.25, 0.5, 0.8]) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn condition_number_matches_jacobi_svd_of_eigenvectors() {
    // A = V diag(0.9, 0.4, -0.2) V^-1 with unit-norm columns in V.
    let raw = [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.3, 1.0]];
    let mut v = vec![vec![0.0; 3]; 3];
    for j in 0..3 {
        let norm = (0..3).map(|i| raw[i][j] * raw[i][j]).sum::<f64>().sqrt();
        for i in 0..3 {
            v[i][j] = raw[i][j] / norm;
        }
    }
    let det = v[0][0] * (v[1][1] * v[2][2] - v[1][2] * v[2][1]) - v[0][1] * (v[1][0] * v[2][2] - v[1][2] * v[2][0])
        + v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0]);
    let cof = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        let m = v[r[0]][c[0]] * v[r[1]][c[1]] - v[r[0]][c[1]] * v[r[1]][c[0]];
        if (i + j).is_multiple_of(2) {
            m
        } else {
            -m
        }
    };
    let vinv: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| cof(j, i) / det).collect()).collect();
    let d = [0.9, 0.4, -0.2];
    let vd: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| v[i][j] * d[j]).collect()).collect();
    let a = mul(&vd, &vinv);
    let m = dense(3, |i, j| a[i][j]);

    let gram = jacobi_eigenvalues(mul(&transpose(&v), &v));
    let smax = gram.iter().cloned().fold(f64::MIN, f64::max).sqrt();
    let smin = gram.iter().cloned().fold(f64::MAX, f64::min).sqrt();
    let want = smax / smin;

    let got = condition_number(&m).unwrap();
    assert!(got.approximate);
    assert!((got.kappa - want).abs() < 1e-6 * want, "{} vs {want}", got.kappa);
    assert!(want > 1.0);
}

#[test]
fn symmetric_condition_number_is_one() {
    let m = Matrix::from_rows(&[&[0.5, 0.2], &[0.2, 0.3]]).unwrap();
    let c = condition_number(&m).unwrap();
    assert_eq!(c.kappa, 1.0);
    assert!(!c.approximate);
}

#[test]
fn gramian_matches_truncated_series() {
    let a = dense(3, |i, j| [[0.5, 0.2, 0.0], [-0.1, 0.6, 0.1], [0.0, 0.3, 0.4]][i][j]);
    let b = Matrix::column(vec![1.0, -0.5, 0.25]).unwrap();
    let w = to_vec(&solve_discrete_lyapunov(&a, &b).unwrap());
    let av = to_vec(&a);
    let bv = to_vec(&b);
    let mut series = vec![vec![0.0; 3]; 3];
    let mut ak_b = bv.clone();
    for _ in 0..10_000 {
        let outer = mul(&ak_b, &transpose(&ak_b));
        for i in 0..3 {
            for j in 0..3 {
                series[i][j] += outer[i][j];
            }
        }
        ak_b = mul(&av, &ak_b);
    }
    for i in 0..3 {
        for j in 0..3 {
            assert!((w[i][j] - series[i][j]).abs() < 1e-10);
        }
    }
    let r = lyapunov_residual(&a, &b, &solve_discrete_lyapunov(&a, &b).unwrap()).unwrap();
    assert!(r < 1e-12);
}

#[test]
fn unstable_gramian_is_rejected() {
    let a = Matrix::diagonal(vec![1.0, 0.5]).unwrap();
    let b = Matrix::column(vec![1.0, 1.0]).unwrap();
    assert!(solve_discrete_lyapunov(&a, &b).is_err());
}
