use proptest::prelude::*;

use specguard::experiments::{clamp_operator, retention_curve, synthetic_monitor_traces};
use specguard::guard::{ablate_threshold, monitor_step, DetectionMetrics, GuardConfig, RhoWindow};
use specguard::linalg::{eig_radius_exact, lyapunov_residual, power_method, solve_discrete_lyapunov, Matrix};
use specguard::spectral::{horizon_bound, HorizonInputs};
use specguard::ssm::{DiscretizedOperator, SelectiveSsm, SelectiveSsmConfig};
use specguard::stats::pairwise_auc;

fn square(n: usize, range: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-range..range, n * n).prop_map(move |d| Matrix::dense(n, n, d).unwrap())
}

fn diag_op(a: Vec<f64>) -> DiscretizedOperator {
    let n = a.len();
    DiscretizedOperator::new(
        0,
        0.1,
        Matrix::diagonal(a).unwrap(),
        Matrix::column(vec![1.0; n]).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_estimate_scales_with_matrix(m in square(5, 1.0), c in 0.1f64..10.0, seed in 0u64..1000) {
        let base = power_method(&m, 3, seed).unwrap().rho_hat;
        let scaled = power_method(&m.scale(c), 3, seed).unwrap().rho_hat;
        prop_assert!((scaled - c * base).abs() <= 1e-12 * c * base.max(1.0));
        let neg = power_method(&m.scale(-c), 3, seed).unwrap().rho_hat;
        prop_assert!((neg - scaled).abs() <= 1e-12 * scaled.max(1.0));
    }

    #[test]
    fn diagonal_radius_is_max_abs(d in prop::collection::vec(-2.0f64..2.0, 1..20)) {
        let want = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = Matrix::diagonal(d).unwrap();
        prop_assert_eq!(eig_radius_exact(&m).unwrap().rho_hat, want);
        let dense = m.to_dense();
        prop_assert!((eig_radius_exact(&dense).unwrap().rho_hat - want).abs() < 1e-12);
    }

    #[test]
    fn symmetric_rayleigh_never_exceeds_radius(m in square(6, 1.0), seed in 0u64..1000) {
        let s = m.add(&m.transpose()).unwrap().scale(0.5);
        let exact = eig_radius_exact(&s).unwrap().rho_hat;
        let est = power_method(&s, 3, seed).unwrap().rho_hat;
        prop_assert!(est <= exact + 1e-12, "{est} > {exact}");
    }

    #[test]
    fn lyapunov_residual_is_small(m in square(4, 1.0), b in prop::collection::vec(-1.0f64..1.0, 4)) {
        let rho = eig_radius_exact(&m).unwrap().rho_hat;
        prop_assume!(rho > 1e-3);
        let a = m.scale(0.9 / rho);
        let bb = Matrix::column(b).unwrap();
        let w = solve_discrete_lyapunov(&a, &bb).unwrap();
        let scale = w.frobenius_norm().max(1.0);
        prop_assert!(lyapunov_residual(&a, &bb, &w).unwrap() < 1e-10 * scale);
        prop_assert!(w.is_symmetric(0.0));
    }

    #[test]
    fn horizon_grows_with_radius(r1 in 0.5f64..0.999, r2 in 0.5f64..0.999, eps in 1e-8f64..1e-3) {
        prop_assume!(r1 < r2);
        let h = |rho| horizon_bound(&HorizonInputs { rho, epsilon: eps, ..Default::default() }).unwrap().tokens;
        prop_assert!(h(r1) <= h(r2));
    }

    #[test]
    fn auc_invariant_under_monotone_transform(
        neg in prop::collection::vec(-3.0f64..3.0, 1..30),
        pos in prop::collection::vec(-3.0f64..3.0, 1..30),
    ) {
        let f = |v: &Vec<f64>| v.iter().map(|x| (2.0 * x).exp() + 1.0).collect::<Vec<_>>();
        prop_assert_eq!(pairwise_auc(&neg, &pos), pairwise_auc(&f(&neg), &f(&pos)));
        let flipped = pairwise_auc(&pos, &neg).unwrap();
        prop_assert!((pairwise_auc(&neg, &pos).unwrap() + flipped - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_is_idempotent_and_exact(d in prop::collection::vec(-1.0f64..1.0, 1..16), target in 0.01f64..1.0) {
        let op = diag_op(d);
        let once = clamp_operator(&op, target).unwrap();
        prop_assert!(once.rho <= target);
        if op.rho > target {
            prop_assert_eq!(once.rho, target);
        } else {
            prop_assert_eq!(&once, &op);
        }
        let twice = clamp_operator(&once, target).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(&once.bbar, &op.bbar);
    }

    #[test]
    fn window_blocks_iff_recent_minimum_below_threshold(
        rhos in prop::collection::vec(0.0f64..1.0, 1..60),
        window in 1usize..12,
        rho_min in 0.05f64..0.95,
    ) {
        let cfg = GuardConfig { rho_min, window, ..Default::default() };
        let mut w = RhoWindow::new(window);
        for (t, &r) in rhos.iter().enumerate() {
            let v = monitor_step(&mut w, r, &cfg);
            let lo = t.saturating_sub(window - 1);
            let brute = rhos[lo..=t].iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(v.window_min_rho, brute);
            prop_assert_eq!(v.is_block(), brute < rho_min);
            if v.is_block() {
                prop_assert_eq!(v.trigger_token, Some(t));
            }
        }
    }

    #[test]
    fn f1_is_harmonic_mean(tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tp in 1u64..500) {
        let m = DetectionMetrics::from_counts(tn, fp, fn_, tp);
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / (tp + fn_) as f64;
        prop_assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ablation_recall_monotone_in_threshold(seed in 0u64..10_000) {
        let traces = synthetic_monitor_traces(20, 20, 4, 16, 0.3, seed).unwrap();
        let grid = [0.05, 0.1, 0.2, 0.3, 0.5, 0.9, 0.999];
        let rows = ablate_threshold(&traces, &grid, &GuardConfig::default()).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].recall >= w[0].recall);
            prop_assert!(w[1].fpr >= w[0].fpr);
        }
    }

    #[test]
    fn clamped_retention_decays_geometrically(target in 0.1f64..0.95, d in 1usize..30, seed in 0u64..100) {
        let ssm = SelectiveSsm::init(SelectiveSsmConfig::default()).unwrap();
        let curve = retention_curve(&ssm, target, d, seed).unwrap();
        for (k, r) in curve.iter().enumerate() {
            let want = target.powi(k as i32);
            // difference of two O(1) states: absolute floor from cancellation
            prop_assert!((r - want).abs() <= 1e-9 * want + 1e-15, "d={k}: {r} vs {want}");
        }
    }
}
