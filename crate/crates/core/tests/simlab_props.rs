use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tvvar_core::algebra::{build_companion, spectral_radius, Mat};
use tvvar_core::irf::{longrun_mean_from, psi_coeffs};
use tvvar_core::simlab::{
    bn_check, draw_innovations, run_monte_carlo, run_replication, simulate_tvvar, CoefficientPath,
    InnovationLaw, McConfig, PathSpec, SimConfig, VarParams,
};
use tvvar_core::tvvar::{fit_tvvar, sample_grid};

fn constant_path(intercept: Vec<f64>, lags: Vec<Mat>, chol: Mat) -> CoefficientPath {
    CoefficientPath::new(PathSpec::Constant(VarParams { intercept, lags, omega_chol: chol })).unwrap()
}

#[test]
fn benchmark_is_reproducible_across_thread_counts() {
    let path = CoefficientPath::benchmark();
    let cfg = SimConfig::new(200, 12345);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_tvvar(&path, &cfg).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, simulate_tvvar(&path, &cfg).unwrap());
    let other = simulate_tvvar(&path, &SimConfig { stream: 1, ..cfg }).unwrap();
    assert_ne!(a, other);
}

#[test]
fn monte_carlo_report_is_thread_independent() {
    let path = CoefficientPath::benchmark();
    let cfg = McConfig { t_list: vec![150], n_reps: 6, ..Default::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_monte_carlo(&path, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    let (ra, rb) = (&a.rows[0], &b.rows[0]);
    assert_eq!(
        (ra.frac_equal, ra.rmse_a, ra.rmse_omega, ra.coverage_a, ra.coverage_omega),
        (rb.frac_equal, rb.rmse_a, rb.rmse_omega, rb.coverage_a, rb.coverage_omega)
    );
    assert!((ra.frac_below + ra.frac_equal + ra.frac_above - 1.0).abs() < 1e-12);
    assert!(ra.rmse_a >= 0.0 && ra.rmse_omega >= 0.0);
    assert!((0.0..=1.0).contains(&ra.coverage_a) && (0.0..=1.0).contains(&ra.coverage_omega));
}

#[test]
fn single_replication_is_deterministic() {
    let path = CoefficientPath::benchmark();
    let cfg = McConfig::default();
    let a = run_replication(&path, &cfg, 200, 3).unwrap();
    let b = run_replication(&path, &cfg, 200, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn innovation_moments() {
    for law in [InnovationLaw::Gaussian, InnovationLaw::StudentT { df: 8.0 }] {
        let n = 100_000;
        let d = 3;
        let e = draw_innovations(law, n, d, 2024, 0).unwrap();
        for i in 0..d {
            let mean = e.iter().map(|r| r[i]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.02);
            for j in 0..d {
                let c = e.iter().map(|r| r[i] * r[j]).sum::<f64>() / n as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 0.02, "{law:?} ({i},{j}): {c}");
            }
        }
    }
}

#[test]
fn constant_path_sample_mean_near_longrun_mean() {
    let lags = vec![
        Mat::from_rows(&[&[0.5, 0.1], &[0.0, 0.3]]),
        Mat::from_rows(&[&[0.1, 0.0], &[0.1, 0.2]]),
    ];
    let intercept = vec![1.0, -0.5];
    let chol = Mat::from_rows(&[&[0.5, 0.0], &[0.1, 0.4]]);
    let path = constant_path(intercept.clone(), lags.clone(), chol);
    let mut coef = Mat::zeros(2, 5);
    coef[(0, 0)] = 1.0;
    coef[(1, 0)] = -0.5;
    coef.set_block(0, 1, &lags[0]);
    coef.set_block(0, 3, &lags[1]);
    let mu = longrun_mean_from(&coef, 2, 0.0).unwrap();
    let t_len = 4000;
    let x = simulate_tvvar(&path, &SimConfig::new(t_len, 8)).unwrap();
    for i in 0..2 {
        let mean = (0..t_len).map(|t| x.obs(t)[i]).sum::<f64>() / t_len as f64;
        assert!((mean - mu[i]).abs() < 4.0 / (t_len as f64).sqrt(), "{mean} vs {}", mu[i]);
    }
}

#[test]
fn zero_noise_path_is_the_skeleton_and_refits_exactly() {
    // omega = 0: the simulated path is deterministic. Starting at the
    // long-run mean it stays there, so only the mean is identified.
    let lags = vec![Mat::from_rows(&[&[0.6]])];
    let path = constant_path(vec![0.8], lags, Mat::zeros(1, 1));
    let x = simulate_tvvar(&path, &SimConfig::new(50, 1)).unwrap();
    for t in 0..50 {
        assert!((x.obs(t)[0] - 2.0).abs() < 1e-12);
    }

    // A tabulated path with a noiseless transient: refit recovers the
    // generating coefficients where they are constant.
    let (r, th) = (0.999f64, 0.3f64);
    let a = Mat::from_rows(&[&[r * th.cos(), -r * th.sin()], &[r * th.sin(), r * th.cos()]]);
    let mut rows = vec![vec![3.0, -1.0]];
    while rows.len() < 200 {
        let next = a.matvec(rows.last().unwrap());
        rows.push(vec![0.4 + next[0], -0.3 + next[1]]);
    }
    let xs = tvvar_core::SeriesMatrix::from_rows(&rows).unwrap();
    let fit = fit_tvvar(&xs, 1, 0.25, &sample_grid(200)).unwrap();
    for c in &fit.coefs {
        assert!(c.block(0, 1, 2, 2).max_abs_diff(&a) < 1e-8);
    }
}

#[test]
fn bn_identity_on_random_stable_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for p in 1..=2 {
        for _ in 0..5 {
            let d = 2;
            let lags: Vec<Mat> = loop {
                let l: Vec<Mat> = (0..p)
                    .map(|_| Mat::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5) / p as f64))
                    .collect();
                if spectral_radius(build_companion(&l).unwrap().matrix()).unwrap() < 0.9 {
                    break l;
                }
            };
            let psi = psi_coeffs(&build_companion(&lags).unwrap(), 200);
            let eps = draw_innovations(InnovationLaw::Gaussian, 400, d, 5, p as u64).unwrap();
            assert!(bn_check(&psi, &eps, &[0.3, -0.2]) < 1e-9);
        }
    }
    // White noise: no transitory component.
    let eps = draw_innovations(InnovationLaw::Gaussian, 50, 1, 5, 0).unwrap();
    assert_eq!(bn_check(&[Mat::identity(1)], &eps, &[0.0]), 0.0);
}

#[test]
fn invalid_laws_and_paths_are_rejected() {
    assert!(draw_innovations(InnovationLaw::StudentT { df: 2.0 }, 5, 1, 0, 0).is_err());
    let bad = PathSpec::Constant(VarParams {
        intercept: vec![0.0],
        lags: vec![Mat::from_rows(&[&[1.01]])],
        omega_chol: Mat::identity(1),
    });
    assert!(CoefficientPath::new(bad).is_err());
    let upper = PathSpec::Constant(VarParams {
        intercept: vec![0.0, 0.0],
        lags: vec![Mat::zeros(2, 2)],
        omega_chol: Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]),
    });
    assert!(CoefficientPath::new(upper).is_err());
}
