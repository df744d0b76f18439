use ci_pcorr::partial_corr::{partial_correlation, residual_correlation, t_statistic, Method};
use ci_pcorr::perm_test::{perm_test_exact, perm_test_mc};
use ci_pcorr::sim_harness::{convergence_check, run_scenario, ConvergenceOptions, Scenario};
use ci_pcorr::spline_smoother::{ols_residuals, ResidualPair};
use ci_pcorr::wiener_sim::{
    build_covariance, gen_dataset, iwp_kernel, sample_correlation, sample_curve_pair, Dataset, DesignPoints,
    GeneratingModel,
};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Midpoint rule on an m x m grid for the double integral of min(u, v).
fn min_integral(s: f64, t: f64, m: usize) -> f64 {
    let (hs, ht) = (s / m as f64, t / m as f64);
    let mut total = 0.0;
    for i in 0..m {
        let u = (i as f64 + 0.5) * hs;
        for j in 0..m {
            total += u.min((j as f64 + 0.5) * ht);
        }
    }
    total * hs * ht
}

#[test]
fn kernel_matches_double_integral_on_grid() {
    for i in 0..10 {
        for j in 0..10 {
            let (s, t) = (0.05 + 0.1 * i as f64, 0.1 + 0.1 * j as f64);
            let k = iwp_kernel(s, t, 1.0).unwrap();
            assert!((k - min_integral(s, t, 2000)).abs() < 1e-6, "K({s}, {t}) = {k}");
            assert_eq!(k, iwp_kernel(t, s, 1.0).unwrap());
            let scaled = iwp_kernel(s, t, 1.7).unwrap();
            assert!((scaled - 1.7 * 1.7 * k).abs() < 1e-15);
        }
    }
}

#[test]
fn covariance_is_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &(n, span) in &[(5, 1.0), (20, 6.75), (60, 3.0), (100, 6.75)] {
        let x = DesignPoints::uniform_sorted(n, span, &mut rng).unwrap();
        let k = build_covariance(&x, 1.0).unwrap();
        assert_eq!(k, k.transpose());
        let eig = SymmetricEigen::new(k.clone());
        let max = eig.eigenvalues.max();
        assert!(eig.eigenvalues.min() > -1e-12 * max, "n = {n}");
    }
}

#[test]
fn curve_draws_have_the_kernel_covariance() {
    let x = DesignPoints::new(vec![0.2, 0.4, 0.6, 0.8, 1.0], 1.0).unwrap();
    let k = build_covariance(&x, 1.0).unwrap();
    let draws = 50_000;
    let mut acc = [0.0; 25];
    let mut mean = [0.0; 5];
    for seed in 0..draws / 2 {
        let pair = sample_curve_pair(&x, 1.0, seed as u64).unwrap();
        for v in [&pair.g_vals, &pair.h_vals] {
            for a in 0..5 {
                mean[a] += v[a];
                for b in 0..5 {
                    acc[a * 5 + b] += v[a] * v[b];
                }
            }
        }
    }
    let nd = draws as f64;
    for a in 0..5 {
        let se_mean = (k[(a, a)] / nd).sqrt();
        assert!((mean[a] / nd).abs() < 4.0 * se_mean);
        for b in 0..5 {
            let emp = acc[a * 5 + b] / nd;
            let se = ((k[(a, a)] * k[(b, b)] + k[(a, b)].powi(2)) / nd).sqrt();
            assert!(
                (emp - k[(a, b)]).abs() < 4.0 * se,
                "cov[{a},{b}] = {emp} vs {}",
                k[(a, b)]
            );
        }
    }
}

#[test]
fn generated_errors_have_the_requested_correlation() {
    let x = DesignPoints::equispaced(40, 6.75).unwrap();
    let (reps, n) = (500usize, 40usize);
    for rho in [0.0, 0.3, -0.6] {
        let model = GeneratingModel::from_lambda(0.5, rho).unwrap();
        let (mut ey, mut ez) = (Vec::new(), Vec::new());
        for r in 0..reps {
            let sim = gen_dataset(&x, &model, 900 + r as u64).unwrap();
            ey.extend(sim.eps_y);
            ez.extend(sim.eps_z);
        }
        let r = sample_correlation(&ey, &ez);
        assert!((r - rho).abs() < 4.0 / ((reps * n) as f64).sqrt(), "rho = {rho}: {r}");
        let sd = (ey.iter().map(|v| v * v).sum::<f64>() / ey.len() as f64).sqrt();
        assert!((sd - 0.5).abs() < 0.01);
    }
}

/// Partial correlation given one covariate from the three pairwise
/// correlations.
fn first_order_partial(y: &[f64], z: &[f64], x: &[f64]) -> f64 {
    let ryz = sample_correlation(y, z);
    let ryx = sample_correlation(y, x);
    let rzx = sample_correlation(z, x);
    (ryz - ryx * rzx) / ((1.0 - ryx * ryx) * (1.0 - rzx * rzx)).sqrt()
}

#[test]
fn linear_residuals_reproduce_the_classical_partial_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [5usize, 12, 40, 200] {
        let x = DesignPoints::uniform_sorted(n, 3.0, &mut rng).unwrap();
        let pos = x.positions();
        let y: Vec<f64> = pos
            .iter()
            .map(|p| 1.0 + 2.0 * p + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z: Vec<f64> = pos
            .iter()
            .zip(&y)
            .map(|(p, yi)| -p + 0.4 * yi + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let expected = first_order_partial(&y, &z, &pos);
        let data = Dataset::new(x, y, z).unwrap();
        let got = partial_correlation(&ols_residuals(&data).unwrap(), Method::Linear).unwrap();
        assert!((got.r_hat - expected).abs() < 1e-10, "n = {n}");
    }
}

/// Kolmogorov distance between a sample and a continuous cdf.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn t_statistic_under_linear_null_is_student_t() {
    let n = 15;
    let reps = 20_000;
    let x = DesignPoints::equispaced(n, 1.0).unwrap();
    let pos = x.positions();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ts = Vec::with_capacity(reps);
    for _ in 0..reps {
        let y: Vec<f64> = pos
            .iter()
            .map(|p| 3.0 * p + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z: Vec<f64> = pos
            .iter()
            .map(|p| 1.0 - p + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let data = Dataset::new(x.clone(), y, z).unwrap();
        let r = partial_correlation(&ols_residuals(&data).unwrap(), Method::Linear).unwrap();
        ts.push(t_statistic(r.r_hat, n, 1).unwrap().value);
    }
    let dist = StudentsT::new(0.0, 1.0, (n - 3) as f64).unwrap();
    let d = ks_distance(ts, |v| dist.cdf(v));
    // 0.1% critical value
    assert!(d < 1.95 / (reps as f64).sqrt(), "KS distance {d}");
}

#[test]
fn oracle_null_is_valid_at_several_levels() {
    let model = GeneratingModel::from_lambda(0.5, 0.0).unwrap();
    for alpha in [0.01, 0.05, 0.1] {
        let s = Scenario::new(20, model, Method::OracleTrueCurves)
            .with_replications(20_000)
            .with_alpha(alpha)
            .with_seed(31);
        let rate = run_scenario(&s, 1).unwrap().rejection_rate;
        let tol = 4.0 * (alpha * (1.0 - alpha) / 20_000.0).sqrt();
        assert!((rate - alpha).abs() <= tol, "alpha {alpha}: {rate}");
    }
}

#[test]
fn monte_carlo_p_agrees_with_enumeration_at_n7() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b = 20_000;
    for k in 0..5u64 {
        let a: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
        let res = ResidualPair::from_residuals(a, c).unwrap();
        let exact = perm_test_exact(&res).unwrap().p_value;
        let mc = perm_test_mc(&res, b, k).unwrap().p_value;
        let se = (exact * (1.0 - exact) / b as f64).sqrt();
        assert!((mc - exact).abs() <= 4.0 * se + 1.0 / b as f64, "{mc} vs {exact}");
    }
}

#[test]
fn residual_correlation_is_bounded_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(3..50);
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        assert!(residual_correlation(&a, &b).unwrap().abs() <= 1.0);
    }
}

#[test]
fn residual_error_shrinks_with_n() {
    let model = GeneratingModel::from_lambda(0.5, 0.0).unwrap();
    let rows = convergence_check(&[50, 200, 800], &model, 200, 12, &ConvergenceOptions::default()).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.median_residual_error).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}
