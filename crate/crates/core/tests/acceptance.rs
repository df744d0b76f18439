//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ci_pcorr::cli::simulate_preset;
use ci_pcorr::partial_corr::Method;
use ci_pcorr::perm_test::{perm_test_exact, perm_test_mc};
use ci_pcorr::sim_harness::{
    convergence_check, default_workers, power_curve, robustness_sweep, run_scenario, ConvergenceOptions, Scenario,
    DEFAULT_SEED,
};
use ci_pcorr::spline_smoother::ResidualPair;
use ci_pcorr::wiener_sim::{iwp_kernel, GeneratingModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workers() -> usize {
    default_workers()
}

fn preset(name: &str) -> Vec<Scenario> {
    simulate_preset(name)
        .unwrap_or_else(|| panic!("missing preset {name}"))
        .into_iter()
        .map(|s| s.with_seed(DEFAULT_SEED))
        .collect()
}

fn breakdown() -> Outcome {
    let s = &preset("paper-breakdown")[0];
    assert_eq!((s.n, s.model.lambda(), s.replications, s.b), (100, 0.5, 2000, 199));
    let r = run_scenario(s, workers()).unwrap();
    let rate = r.rejection_rate;
    outcome(
        (0.64..=0.78).contains(&rate),
        format!("linear rejection rate {rate:.4} (target [0.64, 0.78])"),
    )
}

fn spline_type1() -> Outcome {
    let mut pass = true;
    let mut cells = Vec::new();
    for s in preset("paper-type1") {
        assert_eq!((s.replications, s.model.rho()), (2000, 0.0));
        let rate = run_scenario(&s, workers()).unwrap().rejection_rate;
        let ok = (0.035..=0.065).contains(&rate);
        pass &= ok;
        cells.push(format!(
            "n={} l={}: {rate:.4}{}",
            s.n,
            s.model.lambda(),
            if ok { "" } else { " (out)" }
        ));
    }
    outcome(pass, format!("{} (target [0.035, 0.065])", cells.join(", ")))
}

fn undersmoothing() -> Outcome {
    let s = &preset("paper-undersmooth")[0];
    assert_eq!((s.n, s.replications), (100, 5000));
    assert!((s.fit_lambda_y - 0.5 / 3.0).abs() < 1e-15);
    let rate = run_scenario(s, workers()).unwrap().rejection_rate;
    outcome(
        (0.045..=0.075).contains(&rate),
        format!("fit lambda 0.5/3 rate {rate:.4} (target [0.045, 0.075])"),
    )
}

fn base_100() -> Scenario {
    Scenario::new(100, GeneratingModel::from_lambda(0.5, 0.0).unwrap(), Method::Spline).with_seed(DEFAULT_SEED)
}

fn oversmoothing() -> Outcome {
    let reports = robustness_sweep(&base_100(), &[0.75, 1.0, 1.5], workers()).unwrap();
    let pass = reports.iter().all(|r| r.rejection_rate <= 0.065);
    let cells: Vec<String> = reports
        .iter()
        .map(|r| format!("fit {}: {:.4}", r.scenario.fit_lambda_y, r.rejection_rate))
        .collect();
    outcome(pass, format!("{} (target <= 0.065)", cells.join(", ")))
}

fn power_loss() -> Outcome {
    let reports = power_curve(&base_100(), &[0.5], workers()).unwrap();
    let spline = reports.iter().find(|r| r.scenario.estimator == Method::Spline).unwrap();
    let oracle = reports
        .iter()
        .find(|r| r.scenario.estimator == Method::OracleTrueCurves)
        .unwrap();
    let gap = oracle.rejection_rate - spline.rejection_rate;
    outcome(
        gap <= 0.07,
        format!(
            "oracle {:.4} - spline {:.4} = {gap:.4} (target <= 0.07)",
            oracle.rejection_rate, spline.rejection_rate
        ),
    )
}

fn convergence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for rho in [0.0, 0.5] {
        let model = GeneratingModel::from_lambda(0.5, rho).unwrap();
        let opts = ConvergenceOptions {
            workers: workers(),
            ..ConvergenceOptions::default()
        };
        let rows = convergence_check(&[50, 200, 800], &model, 200, DEFAULT_SEED, &opts).unwrap();
        let m: Vec<f64> = rows.iter().map(|r| r.median_abs_r_gap).collect();
        pass &= m.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!("rho={rho}: {:.5} > {:.5} > {:.5}", m[0], m[1], m[2]));
    }
    outcome(
        pass,
        format!("median |r_hat - r| by n = 50, 200, 800; {}", parts.join("; ")),
    )
}

fn engine_equivalence() -> Outcome {
    const B: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for k in 0..20u64 {
        let n = rng.random_range(3..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let res = ResidualPair::from_residuals(a, b).unwrap();
        let exact = perm_test_exact(&res).unwrap().p_value;
        let mc = perm_test_mc(&res, B, 1_000 + k).unwrap().p_value;
        let se = (exact * (1.0 - exact) / B as f64).sqrt();
        let z = if se > 0.0 {
            (mc - exact).abs() / se
        } else if mc == exact {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        pass &= z <= 3.0;
    }
    let same = ResidualPair::from_residuals(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
    let p3 = perm_test_exact(&same).unwrap().p_value;
    pass &= (p3 - 2.0 / 6.0).abs() < 1e-15;
    outcome(
        pass,
        format!(
            "20 fixtures, worst |mc - exact| = {worst:.2} SE (target <= 3); n=3 identical p = {p3:.6} (target 1/3)"
        ),
    )
}

/// Midpoint rule for the double integral of min(u, v) over [0, s] x [0, t].
fn min_integral(s: f64, t: f64, cells: usize) -> f64 {
    let (hs, ht) = (s / cells as f64, t / cells as f64);
    let mut total = 0.0;
    for i in 0..cells {
        let u = (i as f64 + 0.5) * hs;
        let mut row = 0.0;
        for j in 0..cells {
            let v = (j as f64 + 0.5) * ht;
            row += u.min(v);
        }
        total += row;
    }
    total * hs * ht
}

fn kernel_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        for j in 1..=10 {
            let (s, t) = (i as f64 / 10.0, j as f64 / 10.0);
            let err = (iwp_kernel(s, t, 1.0).unwrap() - min_integral(s, t, 2000)).abs();
            worst = worst.max(err);
        }
    }
    let corner = iwp_kernel(1.0, 1.0, 1.0).unwrap();
    outcome(
        worst < 1e-6 && (corner - 1.0 / 3.0).abs() < 1e-15,
        format!("max abs error {worst:.2e} on 10x10 grid (target < 1e-6); K(1,1) = {corner}"),
    )
}

fn strip_runtime(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_cli(args: &[&str], workers: usize, out: &Path) -> String {
    let status = Command::new(env!("CARGO_BIN_EXE_ci-pcorr"))
        .args(args)
        .args([
            "--seed",
            "20100401",
            "--workers",
            &workers.to_string(),
            "--format",
            "csv",
            "--output",
        ])
        .arg(out)
        .stderr(std::process::Stdio::null())
        .status()
        .expect("spawn ci-pcorr");
    assert!(status.success(), "{args:?} failed: {status}");
    std::fs::read_to_string(out).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let jobs: [&[&str]; 7] = [
        &["simulate", "--preset", "paper-breakdown"],
        &["simulate", "--preset", "paper-type1"],
        &["simulate", "--preset", "paper-undersmooth"],
        &["simulate", "--preset", "paper-oracle-null"],
        &["power", "--preset", "paper-fig2"],
        &["robustness", "--preset", "paper-fig3"],
        &["convergence", "--preset", "paper-convergence"],
    ];
    let mut bad = Vec::new();
    for (k, args) in jobs.iter().enumerate() {
        let first = run_cli(args, 1, &dir.path().join(format!("{k}a.csv")));
        let again = run_cli(args, 1, &dir.path().join(format!("{k}b.csv")));
        let wide = run_cli(args, 8, &dir.path().join(format!("{k}c.csv")));
        // convergence reports have no runtime column
        let (f, a, w) = if args[0] == "convergence" {
            (first.clone(), again, wide)
        } else {
            (strip_runtime(&first), strip_runtime(&again), strip_runtime(&wide))
        };
        if f != a || f != w || first.lines().count() < 2 {
            bad.push(args[2]);
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} presets byte-identical across reruns and 1 vs 8 workers", jobs.len())
        } else {
            format!("differing reports: {}", bad.join(", "))
        },
    )
}

fn null_validity() -> Outcome {
    let s = &preset("paper-oracle-null")[0];
    assert_eq!(
        (s.n, s.replications, s.estimator),
        (20, 20_000, Method::OracleTrueCurves)
    );
    let rate = run_scenario(s, workers()).unwrap().rejection_rate;
    let tol = 4.0 * (0.05f64 * 0.95 / 20_000.0).sqrt();
    outcome(
        (rate - 0.05).abs() <= tol,
        format!("oracle rejection rate {rate:.4} (target 0.05 +/- {tol:.4})"),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("breakdown of the linear estimator", breakdown),
        ("nominal type I for the spline estimator", spline_type1),
        ("undersmoothing by three", undersmoothing),
        ("oversmoothing robustness", oversmoothing),
        ("little power loss", power_loss),
        ("convergence of r_hat to r", convergence),
        ("permutation engine equivalence", engine_equivalence),
        ("kernel oracle", kernel_oracle),
        ("determinism", determinism),
        ("null validity of the permutation test", null_validity),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        println!(
            "acceptance {:>2} {}: {} | {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
