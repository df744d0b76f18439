//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use ci_pcorr::partial_corr::{partial_correlation, Method};
use ci_pcorr::perm_test::{perm_test_mc, permutation_statistics};
use ci_pcorr::sim_harness::{replication_dataset, robustness_sweep, Scenario};
use ci_pcorr::spline_smoother::{ols_residuals, residuals_with, LevelHandling, ResidualPair, SplineSmoother};
use ci_pcorr::wiener_sim::{Dataset, DesignPoints, GeneratingModel};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest n accepted from the page; keeps the O(n^3) factorization snappy.
pub const MAX_N: usize = 400;
const MAX_B: usize = 20_000;
const MAX_REPLICATIONS: usize = 2_000;

type Out = Result<String, String>;

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn check_n(n: usize) -> Result<(), String> {
    if n > MAX_N {
        Err(format!("n = {n} is above the demo limit of {MAX_N}"))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct FitView {
    x: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    g_hat: Vec<f64>,
    h_hat: Vec<f64>,
    r_oracle: f64,
    r_spline: f64,
    r_linear: f64,
}

/// One simulated dataset, its spline fits, and the three residual correlations.
pub fn simulate_fit_json(n: usize, lambda: f64, rho: f64, fit_lambda: f64, seed: u64) -> Out {
    check_n(n)?;
    let err = |e: ci_pcorr::Error| e.to_string();
    let model = GeneratingModel::from_lambda(lambda, rho).map_err(err)?;
    let s = Scenario::new(n, model, Method::Spline)
        .with_fit_lambda(fit_lambda)
        .with_seed(seed);
    let sim = replication_dataset(&s, 0).map_err(err)?;
    let sy = SplineSmoother::new(&sim.data.design, fit_lambda, LevelHandling::None).map_err(err)?;
    let spline = residuals_with(&sim.data, &sy, &sy).map_err(err)?;
    let oracle = ResidualPair::from_residuals(sim.eps_y.clone(), sim.eps_z.clone()).map_err(err)?;
    let linear = ols_residuals(&sim.data).map_err(err)?;
    let r = |res: &ResidualPair| partial_correlation(res, Method::Spline).map(|p| p.r_hat).map_err(err);
    to_json(&FitView {
        x: sim.data.design.positions(),
        r_oracle: r(&oracle)?,
        r_spline: r(&spline)?,
        r_linear: r(&linear)?,
        g_hat: spline.fitted_g,
        h_hat: spline.fitted_h,
        g: sim.curves.g_vals,
        h: sim.curves.h_vals,
        y: sim.data.y,
        z: sim.data.z,
    })
}

#[derive(Serialize)]
struct TestView {
    n: usize,
    r_hat: f64,
    p_value: f64,
    b: usize,
    seed: u64,
    permuted: Vec<f64>,
}

/// Permutation test on user data, with the permutation distribution.
pub fn ci_test_json(x: &[f64], y: &[f64], z: &[f64], lambda: f64, b: usize, seed: u64) -> Out {
    check_n(x.len())?;
    if b > MAX_B {
        return Err(format!("at most {MAX_B} permutations in the demo"));
    }
    let err = |e: ci_pcorr::Error| e.to_string();
    let design = DesignPoints::from_observed(x).map_err(err)?;
    let data = Dataset::new(design, y.to_vec(), z.to_vec()).map_err(err)?;
    let sm = SplineSmoother::new(&data.design, lambda, LevelHandling::Gls).map_err(err)?;
    let res = residuals_with(&data, &sm, &sm).map_err(err)?;
    let test = perm_test_mc(&res, b, seed).map_err(err)?;
    to_json(&TestView {
        n: data.len(),
        r_hat: test.r_obs,
        p_value: test.p_value,
        b: test.b_used,
        seed,
        permuted: permutation_statistics(&res, b, seed).map_err(err)?,
    })
}

#[derive(Serialize)]
struct SweepPoint {
    fit_lambda: f64,
    rejection_rate: f64,
    mc_stderr: f64,
}

/// Type I error across fitting lambdas for data generated at `lambda`.
pub fn type1_sweep_json(n: usize, lambda: f64, fit_lambdas: &[f64], replications: usize, seed: u64) -> Out {
    check_n(n)?;
    if replications > MAX_REPLICATIONS {
        return Err(format!("at most {MAX_REPLICATIONS} replications in the demo"));
    }
    let err = |e: ci_pcorr::Error| e.to_string();
    let model = GeneratingModel::from_lambda(lambda, 0.0).map_err(err)?;
    let base = Scenario::new(n, model, Method::Spline)
        .with_replications(replications)
        .with_b(99)
        .with_seed(seed);
    let reports = robustness_sweep(&base, fit_lambdas, 1).map_err(err)?;
    let points: Vec<SweepPoint> = reports
        .iter()
        .map(|r| SweepPoint {
            fit_lambda: r.scenario.fit_lambda_y,
            rejection_rate: r.rejection_rate,
            mc_stderr: r.mc_stderr,
        })
        .collect();
    to_json(&points)
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_fit(n: usize, lambda: f64, rho: f64, fit_lambda: f64, seed: u32) -> Result<String, JsValue> {
    js(simulate_fit_json(n, lambda, rho, fit_lambda, seed as u64))
}

#[wasm_bindgen]
pub fn ci_test(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, lambda: f64, b: usize, seed: u32) -> Result<String, JsValue> {
    js(ci_test_json(&x, &y, &z, lambda, b, seed as u64))
}

#[wasm_bindgen]
pub fn type1_sweep(
    n: usize,
    lambda: f64,
    fit_lambdas: Vec<f64>,
    replications: usize,
    seed: u32,
) -> Result<String, JsValue> {
    js(type1_sweep_json(n, lambda, &fit_lambdas, replications, seed as u64))
}
