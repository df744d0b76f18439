//! Monte Carlo experiments: Type I error and power of the residual
//! permutation test under the integrated Wiener generating model.
//!
//! Replication `r` of a scenario draws everything (design when random,
//! curves, errors, permutation seed) from substream `r` of a family keyed by
//! `(master_seed, data_stream_id)`. The data stream id depends only on the
//! data-generating fields, so scenarios that differ only in estimator or in
//! fitting lambda see the same datasets. Reports are reduced in replication
//! order and are identical for any worker count.

mod report;

pub use report::{
    convergence_to_string, read_convergence, read_report, report_to_string, write_convergence, write_report,
    ReportFormat, ReportRow, CONVERGENCE_COLUMNS, REPORT_COLUMNS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partial_corr::{residual_correlation, Method};
use crate::perm_test::{perm_test_mc, MIN_PERMUTATIONS};
use crate::rng::{f64_label, mix, StreamFamily};
use crate::spline_smoother::{ols_residuals, residuals_with, LevelHandling, ResidualPair, SplineSmoother};
use crate::wiener_sim::{
    draw_dataset, CurveSampler, DesignKind, DesignPoints, GeneratingModel, SimulatedDataset, DEFAULT_SPAN,
};

pub const DEFAULT_REPLICATIONS: usize = 2_000;
pub const DEFAULT_SIM_B: usize = 199;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 20_100_401;
pub const DEFAULT_RHO_GRID: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7];

/// Fitting lambdas for the over/undersmoothing sweep at data lambda 0.5.
pub const DEFAULT_FIT_LAMBDA_GRID: [f64; 14] = [
    0.005,
    0.05,
    0.1,
    0.5 / 3.0,
    0.25,
    0.35,
    0.5,
    0.75,
    1.0,
    1.5,
    2.0,
    3.0,
    5.0,
    20.0,
];

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "CI_PCORR_WORKERS";

const SCENARIO_STREAM: u64 = 0x7363_656e;
const CONVERGENCE_STREAM: u64 = 0x636f_6e76;

/// Worker count from `CI_PCORR_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|w| *w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// One cell of a simulation study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub span: f64,
    pub design: DesignKind,
    pub model: GeneratingModel,
    pub fit_lambda_y: f64,
    pub fit_lambda_z: f64,
    pub estimator: Method,
    pub level: LevelHandling,
    pub alpha: f64,
    pub replications: usize,
    pub b: usize,
    pub master_seed: u64,
}

impl Scenario {
    /// Scenario with the desk-scale defaults and the true lambda used for fitting.
    ///
    /// Simulated curves start at zero with zero slope, so the default level
    /// handling is [`LevelHandling::None`]: the smoother is exactly the
    /// posterior mean under the generating model.
    pub fn new(n: usize, model: GeneratingModel, estimator: Method) -> Self {
        Self {
            n,
            span: DEFAULT_SPAN,
            design: DesignKind::Equispaced,
            model,
            fit_lambda_y: model.lambda(),
            fit_lambda_z: model.lambda(),
            estimator,
            level: LevelHandling::None,
            alpha: DEFAULT_ALPHA,
            replications: DEFAULT_REPLICATIONS,
            b: DEFAULT_SIM_B,
            master_seed: DEFAULT_SEED,
        }
    }

    pub fn with_fit_lambda(mut self, lambda: f64) -> Self {
        self.fit_lambda_y = lambda;
        self.fit_lambda_z = lambda;
        self
    }

    pub fn with_estimator(mut self, estimator: Method) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_b(mut self, b: usize) -> Self {
        self.b = b;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_span(mut self, span: f64) -> Self {
        self.span = span;
        self
    }

    /// Replaces the model, keeping the fitting lambdas tied to the new truth.
    pub fn with_model(mut self, model: GeneratingModel) -> Self {
        self.model = model;
        self.fit_lambda_y = model.lambda();
        self.fit_lambda_z = model.lambda();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!("n must be at least 3, got {}", self.n)));
        }
        if self.replications < 1 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.b < MIN_PERMUTATIONS {
            return Err(Error::invalid(format!(
                "b must be at least {MIN_PERMUTATIONS}, got {}",
                self.b
            )));
        }
        for l in [self.fit_lambda_y, self.fit_lambda_z] {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("fitting lambda must be non-negative, got {l}")));
            }
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(Error::invalid(format!("span must be positive, got {}", self.span)));
        }
        Ok(())
    }

    /// Label of the data-generating configuration.
    pub fn data_stream_id(&self) -> u64 {
        let design = match self.design {
            DesignKind::Equispaced => 1,
            DesignKind::Uniform => 2,
        };
        mix(&[
            self.n as u64,
            f64_label(self.span),
            design,
            f64_label(self.model.sigma0()),
            f64_label(self.model.sigma_eps()),
            f64_label(self.model.rho()),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub rejections: usize,
    /// Replications that produced a p-value.
    pub completed: usize,
    pub failures: usize,
    pub rejection_rate: f64,
    /// `sqrt(p (1 - p) / completed)`.
    pub mc_stderr: f64,
    /// Mean `|r_hat - r|` against the true-curve residuals.
    pub mean_abs_r_gap: f64,
    /// Diagonal jitter used when factorizing the curve covariance.
    pub jitter: f64,
    pub runtime_seconds: f64,
}

/// Per-scenario state shared read-only by all replications.
struct Prepared {
    design: Option<DesignPoints>,
    sampler: Option<CurveSampler>,
    smoothers: Option<(SplineSmoother, SplineSmoother)>,
    family: StreamFamily,
}

fn build_smoothers(s: &Scenario, design: &DesignPoints) -> Result<(SplineSmoother, SplineSmoother)> {
    let sy = SplineSmoother::new(design, s.fit_lambda_y, s.level)?;
    let sz = if s.fit_lambda_z == s.fit_lambda_y {
        sy.clone()
    } else {
        SplineSmoother::new(design, s.fit_lambda_z, s.level)?
    };
    Ok((sy, sz))
}

impl Prepared {
    fn new(s: &Scenario) -> Result<Self> {
        let family = StreamFamily::new(&[s.master_seed, SCENARIO_STREAM, s.data_stream_id()]);
        if s.design == DesignKind::Uniform {
            return Ok(Self {
                design: None,
                sampler: None,
                smoothers: None,
                family,
            });
        }
        let design = DesignPoints::equispaced(s.n, s.span)?;
        let sampler = CurveSampler::new(&design)?;
        let smoothers = match s.estimator {
            Method::Spline => Some(build_smoothers(s, &design)?),
            _ => None,
        };
        Ok(Self {
            design: Some(design),
            sampler: Some(sampler),
            smoothers,
            family,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Outcome {
    reject: bool,
    gap: f64,
}

/// `|r_hat - r|`, zero when both residual pairs are identical.
fn r_gap(est: &ResidualPair, truth: &ResidualPair) -> Result<f64> {
    if est.eps_y_hat == truth.eps_y_hat && est.eps_z_hat == truth.eps_z_hat {
        return Ok(0.0);
    }
    let r_hat = residual_correlation(&est.eps_y_hat, &est.eps_z_hat)?;
    let r = residual_correlation(&truth.eps_y_hat, &truth.eps_z_hat)?;
    Ok((r_hat - r).abs())
}

fn replicate(s: &Scenario, prep: &Prepared, r: usize) -> Result<Outcome> {
    let mut rng = prep.family.stream(r as u64);
    let owned;
    let (design, sampler) = match (&prep.design, &prep.sampler) {
        (Some(d), Some(smp)) => (d, smp),
        _ => {
            let d = DesignPoints::uniform_sorted(s.n, s.span, &mut rng)?;
            let smp = CurveSampler::new(&d)?;
            owned = (d, smp);
            (&owned.0, &owned.1)
        }
    };
    let sim = draw_dataset(design, sampler, &s.model, &mut rng);
    let perm_seed: u64 = rng.random();
    let truth = ResidualPair::from_residuals(sim.eps_y.clone(), sim.eps_z.clone())?;
    let est = match s.estimator {
        Method::OracleTrueCurves => truth.clone(),
        Method::Linear => ols_residuals(&sim.data)?,
        Method::Spline => match &prep.smoothers {
            Some((sy, sz)) => residuals_with(&sim.data, sy, sz)?,
            None => {
                let (sy, sz) = build_smoothers(s, design)?;
                residuals_with(&sim.data, &sy, &sz)?
            }
        },
    };
    let test = perm_test_mc(&est, s.b, perm_seed)?;
    let gap = match s.estimator {
        Method::OracleTrueCurves => 0.0,
        _ => r_gap(&est, &truth)?,
    };
    Ok(Outcome {
        reject: test.p_value <= s.alpha + 1e-12,
        gap,
    })
}

/// The dataset drawn by replication `r` of a scenario, with its truth.
pub fn replication_dataset(s: &Scenario, r: usize) -> Result<SimulatedDataset> {
    s.validate()?;
    let prep = Prepared::new(s)?;
    let mut rng = prep.family.stream(r as u64);
    match (&prep.design, &prep.sampler) {
        (Some(d), Some(smp)) => Ok(draw_dataset(d, smp, &s.model, &mut rng)),
        _ => {
            let d = DesignPoints::uniform_sorted(s.n, s.span, &mut rng)?;
            let smp = CurveSampler::new(&d)?;
            Ok(draw_dataset(&d, &smp, &s.model, &mut rng))
        }
    }
}

fn run_indexed<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to start simulation worker pool");
        return pool.install(|| (0..count).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..count).map(f).collect()
}

/// Wall clock that reads zero where no monotonic clock is available.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

pub fn run_scenario(s: &Scenario, workers: usize) -> Result<ScenarioReport> {
    s.validate()?;
    let clock = Stopwatch::start();
    let prep = Prepared::new(s)?;
    let outcomes = run_indexed(s.replications, workers, |r| replicate(s, &prep, r));

    let mut rejections = 0usize;
    let mut completed = 0usize;
    let mut gap_sum = 0.0;
    let mut first_error = None;
    for o in &outcomes {
        match o {
            Ok(o) => {
                completed += 1;
                rejections += o.reject as usize;
                gap_sum += o.gap;
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let failures = s.replications - completed;
    if failures as f64 > MAX_FAILURE_RATE * s.replications as f64 || completed == 0 {
        return Err(Error::TooManyFailures {
            failures,
            replications: s.replications,
            first: first_error.unwrap_or_default(),
        });
    }
    let rate = rejections as f64 / completed as f64;
    Ok(ScenarioReport {
        scenario: s.clone(),
        rejections,
        completed,
        failures,
        rejection_rate: rate,
        mc_stderr: (rate * (1.0 - rate) / completed as f64).sqrt(),
        mean_abs_r_gap: gap_sum / completed as f64,
        jitter: prep.sampler.as_ref().map_or(0.0, |smp| smp.jitter()),
        runtime_seconds: clock.seconds(),
    })
}

/// Spline and oracle power at each `rho`, in grid order (spline first).
pub fn power_curve(base: &Scenario, rho_grid: &[f64], workers: usize) -> Result<Vec<ScenarioReport>> {
    let mut out = Vec::with_capacity(2 * rho_grid.len());
    for &rho in rho_grid {
        let model = GeneratingModel::new(base.model.sigma0(), base.model.sigma_eps(), rho)?;
        let cell = Scenario { model, ..base.clone() };
        for est in [Method::Spline, Method::OracleTrueCurves] {
            out.push(run_scenario(&cell.clone().with_estimator(est), workers)?);
        }
    }
    Ok(out)
}

/// Spline Type I error (or power, for `rho != 0`) across fitting lambdas.
pub fn robustness_sweep(base: &Scenario, fit_lambda_grid: &[f64], workers: usize) -> Result<Vec<ScenarioReport>> {
    if let Some(bad) = fit_lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("fitting lambdas must be positive, got {bad}")));
    }
    fit_lambda_grid
        .iter()
        .map(|&l| {
            let cell = base.clone().with_estimator(Method::Spline).with_fit_lambda(l);
            run_scenario(&cell, workers)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub replications: usize,
    pub span: f64,
    pub sigma0: f64,
    pub sigma_eps: f64,
    pub rho: f64,
    pub lambda: f64,
    pub seed: u64,
    pub median_abs_r_gap: f64,
    /// Median of `||eps_y_hat - eps_y|| / sqrt(n)`.
    pub median_residual_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceOptions {
    pub span: f64,
    pub level: LevelHandling,
    pub workers: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            span: DEFAULT_SPAN,
            level: LevelHandling::None,
            workers: 1,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median `|r_hat - r|` per sample size, spline residuals fitted with the true lambda.
pub fn convergence_check(
    n_grid: &[usize],
    model: &GeneratingModel,
    replications: usize,
    seed: u64,
    opts: &ConvergenceOptions,
) -> Result<Vec<ConvergenceRow>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n grid must be non-empty and strictly increasing"));
    }
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let design = DesignPoints::equispaced(n, opts.span)?;
        let sampler = CurveSampler::new(&design)?;
        let smoother = SplineSmoother::new(&design, model.lambda(), opts.level)?;
        let family = StreamFamily::new(&[
            seed,
            CONVERGENCE_STREAM,
            n as u64,
            f64_label(opts.span),
            f64_label(model.sigma0()),
            f64_label(model.sigma_eps()),
            f64_label(model.rho()),
        ]);
        let outcomes = run_indexed(replications, opts.workers, |r| -> Result<(f64, f64)> {
            let mut rng = family.stream(r as u64);
            let sim = draw_dataset(&design, &sampler, model, &mut rng);
            let est = residuals_with(&sim.data, &smoother, &smoother)?;
            let truth = ResidualPair::from_residuals(sim.eps_y.clone(), sim.eps_z.clone())?;
            let err = est
                .eps_y_hat
                .iter()
                .zip(&truth.eps_y_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / (n as f64).sqrt();
            Ok((r_gap(&est, &truth)?, err))
        });
        let (gaps, errs): (Vec<f64>, Vec<f64>) = outcomes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        rows.push(ConvergenceRow {
            n,
            replications,
            span: opts.span,
            sigma0: model.sigma0(),
            sigma_eps: model.sigma_eps(),
            rho: model.rho(),
            lambda: model.lambda(),
            seed,
            median_abs_r_gap: median(gaps),
            median_residual_error: median(errs),
        });
    }
    Ok(rows)
}
