//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 degenerate data,
//! 4 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partial_corr::{partial_correlation, Method};
use crate::perm_test::{perm_test_mc_with, Alternative, PermOptions, DEFAULT_B};
use crate::sim_harness::{
    convergence_check, convergence_to_string, default_workers, power_curve, replication_dataset, report_to_string,
    robustness_sweep, run_scenario, ConvergenceOptions, ConvergenceRow, ReportFormat, Scenario, ScenarioReport,
    DEFAULT_FIT_LAMBDA_GRID, DEFAULT_RHO_GRID, WORKERS_ENV,
};
use crate::spline_smoother::{residuals_with, LevelHandling, SmootherConfig, SplineSmoother};
use crate::wiener_sim::{Dataset, DesignKind, DesignPoints, GeneratingModel, DEFAULT_SPAN};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const SIMULATE_PRESETS: [&str; 4] = [
    "paper-breakdown",
    "paper-type1",
    "paper-undersmooth",
    "paper-oracle-null",
];
pub const POWER_PRESETS: [&str; 1] = ["paper-fig2"];
pub const ROBUSTNESS_PRESETS: [&str; 1] = ["paper-fig3"];
pub const CONVERGENCE_PRESETS: [&str; 1] = ["paper-convergence"];

#[derive(Debug, Parser)]
#[command(
    name = "ci-pcorr",
    version,
    about = "Conditional independence tests from spline-smoothed partial correlations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test y _||_ z | x on a CSV file with columns x, y, z.
    Test(TestArgs),
    /// Rejection rate of one or more simulated scenarios.
    Simulate(SimulateArgs),
    /// Spline and oracle power over a grid of error correlations.
    Power(PowerArgs),
    /// Type I error over a grid of fitting lambdas (over/undersmoothing).
    Robustness(RobustnessArgs),
    /// Median |r_hat - r| against the true-curve residuals as n grows.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct Smoothing {
    /// Shrinkage for both responses.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_y: Option<f64>,
    #[arg(long)]
    lambda_z: Option<f64>,
    /// Curve scale; with --sigma-eps gives lambda = sigma_eps / sigma0.
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_eps: Option<f64>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_B)]
    b: usize,
    /// Level used only to print a verdict.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "two-sided", value_parser = parse_alternative)]
    alternative: Alternative,
    #[arg(long, default_value = "gls", value_parser = parse_level)]
    level: LevelHandling,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    smoothing: Smoothing,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Data-generating noise-to-signal ratio (sets sigma_eps with sigma0 = 1).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_eps: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Fitting lambda for both responses; defaults to the true lambda.
    #[arg(long)]
    fit_lambda: Option<f64>,
    #[arg(long)]
    lambda_y: Option<f64>,
    #[arg(long)]
    lambda_z: Option<f64>,
    #[arg(long, value_parser = parse_method)]
    estimator: Option<Method>,
    #[arg(long, value_parser = parse_level)]
    level: Option<LevelHandling>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    /// Length of the design interval (0, span].
    #[arg(long)]
    span: Option<f64>,
    #[arg(long, value_parser = parse_design)]
    design: Option<DesignKind>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Also write the first replication's dataset (x, y, z) as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',')]
    fit_lambda_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_level(s: &str) -> std::result::Result<LevelHandling, String> {
    match s {
        "gls" => Ok(LevelHandling::Gls),
        "sample-mean" => Ok(LevelHandling::SampleMean),
        "none" => Ok(LevelHandling::None),
        other => Err(format!("unknown level handling '{other}' (gls, sample-mean, none)")),
    }
}

fn parse_design(s: &str) -> std::result::Result<DesignKind, String> {
    match s {
        "equispaced" => Ok(DesignKind::Equispaced),
        "uniform" => Ok(DesignKind::Uniform),
        other => Err(format!("unknown design '{other}' (equispaced, uniform)")),
    }
}

fn parse_alternative(s: &str) -> std::result::Result<Alternative, String> {
    match s {
        "two-sided" => Ok(Alternative::TwoSided),
        "greater" => Ok(Alternative::Greater),
        "less" => Ok(Alternative::Less),
        other => Err(format!("unknown alternative '{other}' (two-sided, greater, less)")),
    }
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Degenerate(_) => EXIT_DEGENERATE,
            Error::Factorization(_) | Error::InterpolationInfeasible | Error::TooManyFailures { .. } => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let seed = crate::rng::splitmix64(nanos ^ std::process::id() as u64);
        eprintln!("seed: {seed} (generated; pass --seed {seed} to replay)");
        seed
    })
}

fn resolve_workers(w: Option<usize>) -> usize {
    w.filter(|w| *w > 0).unwrap_or_else(default_workers)
}

/// Parses arguments and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Power(a) => cmd_power(a),
        Command::Robustness(a) => cmd_robustness(a),
        Command::Convergence(a) => cmd_convergence(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}

// ---------------------------------------------------------------- test

/// Reads `x`, `y`, `z` columns from a headered CSV file.
pub fn read_xyz(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(usage(format!(
                "{}: header must name columns x, y and z",
                path.display()
            )))
        }
    };
    let extra: Vec<&str> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| ![ix, iy, iz].contains(i))
        .map(|(_, h)| h)
        .collect();
    if !extra.is_empty() {
        eprintln!("warning: ignoring columns: {}", extra.join(", "));
    }
    let (mut xs, mut ys, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let row = row + 1;
        let rec = rec.map_err(|e| usage(format!("{}: row {row}: {e}", path.display())))?;
        let cell = |idx: usize, name: &str| -> CliResult<f64> {
            let raw = rec.get(idx).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(usage(format!(
                    "{}: row {row}, column {name}: '{raw}' is not a finite number",
                    path.display()
                ))),
            }
        };
        xs.push(cell(ix, "x")?);
        ys.push(cell(iy, "y")?);
        zs.push(cell(iz, "z")?);
    }
    Ok((xs, ys, zs))
}

fn smoother_configs(s: &Smoothing) -> CliResult<(SmootherConfig, SmootherConfig)> {
    let from_sigma = match (s.sigma0, s.sigma_eps) {
        (Some(s0), Some(se)) => Some(SmootherConfig::new(s0, se)?),
        (None, None) => None,
        _ => return Err(usage("--sigma0 and --sigma-eps must be given together")),
    };
    let pick = |specific: Option<f64>| -> CliResult<Option<SmootherConfig>> {
        match specific.or(s.lambda) {
            Some(l) => Ok(Some(SmootherConfig::from_lambda(l)?)),
            None => Ok(from_sigma),
        }
    };
    match (pick(s.lambda_y)?, pick(s.lambda_z)?) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(usage(
            "smoothing is not tuned automatically: give --lambda, --lambda-y and --lambda-z, or --sigma0 with --sigma-eps",
        )),
    }
}

#[derive(Serialize)]
struct TestOutput {
    n: usize,
    r_hat: f64,
    p_value: f64,
    b: usize,
    mode: &'static str,
    alternative: Alternative,
    seed: u64,
    alpha: f64,
    reject: bool,
    level: LevelHandling,
    lambda_y: f64,
    lambda_z: f64,
    sigma0_y: f64,
    sigma_eps_y: f64,
    sigma0_z: f64,
    sigma_eps_z: f64,
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|a| *a == v[0])
}

fn cmd_test(a: TestArgs) -> CliResult<()> {
    let (cfg_y, cfg_z) = smoother_configs(&a.smoothing)?;
    let (xs, ys, zs) = read_xyz(&a.input)?;
    if xs.len() < 5 {
        return Err(usage(format!("need at least 5 rows, found {}", xs.len())));
    }
    if is_constant(&ys) || is_constant(&zs) {
        return Err(Error::Degenerate("y or z is constant".into()).into());
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let seed = resolve_seed(a.common.seed);
    let workers = resolve_workers(a.common.workers);
    let design = DesignPoints::from_observed(&xs)?;
    let data = Dataset::new(design, ys, zs)?;
    let sy = SplineSmoother::new(&data.design, cfg_y.lambda_hat(), a.level)?;
    let sz = SplineSmoother::new(&data.design, cfg_z.lambda_hat(), a.level)?;
    let res = residuals_with(&data, &sy, &sz)?;
    partial_correlation(&res, Method::Spline)?;
    let opts = PermOptions {
        b: a.b,
        seed,
        workers,
        alternative: a.alternative,
    };
    let result = perm_test_mc_with(&res, &opts)?;
    let out = TestOutput {
        n: data.len(),
        r_hat: result.r_obs,
        p_value: result.p_value,
        b: result.b_used,
        mode: "monte-carlo",
        alternative: result.alternative,
        seed,
        alpha: a.alpha,
        reject: result.p_value <= a.alpha,
        level: a.level,
        lambda_y: cfg_y.lambda_hat(),
        lambda_z: cfg_z.lambda_hat(),
        sigma0_y: cfg_y.sigma0_hat(),
        sigma_eps_y: cfg_y.sigma_eps_hat(),
        sigma0_z: cfg_z.sigma0_hat(),
        sigma_eps_z: cfg_z.sigma_eps_hat(),
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    } else {
        println!("test of y _||_ z | x  (n = {})", out.n);
        println!("  r_hat         {:.6}", out.r_hat);
        println!("  p_value       {:.6}", out.p_value);
        println!("  permutations  {} ({}, {})", out.b, out.mode, out.alternative.as_str());
        println!("  seed          {}", out.seed);
        println!(
            "  lambda_y      {} (sigma0 {}, sigma_eps {})",
            out.lambda_y, out.sigma0_y, out.sigma_eps_y
        );
        println!(
            "  lambda_z      {} (sigma0 {}, sigma_eps {})",
            out.lambda_z, out.sigma0_z, out.sigma_eps_z
        );
        println!("  level         {}", out.level.as_str());
        println!(
            "  verdict       {} at alpha = {}",
            if out.reject { "reject" } else { "do not reject" },
            out.alpha
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- simulations

fn unknown_preset(name: &str, available: &[&str]) -> CliError {
    usage(format!("unknown preset '{name}'; available: {}", available.join(", ")))
}

fn model_of(args: &ScenarioArgs, base: &GeneratingModel) -> CliResult<GeneratingModel> {
    let rho = args.rho.unwrap_or(base.rho());
    let (s0, se) = match (args.sigma0, args.sigma_eps, args.lambda) {
        (_, Some(_), Some(_)) => return Err(usage("give either --lambda or --sigma-eps, not both")),
        (s0, Some(se), None) => (s0.unwrap_or(base.sigma0()), se),
        (s0, None, Some(l)) => {
            let s0 = s0.unwrap_or(1.0);
            (s0, l * s0)
        }
        (Some(s0), None, None) => (s0, base.lambda() * s0),
        (None, None, None) => (base.sigma0(), base.sigma_eps()),
    };
    Ok(GeneratingModel::new(s0, se, rho)?)
}

/// Applies explicit flags on top of a base scenario.
fn apply_overrides(args: &ScenarioArgs, base: Scenario, seed: u64) -> CliResult<Scenario> {
    let model = model_of(args, &base.model)?;
    let model_changed = model != base.model;
    let mut s = Scenario { model, ..base.clone() };
    if model_changed {
        // keep any deliberate misspecification of the base, relative to the truth
        let ratio_y = base.fit_lambda_y / base.model.lambda().max(f64::MIN_POSITIVE);
        let ratio_z = base.fit_lambda_z / base.model.lambda().max(f64::MIN_POSITIVE);
        if base.model.lambda() > 0.0 {
            s.fit_lambda_y = model.lambda() * ratio_y;
            s.fit_lambda_z = model.lambda() * ratio_z;
        } else {
            s.fit_lambda_y = model.lambda();
            s.fit_lambda_z = model.lambda();
        }
    }
    if let Some(l) = args.fit_lambda {
        s.fit_lambda_y = l;
        s.fit_lambda_z = l;
    }
    if let Some(l) = args.lambda_y {
        s.fit_lambda_y = l;
    }
    if let Some(l) = args.lambda_z {
        s.fit_lambda_z = l;
    }
    if let Some(n) = args.n {
        s.n = n;
    }
    if let Some(e) = args.estimator {
        s.estimator = e;
    }
    if let Some(l) = args.level {
        s.level = l;
    }
    if let Some(a) = args.alpha {
        s.alpha = a;
    }
    if let Some(r) = args.replications {
        s.replications = r;
    }
    if let Some(b) = args.b {
        s.b = b;
    }
    if let Some(t) = args.span {
        s.span = t;
    }
    if let Some(d) = args.design {
        s.design = d;
    }
    s.master_seed = seed;
    s.validate()?;
    Ok(s)
}

fn null_model(lambda: f64) -> GeneratingModel {
    GeneratingModel::from_lambda(lambda, 0.0).expect("valid preset model")
}

/// Scenario list for a `simulate` preset.
pub fn simulate_preset(name: &str) -> Option<Vec<Scenario>> {
    let s = match name {
        "paper-breakdown" => vec![Scenario::new(100, null_model(0.5), Method::Linear)],
        "paper-type1" => [20, 100]
            .iter()
            .flat_map(|&n| [0.3, 0.5, 0.7].map(|l| Scenario::new(n, null_model(l), Method::Spline)))
            .collect(),
        "paper-undersmooth" => vec![Scenario::new(100, null_model(0.5), Method::Spline)
            .with_fit_lambda(0.5 / 3.0)
            .with_replications(5_000)],
        "paper-oracle-null" => {
            vec![Scenario::new(20, null_model(0.5), Method::OracleTrueCurves).with_replications(20_000)]
        }
        _ => return None,
    };
    Some(s)
}

fn default_scenario() -> Scenario {
    Scenario::new(100, null_model(0.5), Method::Spline)
}

fn resolve_scenarios(
    args: &ScenarioArgs,
    seed: u64,
    presets: &[&str],
    single: Option<Scenario>,
) -> CliResult<Vec<Scenario>> {
    let bases = match &args.preset {
        Some(p) if presets.contains(&p.as_str()) => match simulate_preset(p) {
            Some(list) => list,
            None => vec![single.clone().unwrap_or_else(default_scenario)],
        },
        Some(p) => return Err(unknown_preset(p, presets)),
        None => vec![single.unwrap_or_else(default_scenario)],
    };
    bases.into_iter().map(|b| apply_overrides(args, b, seed)).collect()
}

fn summarize(r: &ScenarioReport) {
    let s = &r.scenario;
    eprintln!(
        "n={:<4} lambda={:<6} fit=({}, {}) rho={:<4} {:<18} rate={:.4} +/- {:.4} failures={} ({:.1}s)",
        s.n,
        s.model.lambda(),
        s.fit_lambda_y,
        s.fit_lambda_z,
        s.model.rho(),
        s.estimator.as_str(),
        r.rejection_rate,
        r.mc_stderr,
        r.failures,
        r.runtime_seconds
    );
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| usage(format!("stdout: {e}")))
        }
    }
}

fn emit_reports(reports: &[ScenarioReport], args: &ScenarioArgs) -> CliResult<()> {
    reports.iter().for_each(summarize);
    emit(&report_to_string(reports, args.format)?, args.output.as_deref())
}

fn write_dataset(s: &Scenario, path: &Path) -> CliResult<()> {
    let sim = replication_dataset(s, 0)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| usage(format!("{}: {e}", path.display()));
    w.write_record(["x", "y", "z"]).map_err(io)?;
    let x = sim.data.design.positions();
    for ((xi, yi), zi) in x.iter().zip(&sim.data.y).zip(&sim.data.z) {
        w.write_record([xi, yi, zi].map(|v| v.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let seed = resolve_seed(a.scenario.common.seed);
    let workers = resolve_workers(a.scenario.common.workers);
    let scenarios = resolve_scenarios(&a.scenario, seed, &SIMULATE_PRESETS, None)?;
    if let Some(path) = &a.dump {
        write_dataset(&scenarios[0], path)?;
    }
    let reports = scenarios
        .iter()
        .map(|s| run_scenario(s, workers))
        .collect::<Result<Vec<_>>>()?;
    emit_reports(&reports, &a.scenario)
}

fn cmd_power(a: PowerArgs) -> CliResult<()> {
    let seed = resolve_seed(a.scenario.common.seed);
    let workers = resolve_workers(a.scenario.common.workers);
    let base = Scenario::new(100, null_model(0.5), Method::Spline);
    let base = resolve_scenarios(&a.scenario, seed, &POWER_PRESETS, Some(base))?.remove(0);
    let grid = a.rho_grid.clone().unwrap_or_else(|| DEFAULT_RHO_GRID.to_vec());
    let reports = power_curve(&base, &grid, workers)?;
    emit_reports(&reports, &a.scenario)
}

fn cmd_robustness(a: RobustnessArgs) -> CliResult<()> {
    let seed = resolve_seed(a.scenario.common.seed);
    let workers = resolve_workers(a.scenario.common.workers);
    let base = Scenario::new(100, null_model(0.5), Method::Spline);
    let base = resolve_scenarios(&a.scenario, seed, &ROBUSTNESS_PRESETS, Some(base))?.remove(0);
    let grid = a
        .fit_lambda_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_FIT_LAMBDA_GRID.to_vec());
    let reports = robustness_sweep(&base, &grid, workers)?;
    emit_reports(&reports, &a.scenario)
}

fn cmd_convergence(a: ConvergenceArgs) -> CliResult<()> {
    if let Some(p) = &a.preset {
        if !CONVERGENCE_PRESETS.contains(&p.as_str()) {
            return Err(unknown_preset(p, &CONVERGENCE_PRESETS));
        }
    }
    let seed = resolve_seed(a.common.seed);
    let workers = resolve_workers(a.common.workers);
    let model = GeneratingModel::from_lambda(a.lambda.unwrap_or(0.5), a.rho.unwrap_or(0.0))?;
    let grid = a.n_grid.clone().unwrap_or_else(|| vec![50, 200, 800]);
    let opts = ConvergenceOptions {
        span: a.span.unwrap_or(DEFAULT_SPAN),
        workers,
        ..ConvergenceOptions::default()
    };
    let rows: Vec<ConvergenceRow> = convergence_check(&grid, &model, a.replications.unwrap_or(200), seed, &opts)?;
    for r in &rows {
        eprintln!(
            "n={:<5} median |r_hat - r| = {:.5}  median residual error = {:.5}",
            r.n, r.median_abs_r_gap, r.median_residual_error
        );
    }
    emit(&convergence_to_string(&rows, a.format)?, a.output.as_deref())
}
