//! CSV and JSON report files.
//!
//! Scenario reports have one row per scenario with the columns in
//! [`REPORT_COLUMNS`]; `runtime_seconds` is always last so that a report can
//! be compared for reproducibility after dropping the final column.
//! Convergence reports use [`CONVERGENCE_COLUMNS`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ConvergenceRow, ScenarioReport};
use crate::error::{Error, Result};
use crate::partial_corr::Method;
use crate::spline_smoother::LevelHandling;
use crate::wiener_sim::DesignKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown report format '{other}' (expected csv or json)"
            ))),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 24] = [
    "n",
    "span",
    "design",
    "sigma0",
    "sigma_eps",
    "rho",
    "lambda",
    "fit_lambda_y",
    "fit_lambda_z",
    "estimator",
    "level",
    "alpha",
    "replications",
    "b",
    "master_seed",
    "jitter",
    "rejections",
    "completed",
    "failures",
    "rejection_rate",
    "mc_stderr",
    "mean_abs_r_gap",
    "data_stream_id",
    "runtime_seconds",
];

pub const CONVERGENCE_COLUMNS: [&str; 10] = [
    "n",
    "replications",
    "span",
    "sigma0",
    "sigma_eps",
    "rho",
    "lambda",
    "seed",
    "median_abs_r_gap",
    "median_residual_error",
];

/// One flattened scenario report; field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub span: f64,
    pub design: DesignKind,
    pub sigma0: f64,
    pub sigma_eps: f64,
    pub rho: f64,
    pub lambda: f64,
    pub fit_lambda_y: f64,
    pub fit_lambda_z: f64,
    pub estimator: Method,
    pub level: LevelHandling,
    pub alpha: f64,
    pub replications: usize,
    pub b: usize,
    pub master_seed: u64,
    pub jitter: f64,
    pub rejections: usize,
    pub completed: usize,
    pub failures: usize,
    pub rejection_rate: f64,
    pub mc_stderr: f64,
    pub mean_abs_r_gap: f64,
    pub data_stream_id: u64,
    pub runtime_seconds: f64,
}

impl From<&ScenarioReport> for ReportRow {
    fn from(r: &ScenarioReport) -> Self {
        let s = &r.scenario;
        Self {
            n: s.n,
            span: s.span,
            design: s.design,
            sigma0: s.model.sigma0(),
            sigma_eps: s.model.sigma_eps(),
            rho: s.model.rho(),
            lambda: s.model.lambda(),
            fit_lambda_y: s.fit_lambda_y,
            fit_lambda_z: s.fit_lambda_z,
            estimator: s.estimator,
            level: s.level,
            alpha: s.alpha,
            replications: s.replications,
            b: s.b,
            master_seed: s.master_seed,
            jitter: r.jitter,
            rejections: r.rejections,
            completed: r.completed,
            failures: r.failures,
            rejection_rate: r.rejection_rate,
            mc_stderr: r.mc_stderr,
            mean_abs_r_gap: r.mean_abs_r_gap,
            data_stream_id: s.data_stream_id(),
            runtime_seconds: r.runtime_seconds,
        }
    }
}

fn rows_to_string<T: Serialize>(rows: &[T], columns: &[&str], format: ReportFormat) -> Result<String> {
    let ctx = Path::new("<memory>");
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|source| Error::Json {
                path: ctx.into(),
                source,
            })?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            let csv_err = |source| Error::Csv {
                path: ctx.into(),
                source,
            };
            // written explicitly so that an empty report still has a header
            w.write_record(columns).map_err(csv_err)?;
            for row in rows {
                w.serialize(row).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io {
                path: ctx.into(),
                source: e.into_error(),
            })?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

/// Serialized scenario reports, exactly as [`write_report`] writes them.
pub fn report_to_string(reports: &[ScenarioReport], format: ReportFormat) -> Result<String> {
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    rows_to_string(&rows, &REPORT_COLUMNS, format)
}

pub fn convergence_to_string(rows: &[ConvergenceRow], format: ReportFormat) -> Result<String> {
    rows_to_string(rows, &CONVERGENCE_COLUMNS, format)
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn write_report(reports: &[ScenarioReport], format: ReportFormat, path: &Path) -> Result<()> {
    write_string(path, &report_to_string(reports, format)?)
}

pub fn write_convergence(rows: &[ConvergenceRow], format: ReportFormat, path: &Path) -> Result<()> {
    write_string(path, &convergence_to_string(rows, format)?)
}

fn read_rows<T: DeserializeOwned>(path: &Path, format: ReportFormat) -> Result<Vec<T>> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    match format {
        ReportFormat::Json => {
            let f = File::open(path).map_err(io)?;
            serde_json::from_reader(f).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })
        }
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            r.deserialize()
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|source| Error::Csv {
                    path: path.to_path_buf(),
                    source,
                })
        }
    }
}

pub fn read_report(path: &Path, format: ReportFormat) -> Result<Vec<ReportRow>> {
    read_rows(path, format)
}

pub fn read_convergence(path: &Path, format: ReportFormat) -> Result<Vec<ConvergenceRow>> {
    read_rows(path, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_harness::{run_scenario, Scenario};
    use crate::wiener_sim::GeneratingModel;

    #[test]
    fn csv_header_matches_row_fields() {
        let s = Scenario::new(12, GeneratingModel::from_lambda(0.5, 0.0).unwrap(), Method::Spline).with_replications(5);
        let rep = run_scenario(&s, 1).unwrap();
        let text = report_to_string(&[rep], ReportFormat::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), REPORT_COLUMNS.len());
        assert!(row.contains(",spline,none,"));
    }

    #[test]
    fn empty_reports() {
        let csv = report_to_string(&[], ReportFormat::Csv).unwrap();
        assert_eq!(csv, format!("{}\n", REPORT_COLUMNS.join(",")));
        assert_eq!(report_to_string(&[], ReportFormat::Json).unwrap(), "[]\n");
    }

    #[test]
    fn unknown_format() {
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    }
}
