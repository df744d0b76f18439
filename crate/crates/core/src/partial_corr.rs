//! Sample partial correlation of residual pairs and the classical t statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline_smoother::ResidualPair;

/// Where the residuals came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spline,
    Linear,
    /// Residuals against the true curves; only available in simulation.
    OracleTrueCurves,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spline => "spline",
            Method::Linear => "linear",
            Method::OracleTrueCurves => "oracle-true-curves",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spline" => Ok(Method::Spline),
            "linear" => Ok(Method::Linear),
            "oracle-true-curves" | "oracle" => Ok(Method::OracleTrueCurves),
            other => Err(Error::invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialCorrResult {
    pub r_hat: f64,
    pub n: usize,
    pub method: Method,
}

/// `sum a_i b_i / sqrt(sum a_i^2 * sum b_i^2)`, with no mean removal.
pub fn residual_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::invalid(format!(
            "partial correlation needs n >= 3, got {}",
            a.len()
        )));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Degenerate("a residual vector is identically zero".into()));
    }
    Ok((ab / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}

pub fn partial_correlation(res: &ResidualPair, method: Method) -> Result<PartialCorrResult> {
    let r_hat = residual_correlation(&res.eps_y_hat, &res.eps_z_hat)?;
    Ok(PartialCorrResult {
        r_hat,
        n: res.len(),
        method,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStatistic {
    pub value: f64,
    pub df: usize,
}

/// `sqrt(n - 2 - d) * r / sqrt(1 - r^2)` on `n - 2 - d` degrees of freedom,
/// where `d` is the dimension of the conditioning variable.
pub fn t_statistic(r_hat: f64, n: usize, d: usize) -> Result<TStatistic> {
    if r_hat.is_nan() || r_hat.abs() >= 1.0 {
        return Err(Error::domain(format!(
            "|r| must be < 1 for a finite t statistic, got {r_hat}"
        )));
    }
    let df = n
        .checked_sub(2 + d)
        .filter(|df| *df >= 1)
        .ok_or_else(|| Error::domain(format!("n - 2 - d must be >= 1 (n = {n}, d = {d})")))?;
    Ok(TStatistic {
        value: (df as f64).sqrt() * r_hat / (1.0 - r_hat * r_hat).sqrt(),
        df,
    })
}
