//! Cubic-spline smoother: the posterior mean of an integrated Wiener curve
//! observed with white noise, evaluated at the design points.
//!
//! With unit-scale kernel matrix `K` and shrinkage `lambda`, the fitted
//! values are `S y` with `S = K (K + lambda^2 I)^{-1}`. Residuals are
//! computed as `lambda^2 (K + lambda^2 I)^{-1} y`, which equals `(I - S) y`
//! and needs only one triangular solve pair against a cached factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wiener_sim::{jitter_for, kernel_matrix, Dataset, DesignPoints};

/// Prior and noise scales assumed when fitting one response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    sigma0_hat: f64,
    sigma_eps_hat: f64,
}

impl SmootherConfig {
    pub fn new(sigma0_hat: f64, sigma_eps_hat: f64) -> Result<Self> {
        if !(sigma0_hat > 0.0 && sigma0_hat.is_finite()) {
            return Err(Error::invalid(format!("sigma0_hat must be positive, got {sigma0_hat}")));
        }
        if !(sigma_eps_hat >= 0.0 && sigma_eps_hat.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_eps_hat must be non-negative, got {sigma_eps_hat}"
            )));
        }
        Ok(Self {
            sigma0_hat,
            sigma_eps_hat,
        })
    }

    pub fn from_lambda(lambda_hat: f64) -> Result<Self> {
        Self::new(1.0, lambda_hat)
    }

    pub fn sigma0_hat(&self) -> f64 {
        self.sigma0_hat
    }

    pub fn sigma_eps_hat(&self) -> f64 {
        self.sigma_eps_hat
    }

    pub fn lambda_hat(&self) -> f64 {
        self.sigma_eps_hat / self.sigma0_hat
    }
}

/// How the overall level of the response is handled before smoothing.
///
/// The prior pins the curve to zero at the origin, so data with an arbitrary
/// level need an intercept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelHandling {
    /// Generalized least squares intercept under the smoother's covariance
    /// (a flat prior on the level). Residuals sum to zero and are unchanged
    /// by adding a constant to the response.
    #[default]
    Gls,
    /// Subtract the sample mean, smooth, add the mean back.
    SampleMean,
    /// Smooth the raw response.
    None,
}

impl LevelHandling {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelHandling::Gls => "gls",
            LevelHandling::SampleMean => "sample-mean",
            LevelHandling::None => "none",
        }
    }
}

#[derive(Clone, Debug)]
enum Operator {
    /// `lambda = 0` with a factorizable kernel: the smoother is the identity.
    Interpolate,
    Shrink {
        chol: Cholesky<f64, Dyn>,
        /// Effective `lambda^2` added to the diagonal.
        ridge: f64,
        /// `(K + ridge I)^{-1} 1` and `1' (K + ridge I)^{-1} 1`, for the GLS level.
        ones_solved: DVector<f64>,
        ones_weight: f64,
    },
}

/// A smoother for a fixed design and shrinkage. Factorizes once; each fit
/// is O(n^2). Immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct SplineSmoother {
    n: usize,
    lambda: f64,
    level: LevelHandling,
    op: Operator,
}

impl SplineSmoother {
    pub fn new(x: &DesignPoints, lambda_hat: f64, level: LevelHandling) -> Result<Self> {
        Self::from_kernel(kernel_matrix(x), lambda_hat, level)
    }

    /// Builds the smoother from an explicit unit-scale kernel matrix.
    pub fn from_kernel(k: DMatrix<f64>, lambda_hat: f64, level: LevelHandling) -> Result<Self> {
        if !(lambda_hat >= 0.0 && lambda_hat.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_hat must be non-negative, got {lambda_hat}"
            )));
        }
        if !k.is_square() || k.nrows() == 0 {
            return Err(Error::invalid("kernel matrix must be square and non-empty"));
        }
        let n = k.nrows();
        let op = if lambda_hat == 0.0 {
            if k.clone().cholesky().is_some() {
                Operator::Interpolate
            } else {
                // rank-deficient kernel (tied abscissae): smooth with the jitter as ridge
                let ridge = jitter_for(&k);
                Self::shrink(k, ridge).ok_or(Error::InterpolationInfeasible)?
            }
        } else {
            let ridge = lambda_hat * lambda_hat;
            Self::shrink(k, ridge).ok_or_else(|| {
                Error::Factorization(format!(
                    "K + lambda^2 I is not positive definite (lambda = {lambda_hat})"
                ))
            })?
        };
        Ok(Self {
            n,
            lambda: lambda_hat,
            level,
            op,
        })
    }

    fn shrink(mut k: DMatrix<f64>, ridge: f64) -> Option<Operator> {
        let n = k.nrows();
        for i in 0..n {
            k[(i, i)] += ridge;
        }
        let chol = k.cholesky()?;
        let ones_solved = chol.solve(&DVector::from_element(n, 1.0));
        let ones_weight = ones_solved.sum();
        Some(Operator::Shrink {
            chol,
            ridge,
            ones_solved,
            ones_weight,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn level(&self) -> LevelHandling {
        self.level
    }

    /// Residuals `y - g_hat(x)`.
    pub fn residuals(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::invalid(format!(
                "response has {} values, smoother expects {}",
                y.len(),
                self.n
            )));
        }
        match &self.op {
            Operator::Interpolate => Ok(vec![0.0; self.n]),
            Operator::Shrink {
                chol,
                ridge,
                ones_solved,
                ones_weight,
            } => {
                let yv = DVector::from_column_slice(y);
                let r = match self.level {
                    LevelHandling::None => chol.solve(&yv) * *ridge,
                    LevelHandling::SampleMean => {
                        let mean = yv.mean();
                        chol.solve(&yv.add_scalar(-mean)) * *ridge
                    }
                    LevelHandling::Gls => {
                        let solved = chol.solve(&yv);
                        let level = ones_solved.dot(&yv) / ones_weight;
                        (solved - ones_solved * level) * *ridge
                    }
                };
                Ok(r.as_slice().to_vec())
            }
        }
    }

    /// Fitted values `g_hat(x_i)`.
    pub fn fit(&self, y: &[f64]) -> Result<Vec<f64>> {
        let r = self.residuals(y)?;
        Ok(y.iter().zip(&r).map(|(a, b)| a - b).collect())
    }
}

/// Fitted spline values at the design points, with the default level handling.
pub fn fit_spline(x: &DesignPoints, y: &[f64], cfg: &SmootherConfig) -> Result<Vec<f64>> {
    SplineSmoother::new(x, cfg.lambda_hat(), LevelHandling::default())?.fit(y)
}

/// Estimated errors of both marginal regressions.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualPair {
    pub eps_y_hat: Vec<f64>,
    pub eps_z_hat: Vec<f64>,
    pub fitted_g: Vec<f64>,
    pub fitted_h: Vec<f64>,
}

impl ResidualPair {
    /// Wraps residuals that were obtained elsewhere; fitted values are zero.
    pub fn from_residuals(eps_y_hat: Vec<f64>, eps_z_hat: Vec<f64>) -> Result<Self> {
        if eps_y_hat.len() != eps_z_hat.len() {
            return Err(Error::invalid(format!(
                "residual vectors differ in length ({} vs {})",
                eps_y_hat.len(),
                eps_z_hat.len()
            )));
        }
        if eps_y_hat.iter().chain(&eps_z_hat).any(|v| !v.is_finite()) {
            return Err(Error::invalid("residuals must be finite"));
        }
        let n = eps_y_hat.len();
        Ok(Self {
            eps_y_hat,
            eps_z_hat,
            fitted_g: vec![0.0; n],
            fitted_h: vec![0.0; n],
        })
    }

    fn from_fits(y: &[f64], eps_y_hat: Vec<f64>, z: &[f64], eps_z_hat: Vec<f64>) -> Self {
        let fitted_g = y.iter().zip(&eps_y_hat).map(|(a, b)| a - b).collect();
        let fitted_h = z.iter().zip(&eps_z_hat).map(|(a, b)| a - b).collect();
        Self {
            eps_y_hat,
            eps_z_hat,
            fitted_g,
            fitted_h,
        }
    }

    pub fn len(&self) -> usize {
        self.eps_y_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_y_hat.is_empty()
    }
}

/// Residuals of spline fits of `y` and `z` on `x`.
pub fn residuals(data: &Dataset, cfg_y: &SmootherConfig, cfg_z: &SmootherConfig) -> Result<ResidualPair> {
    let sy = SplineSmoother::new(&data.design, cfg_y.lambda_hat(), LevelHandling::default())?;
    let sz = if cfg_z.lambda_hat() == cfg_y.lambda_hat() {
        sy.clone()
    } else {
        SplineSmoother::new(&data.design, cfg_z.lambda_hat(), LevelHandling::default())?
    };
    residuals_with(data, &sy, &sz)
}

/// Residuals using prebuilt smoothers.
pub fn residuals_with(data: &Dataset, sy: &SplineSmoother, sz: &SplineSmoother) -> Result<ResidualPair> {
    let ey = sy.residuals(&data.y)?;
    let ez = sz.residuals(&data.z)?;
    Ok(ResidualPair::from_fits(&data.y, ey, &data.z, ez))
}

/// Least-squares line through `(x_i, y_i)`, evaluated at the design points.
pub fn ols_fit(x: &DesignPoints, y: &[f64]) -> Result<Vec<f64>> {
    ols_fit_positions(&x.positions(), y)
}

pub(crate) fn ols_fit_positions(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} x vs {} y",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("least squares needs n >= 3"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate(
            "x is constant; regression line is not identified".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(x.iter().map(|v| my + slope * (v - mx)).collect())
}

/// Residuals of least-squares lines of `y` and `z` on `x`.
pub fn ols_residuals(data: &Dataset) -> Result<ResidualPair> {
    let pos = data.design.positions();
    let fy = ols_fit_positions(&pos, &data.y)?;
    let fz = ols_fit_positions(&pos, &data.z)?;
    let ey = data.y.iter().zip(&fy).map(|(a, b)| a - b).collect();
    let ez = data.z.iter().zip(&fz).map(|(a, b)| a - b).collect();
    Ok(ResidualPair {
        eps_y_hat: ey,
        eps_z_hat: ez,
        fitted_g: fy,
        fitted_h: fz,
    })
}
