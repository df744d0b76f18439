//! Integrated Wiener process curves and synthetic datasets.
//!
//! A curve is `g(x) = sigma0 * int_0^x W_t dt` for a standard Wiener process
//! `W`. Designs live on `(0, span]`; internally every position is stored as a
//! unit coordinate `u = x / span` in `(0, 1]` and the kernel is rescaled by
//! self-similarity, `Cov(g(span*s), g(span*t)) = span^3 * K(s, t)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFamily;

/// Default length of the design interval `(0, span]`.
///
/// The generating model is only identified up to this length: with `lambda`
/// fixed, stretching the interval makes the curves rougher relative to the
/// noise. 6.75 is where a linear fit at n = 100, lambda = 0.5 rejects a true
/// null about 71% of the time at the 5% level.
pub const DEFAULT_SPAN: f64 = 6.75;

/// Relative diagonal jitter, scaled by `trace / n`.
pub const JITTER_SCALE: f64 = 1e-10;

const CURVE_STREAM: u64 = 0x6375_7276;
const DATA_STREAM: u64 = 0x6461_7461;

/// Covariance of the integrated Wiener process on the unit interval.
///
/// `K(s, t) = sigma0^2 * (m^2 M / 2 - m^3 / 6)` with `m = min(s, t)`,
/// `M = max(s, t)`.
pub fn iwp_kernel(s: f64, t: f64, sigma0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "kernel arguments must lie in [0, 1], got ({s}, {t})"
        )));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(format!(
            "sigma0 must be positive and finite, got {sigma0}"
        )));
    }
    Ok(sigma0 * sigma0 * unit_kernel(s, t))
}

#[inline]
fn unit_kernel(s: f64, t: f64) -> f64 {
    let (m, big) = if s <= t { (s, t) } else { (t, s) };
    m * m * big / 2.0 - m * m * m / 6.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// `x_i = span * i / n`, `i = 1..n`.
    Equispaced,
    /// i.i.d. uniform on `(0, span]`, sorted; redrawn every replication.
    Uniform,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Equispaced => "equispaced",
            DesignKind::Uniform => "uniform",
        }
    }
}

/// Ordered abscissae, stored as unit coordinates in `(0, 1]` plus a span.
///
/// Designs built by [`DesignPoints::new`], [`DesignPoints::equispaced`] and
/// [`DesignPoints::uniform_sorted`] are strictly increasing. Designs built
/// from observed data keep the data order and may contain ties.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoints {
    unit: Vec<f64>,
    span: f64,
}

impl DesignPoints {
    pub fn new(unit: Vec<f64>, span: f64) -> Result<Self> {
        let design = Self::unchecked_order(unit, span)?;
        if design.unit.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("design points must be strictly increasing"));
        }
        Ok(design)
    }

    fn unchecked_order(unit: Vec<f64>, span: f64) -> Result<Self> {
        if unit.len() < 3 {
            return Err(Error::invalid(format!(
                "need at least 3 design points, got {}",
                unit.len()
            )));
        }
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::invalid(format!("span must be positive and finite, got {span}")));
        }
        if let Some(bad) = unit.iter().find(|u| !(**u > 0.0 && **u <= 1.0)) {
            return Err(Error::invalid(format!(
                "unit design coordinate {bad} is outside (0, 1]"
            )));
        }
        Ok(Self { unit, span })
    }

    pub fn equispaced(n: usize, span: f64) -> Result<Self> {
        let unit = (1..=n).map(|i| i as f64 / n as f64).collect();
        Self::new(unit, span)
    }

    pub fn uniform_sorted<R: Rng + ?Sized>(n: usize, span: f64, rng: &mut R) -> Result<Self> {
        loop {
            // 1 - U maps [0, 1) onto (0, 1]
            let mut unit: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            unit.sort_by(f64::total_cmp);
            if unit.windows(2).all(|w| w[0] < w[1]) {
                return Self::new(unit, span);
            }
        }
    }

    /// Places observed abscissae on `(0, span]`.
    ///
    /// The smallest observation sits one mean spacing to the right of the
    /// origin, mirroring the equispaced layout; `span = range + range/(n-1)`.
    pub fn from_observed(x: &[f64]) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::invalid(format!("need at least 3 observations, got {}", x.len())));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite x value {bad}")));
        }
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range <= 0.0 {
            return Err(Error::Degenerate("x is constant".into()));
        }
        let offset = range / (x.len() - 1) as f64;
        let span = range + offset;
        let unit = x.iter().map(|v| ((v - lo + offset) / span).min(1.0)).collect();
        Self::unchecked_order(unit, span)
    }

    pub fn len(&self) -> usize {
        self.unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    /// Positions on the original `(0, span]` scale.
    pub fn positions(&self) -> Vec<f64> {
        self.unit.iter().map(|u| u * self.span).collect()
    }
}

/// Curve scale, noise level and error correlation of the generating model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingModel {
    sigma0: f64,
    sigma_eps: f64,
    rho: f64,
}

impl GeneratingModel {
    pub fn new(sigma0: f64, sigma_eps: f64, rho: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_eps must be non-negative, got {sigma_eps}"
            )));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(Self { sigma0, sigma_eps, rho })
    }

    /// Model with `sigma0 = 1`, so that `sigma_eps == lambda`.
    pub fn from_lambda(lambda: f64, rho: f64) -> Result<Self> {
        Self::new(1.0, lambda, rho)
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Noise-to-signal ratio `sigma_eps / sigma0`.
    pub fn lambda(&self) -> f64 {
        self.sigma_eps / self.sigma0
    }
}

/// Kernel matrix of the design for `sigma0 = 1`, including the `span^3` factor.
pub fn kernel_matrix(x: &DesignPoints) -> DMatrix<f64> {
    let n = x.len();
    let scale = x.span.powi(3);
    let u = &x.unit;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = scale * unit_kernel(u[i], u[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Covariance matrix `H^2` of `(g(x_1), ..., g(x_n))`.
pub fn build_covariance(x: &DesignPoints, sigma0: f64) -> Result<DMatrix<f64>> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(format!(
            "sigma0 must be positive and finite, got {sigma0}"
        )));
    }
    Ok(kernel_matrix(x) * (sigma0 * sigma0))
}

/// Diagonal jitter `JITTER_SCALE * trace(k) / n` used before factorizing.
pub fn jitter_for(k: &DMatrix<f64>) -> f64 {
    JITTER_SCALE * k.trace() / k.nrows() as f64
}

/// Lower Cholesky factor of the jittered unit-scale kernel, reusable across draws.
#[derive(Clone, Debug)]
pub struct CurveSampler {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CurveSampler {
    pub fn new(x: &DesignPoints) -> Result<Self> {
        let mut k = kernel_matrix(x);
        let jitter = jitter_for(&k);
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        let chol = k.cholesky().ok_or_else(|| {
            Error::Factorization(format!(
                "integrated Wiener covariance (n = {}) is not positive definite after jitter {jitter:e}",
                x.len()
            ))
        })?;
        Ok(Self {
            lower: chol.unpack(),
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.lower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.nrows() == 0
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `sigma0 * L z` for a vector of standard normal draws `z`.
    pub fn sample_from_normals(&self, sigma0: f64, normals: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(normals.len(), n, "need one standard normal per design point");
        let mut out = vec![0.0; n];
        for (j, &zj) in normals.iter().enumerate() {
            let col = self.lower.column(j);
            for i in j..n {
                out[i] += col[i] * zj;
            }
        }
        out.iter_mut().for_each(|v| *v *= sigma0);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurvePair {
    pub g_vals: Vec<f64>,
    pub h_vals: Vec<f64>,
}

pub(crate) fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Two independent integrated Wiener curves evaluated at the design points.
pub fn sample_curve_pair(x: &DesignPoints, sigma0: f64, rng_seed: u64) -> Result<SampledCurvePair> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(format!(
            "sigma0 must be positive and finite, got {sigma0}"
        )));
    }
    let sampler = CurveSampler::new(x)?;
    let mut rng = StreamFamily::new(&[rng_seed, CURVE_STREAM]).stream(0);
    let zg = normals(&mut rng, x.len());
    let zh = normals(&mut rng, x.len());
    Ok(SampledCurvePair {
        g_vals: sampler.sample_from_normals(sigma0, &zg),
        h_vals: sampler.sample_from_normals(sigma0, &zh),
    })
}

/// An observed sample of `(x_i, y_i, z_i)` triples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub design: DesignPoints,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Dataset {
    pub fn new(design: DesignPoints, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let n = design.len();
        if y.len() != n || z.len() != n {
            return Err(Error::invalid(format!(
                "length mismatch: {n} design points, {} y values, {} z values",
                y.len(),
                z.len()
            )));
        }
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::invalid("y and z must be finite"));
        }
        Ok(Self { design, y, z })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// A generated dataset together with the truth it was generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    pub data: Dataset,
    pub curves: SampledCurvePair,
    pub eps_y: Vec<f64>,
    pub eps_z: Vec<f64>,
}

/// Draws curves then errors, in that order, from `rng`.
pub(crate) fn draw_dataset<R: Rng + ?Sized>(
    design: &DesignPoints,
    sampler: &CurveSampler,
    model: &GeneratingModel,
    rng: &mut R,
) -> SimulatedDataset {
    let n = design.len();
    let zg = normals(rng, n);
    let zh = normals(rng, n);
    let e1 = normals(rng, n);
    let e2 = normals(rng, n);
    let g = sampler.sample_from_normals(model.sigma0, &zg);
    let h = sampler.sample_from_normals(model.sigma0, &zh);
    let se = model.sigma_eps;
    let rho = model.rho;
    let tail = (1.0 - rho * rho).sqrt();
    let eps_y: Vec<f64> = e1.iter().map(|a| se * a).collect();
    let eps_z: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| se * (rho * a + tail * b)).collect();
    let y = g.iter().zip(&eps_y).map(|(a, b)| a + b).collect();
    let z = h.iter().zip(&eps_z).map(|(a, b)| a + b).collect();
    SimulatedDataset {
        data: Dataset {
            design: design.clone(),
            y,
            z,
        },
        curves: SampledCurvePair { g_vals: g, h_vals: h },
        eps_y,
        eps_z,
    }
}

/// `y_i = g(x_i) + eps_Y,i`, `z_i = h(x_i) + eps_Z,i` with bivariate normal errors.
pub fn gen_dataset(x: &DesignPoints, model: &GeneratingModel, rng_seed: u64) -> Result<SimulatedDataset> {
    let sampler = CurveSampler::new(x)?;
    let mut rng = StreamFamily::new(&[rng_seed, DATA_STREAM]).stream(0);
    Ok(draw_dataset(x, &sampler, model, &mut rng))
}

/// Pearson correlation, used by tests and diagnostics on generated errors.
pub fn sample_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let va = DVector::from_iterator(a.len(), a.iter().map(|v| v - ma));
    let vb = DVector::from_iterator(b.len(), b.iter().map(|v| v - mb));
    va.dot(&vb) / (va.norm() * vb.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Trapezoid rule for `int_0^s int_0^t min(u, v) du dv` on a `grid x grid` mesh.
    fn min_integral(s: f64, t: f64, grid: usize) -> f64 {
        if s == 0.0 || t == 0.0 {
            return 0.0;
        }
        let hu = s / grid as f64;
        let hv = t / grid as f64;
        let weight = |k: usize| if k == 0 || k == grid { 0.5 } else { 1.0 };
        let mut total = 0.0;
        for i in 0..=grid {
            let u = i as f64 * hu;
            let wi = weight(i);
            let mut row = 0.0;
            for j in 0..=grid {
                let v = j as f64 * hv;
                row += weight(j) * u.min(v);
            }
            total += wi * row;
        }
        total * hu * hv
    }

    #[test]
    fn kernel_origin_and_corner() {
        assert_eq!(iwp_kernel(0.0, 0.7, 1.0).unwrap(), 0.0);
        assert_relative_eq!(iwp_kernel(1.0, 1.0, 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(
            iwp_kernel(0.5, 1.0, 1.0).unwrap(),
            0.25 * 0.5 - 0.125 / 6.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kernel_matches_quadrature_oracle_on_spot_values() {
        for &(s, t) in &[(1.0, 1.0), (0.5, 1.0), (0.3, 0.8)] {
            let oracle = min_integral(s, t, 600);
            assert!((iwp_kernel(s, t, 1.0).unwrap() - oracle).abs() < 1e-6);
        }
        assert!((min_integral(0.5, 1.0, 600) - 0.104_166_666).abs() < 1e-6);
    }

    #[test]
    fn kernel_rejects_bad_domain() {
        assert!(matches!(iwp_kernel(-0.1, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(iwp_kernel(0.1, 1.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(iwp_kernel(0.1, 0.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn covariance_examples() {
        let one = DesignPoints::unchecked_order(vec![1.0; 3], 1.0).unwrap();
        let h = build_covariance(&one, 1.0).unwrap();
        assert_relative_eq!(h[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);

        let x = DesignPoints::unchecked_order(vec![0.5, 1.0, 1.0], 1.0).unwrap();
        let h = build_covariance(&x, 1.0).unwrap();
        assert_relative_eq!(h[(0, 0)], 1.0 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(h[(0, 1)], 0.104_166_666_666_666_67, epsilon = 1e-15);
        assert_relative_eq!(h[(1, 1)], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn span_rescales_by_cube() {
        let a = DesignPoints::equispaced(5, 1.0).unwrap();
        let b = DesignPoints::equispaced(5, 2.0).unwrap();
        let ka = kernel_matrix(&a);
        let kb = kernel_matrix(&b);
        assert_eq!(kb, ka * 8.0);
    }

    #[test]
    fn design_validation() {
        assert!(DesignPoints::new(vec![0.2, 0.5], 1.0).is_err());
        assert!(DesignPoints::new(vec![0.0, 0.5, 1.0], 1.0).is_err());
        assert!(DesignPoints::new(vec![0.2, 0.2, 1.0], 1.0).is_err());
        assert!(DesignPoints::new(vec![0.2, 0.5, 1.0], 0.0).is_err());
        let d = DesignPoints::equispaced(4, 2.0).unwrap();
        assert_eq!(d.positions(), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn observed_design_keeps_order_and_ties() {
        let d = DesignPoints::from_observed(&[3.0, 1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(d.span(), 5.0);
        assert_eq!(d.positions(), vec![3.0, 1.0, 2.0, 2.0, 5.0]);
        assert!(matches!(
            DesignPoints::from_observed(&[1.0, 1.0, 1.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn model_lambda_is_derived() {
        let m = GeneratingModel::new(2.0, 1.0, 0.3).unwrap();
        assert_eq!(m.lambda(), 0.5);
        assert!(GeneratingModel::new(1.0, 0.5, 1.01).is_err());
        assert!(GeneratingModel::new(0.0, 0.5, 0.0).is_err());
        assert!(GeneratingModel::new(1.0, -0.5, 0.0).is_err());
    }

    #[test]
    fn curve_sampling_is_deterministic_and_linear_in_scale() {
        let x = DesignPoints::equispaced(30, DEFAULT_SPAN).unwrap();
        let a = sample_curve_pair(&x, 1.0, 42).unwrap();
        let b = sample_curve_pair(&x, 1.0, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_curve_pair(&x, 2.0, 42).unwrap();
        for (u, v) in a.g_vals.iter().zip(&c.g_vals) {
            assert_eq!(2.0 * u, *v);
        }
        assert_ne!(a.g_vals, a.h_vals);
    }

    #[test]
    fn large_design_factorizes() {
        let x = DesignPoints::equispaced(800, DEFAULT_SPAN).unwrap();
        let s = CurveSampler::new(&x).unwrap();
        assert!(s.jitter() > 0.0);
    }

    #[test]
    fn zero_noise_and_perfect_correlation() {
        let x = DesignPoints::equispaced(25, 1.0).unwrap();
        let quiet = gen_dataset(&x, &GeneratingModel::new(1.0, 0.0, 0.2).unwrap(), 3).unwrap();
        assert_eq!(quiet.data.y, quiet.curves.g_vals);
        assert_eq!(quiet.data.z, quiet.curves.h_vals);

        let tied = gen_dataset(&x, &GeneratingModel::new(1.0, 0.7, 1.0).unwrap(), 3).unwrap();
        assert_eq!(tied.eps_y, tied.eps_z);
    }
}
