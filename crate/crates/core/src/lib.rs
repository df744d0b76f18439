//! Conditional independence testing with spline-smoothed partial correlations.
//!
//! To test `Y _||_ Z | X`, smooth `y` and `z` on `x` with a cubic spline
//! (the posterior mean under an integrated Wiener prior), correlate the two
//! residual vectors, and calibrate that correlation with a permutation test.
//!
//! ```
//! use ci_pcorr::{perm_test, spline_smoother::SmootherConfig, wiener_sim};
//!
//! let x = wiener_sim::DesignPoints::equispaced(50, 1.0).unwrap();
//! let model = wiener_sim::GeneratingModel::new(1.0, 0.1, 0.0).unwrap();
//! let sim = wiener_sim::gen_dataset(&x, &model, 7).unwrap();
//! let cfg = SmootherConfig::new(1.0, 0.1).unwrap();
//! let result = perm_test::run_ci_test(&sim.data, &cfg, &cfg, 999, 42).unwrap();
//! assert!(result.p_value > 0.0 && result.p_value <= 1.0);
//! ```

pub mod error;
pub mod partial_corr;
pub mod rng;
pub mod sim_harness;
pub mod spline_smoother;
pub mod wiener_sim;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
