//! Simulation, estimation and inference for CAViaR conditional-quantile
//! models.
//!
//! * [`numkit`]: special functions and small linear algebra.
//! * [`model`]: model families, quantile/gradient recursions and the check-loss objective.
//! * [`dgp`]: all-quantile data-generating processes and their simulation.
//! * [`stability`]: polynomial root conditions for linear CAViaR DGPs.
//! * [`estimate`]: multistart Nelder–Mead estimation.
//! * [`covmat`]: sandwich covariance estimators (kernel, finite difference,
//!   adaptive random bandwidth, oracle).
//! * [`infer`]: Wald tests, standard errors, exceedances and DQ tests.
//! * [`mcstudy`]: Monte Carlo size studies.

pub mod covmat;
pub mod dgp;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod infer;
pub mod mcstudy;
pub mod model;
pub mod numkit;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Execution;
