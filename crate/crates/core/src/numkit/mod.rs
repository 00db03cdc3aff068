//! Special functions, order statistics and small dense linear algebra shared
//! by every other module.

mod matrix;
mod normal;
mod special;
mod stats;

pub use matrix::{Matrix, SquareMatrix};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf, FRAC_1_SQRT_2PI};
pub use special::{exp_integral_e1, gamma_q, ln_gamma, EULER_GAMMA};
pub use stats::{empirical_quantile, mad_with, median_abs_deviation, MadConvention};
