//! Order statistics used for initial conditions and bandwidth rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample quantile as the order statistic at 1-based index `ceil(tau * n)`.
pub fn empirical_quantile(xs: &[f64], tau: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("empirical_quantile"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("quantile level must be in (0,1), got {tau}")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_index(sorted.len(), tau)])
}

fn order_index(n: usize, tau: f64) -> usize {
    let k = (tau * n as f64).ceil() as usize;
    k.clamp(1, n) - 1
}

/// Centre and scaling used for the median absolute deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MadConvention {
    /// `median |x - median(x)|`, no consistency factor.
    #[default]
    RawAboutMedian,
    /// `median |x|`, no consistency factor.
    RawAboutZero,
    /// `1.4826 * median |x - median(x)|`.
    ScaledAboutMedian,
}

/// Raw median absolute deviation about the sample median.
pub fn median_abs_deviation(xs: &[f64]) -> Result<f64> {
    mad_with(xs, MadConvention::RawAboutMedian)
}

pub fn mad_with(xs: &[f64], convention: MadConvention) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("median_abs_deviation"));
    }
    let centre = match convention {
        MadConvention::RawAboutZero => 0.0,
        _ => empirical_quantile(xs, 0.5)?,
    };
    let dev: Vec<f64> = xs.iter().map(|x| (x - centre).abs()).collect();
    let raw = empirical_quantile(&dev, 0.5)?;
    Ok(match convention {
        MadConvention::ScaledAboutMedian => 1.4826 * raw,
        _ => raw,
    })
}
