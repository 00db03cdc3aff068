//! Wald tests, standard errors, exceedance rates and dynamic quantile tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gamma_q, std_normal_sf, Matrix, SquareMatrix};

/// Upper tail of the χ² distribution, `Q(dof/2, x/2)`.
pub fn chi2_sf(x: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Domain("chi-square needs dof >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("chi-square statistic must be >= 0, got {x}")));
    }
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub r: Matrix,
    pub gamma: Vec<f64>,
}

impl WaldResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// `W = T (Rβ̂ − γ)' [R Σ R']⁻¹ (Rβ̂ − γ)` with `Σ` the sandwich covariance of
/// `√T(β̂ − β⁰)`.
pub fn wald(beta: &[f64], cov: &SquareMatrix, r: &Matrix, gamma: &[f64], t_len: usize) -> Result<WaldResult> {
    let p = beta.len();
    if r.cols() != p || cov.rows() != p || cov.cols() != p {
        return Err(Error::Dimension(format!(
            "R is {}x{}, cov is {}x{}, beta has {p} entries",
            r.rows(),
            r.cols(),
            cov.rows(),
            cov.cols()
        )));
    }
    if r.rows() != gamma.len() || r.rows() == 0 {
        return Err(Error::Dimension("gamma must have one entry per row of R".into()));
    }
    let diff: Vec<f64> = r.mul_vec(beta)?.iter().zip(gamma).map(|(a, g)| a - g).collect();
    let bracket = r.matmul(cov)?.matmul(&r.transpose())?;
    let inv = bracket.invert()?;
    let statistic = (t_len as f64 * inv.quad_form(&diff)).max(0.0);
    let dof = r.rows();
    Ok(WaldResult {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof)?,
        r: r.clone(),
        gamma: gamma.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub estimate: f64,
    pub std_err: f64,
    pub p_value: f64,
}

/// Estimates with `s.e._k = √(Σ_kk / T)` and two-sided normal p-values.
pub fn param_report(beta: &[f64], cov: &SquareMatrix, t_len: usize) -> Result<Vec<ParamRow>> {
    if cov.rows() != beta.len() || cov.cols() != beta.len() {
        return Err(Error::Dimension("covariance does not match the parameter vector".into()));
    }
    beta.iter()
        .enumerate()
        .map(|(k, &b)| {
            let v = cov[(k, k)];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonpositiveVariance { index: k });
            }
            let se = (v / t_len as f64).sqrt();
            Ok(ParamRow {
                estimate: b,
                std_err: se,
                p_value: (2.0 * std_normal_sf((b / se).abs())).min(1.0),
            })
        })
        .collect()
}

/// Percentage of observations strictly below the quantile path.
pub fn exceedance_rate(y: &[f64], f: &[f64]) -> Result<f64> {
    if y.len() != f.len() {
        return Err(Error::Dimension("series and quantile path differ in length".into()));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("exceedance window"));
    }
    let n = y.iter().zip(f).filter(|(y, f)| y < f).count();
    Ok(100.0 * n as f64 / y.len() as f64)
}

/// `Hit_t = 1{y_t ≤ f_t} − τ`.
pub fn hits(y: &[f64], f: &[f64], tau: f64) -> Vec<f64> {
    y.iter()
        .zip(f)
        .map(|(y, f)| if y <= f { 1.0 - tau } else { -tau })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DqMode {
    InSample,
    OutOfSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub mode: DqMode,
    pub instruments: String,
}

/// Default DQ design: constant, `lags` lagged hits and the contemporaneous
/// quantile. The first `lags` observations are dropped; returns the trimmed
/// hits and the instrument matrix.
pub fn default_instruments(hits: &[f64], f: &[f64], lags: usize) -> Result<(Vec<f64>, Matrix)> {
    if hits.len() != f.len() {
        return Err(Error::Dimension("hits and quantile path differ in length".into()));
    }
    if hits.len() <= lags + 1 {
        return Err(Error::TooShort {
            need: lags + 2,
            got: hits.len(),
        });
    }
    let rows: Vec<Vec<f64>> = (lags..hits.len())
        .map(|t| {
            let mut row = Vec::with_capacity(lags + 2);
            row.push(1.0);
            row.extend((1..=lags).map(|i| hits[t - i]));
            row.push(f[t]);
            row
        })
        .collect();
    Ok((hits[lags..].to_vec(), Matrix::from_rows(&rows)?))
}

/// `Hit' X (X'X)⁻¹ X' Hit / (τ(1−τ))`, χ² with `cols(X)` degrees of freedom.
pub fn dq_test(hits: &[f64], x: &Matrix, tau: f64, mode: DqMode, instruments: &str) -> Result<DqResult> {
    if x.rows() != hits.len() {
        return Err(Error::Dimension(format!(
            "{} instrument rows for {} hits",
            x.rows(),
            hits.len()
        )));
    }
    let k = x.cols();
    let mut xtx = Matrix::zeros(k, k);
    let mut xth = vec![0.0; k];
    for (t, h) in hits.iter().enumerate() {
        let row = x.row(t);
        for i in 0..k {
            xth[i] += row[i] * h;
            for j in 0..k {
                xtx[(i, j)] += row[i] * row[j];
            }
        }
    }
    let statistic = if xth.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        (xtx.invert()?.quad_form(&xth) / (tau * (1.0 - tau))).max(0.0)
    };
    Ok(DqResult {
        statistic,
        dof: k,
        p_value: chi2_sf(statistic, k)?,
        mode,
        instruments: instruments.to_string(),
    })
}

/// DQ test with the default instrument set.
pub fn dq_default(y: &[f64], f: &[f64], tau: f64, mode: DqMode) -> Result<DqResult> {
    let h = hits(y, f, tau);
    let (h, x) = default_instruments(&h, f, 4)?;
    dq_test(&h, &x, tau, mode, "const, hit(t-1..t-4), f(t)")
}

/// Four-decimal p-value, starred when it rejects at 5%.
pub fn format_p(p: f64) -> String {
    let star = if p <= 0.05 { "*" } else { "" };
    format!("{:.4}{star}", p.max(0.0))
}
