//! Sandwich covariance estimators for `√T(β̂ − β⁰)`.
//!
//! Every estimator shares `Â = τ(1−τ) T⁻¹ Σ ∇f_t ∇'f_t` and differs only in
//! the density weights `ĥ_t` that enter `D̂ = T⁻¹ Σ ĥ_t ∇f_t ∇'f_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit, EstimateConfig, FitResult};
use crate::exec::{map_indexed, Execution};
use crate::model::GradientPath;
use crate::numkit::{
    exp_integral_e1, mad_with, std_normal_pdf, MadConvention, std_normal_quantile, Matrix,
    SquareMatrix, FRAC_1_SQRT_2PI,
};
use crate::rng::{std_normal, stream, substream_seed};

/// Density-weight method behind a [`SandwichEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Kernel,
    FiniteDifference { dtau: f64 },
    ArbSim { n: usize, vd_updates: usize },
    ArbAnalytic { vd_updates: usize },
    OracleH0,
    OracleTrueBeta,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Kernel => "ker".into(),
            Method::FiniteDifference { .. } => "fd".into(),
            Method::ArbSim { n, vd_updates } => format!("arb-sim(n={n},updates={vd_updates})"),
            Method::ArbAnalytic { vd_updates } => format!("arb-analytic(updates={vd_updates})"),
            Method::OracleH0 => "oracle-h0".into(),
            Method::OracleTrueBeta => "oracle-true-beta".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEstimate {
    pub method: Method,
    pub a_hat: SquareMatrix,
    pub d_hat: SquareMatrix,
    /// `D̂⁻¹ Â D̂⁻¹`, the asymptotic covariance of `√T(β̂ − β⁰)`.
    pub cov: SquareMatrix,
    pub h_hat_path: Vec<f64>,
    /// `V_d` before each ARB pass, ending with the one that would follow the
    /// last pass. Empty for non-ARB methods.
    pub vd_history: Vec<SquareMatrix>,
    /// Number of finite-difference quantile crossings mapped to zero.
    pub crossings: usize,
}

impl SandwichEstimate {
    pub fn vd_final(&self) -> Option<&SquareMatrix> {
        self.vd_history.last()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sandwich estimates serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbConfig {
    pub n_draws: usize,
    /// Identity when absent.
    pub vd_initial: Option<SquareMatrix>,
    pub vd_updates: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ArbConfig {
    fn default() -> Self {
        Self {
            n_draws: 10_000,
            vd_initial: None,
            vd_updates: 2,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl ArbConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be positive".into()));
        }
        if let Some(vd) = &self.vd_initial {
            if vd.rows() != dim || vd.cols() != dim {
                return Err(Error::Dimension(format!("V_d must be {dim}x{dim}")));
            }
            if !vd.is_symmetric(1e-12) {
                return Err(Error::Config("V_d must be symmetric".into()));
            }
            vd.cholesky()?;
        }
        Ok(())
    }
}

/// Which ARB density estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArbVariant {
    Sim,
    Analytic,
}

fn check_grads(grads: &GradientPath, len: usize) -> Result<()> {
    if grads.len() != len {
        return Err(Error::Dimension(format!(
            "{} gradient rows for {} observations",
            grads.len(),
            len
        )));
    }
    if !grads.is_finite() {
        return Err(Error::Domain("gradient path is not finite".into()));
    }
    Ok(())
}

fn weighted_outer(grads: &GradientPath, weight: impl Fn(usize) -> f64) -> Matrix {
    let p = grads.dim();
    let mut m = Matrix::zeros(p, p);
    for (t, g) in grads.rows().enumerate() {
        let w = weight(t);
        if w == 0.0 {
            continue;
        }
        for i in 0..p {
            let wi = w * g[i];
            for j in i..p {
                m[(i, j)] += wi * g[j];
            }
        }
    }
    let n = grads.len().max(1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = m[(i, j)] / n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `τ(1−τ) T⁻¹ Σ ∇f_t ∇'f_t`.
pub fn a_hat(grads: &GradientPath, tau: f64) -> SquareMatrix {
    weighted_outer(grads, |_| 1.0).scale(tau * (1.0 - tau))
}

/// `T⁻¹ Σ ĥ_t ∇f_t ∇'f_t`.
pub fn d_hat(h: &[f64], grads: &GradientPath) -> Result<SquareMatrix> {
    check_grads(grads, h.len())?;
    if let Some(t) = h.iter().position(|v| !(*v >= 0.0) || v.is_infinite()) {
        return Err(Error::Domain(format!("density weight at t={} is {}", t + 1, h[t])));
    }
    Ok(weighted_outer(grads, |t| h[t]))
}

/// `D̂⁻¹ Â D̂⁻¹`, with the iteration index reported on singular `D̂`.
pub fn sandwich_cov(a: &SquareMatrix, d: &SquareMatrix, iteration: usize) -> Result<SquareMatrix> {
    let d_inv = d.invert().map_err(|_| Error::SingularD { iteration })?;
    let mut cov = d_inv.matmul(a)?.matmul(&d_inv)?;
    cov.symmetrize();
    Ok(cov)
}

/// Bandwidth proportion `m̂_T` of the Powell kernel rule.
pub fn kernel_m(t_len: usize, tau: f64) -> Result<f64> {
    let z = std_normal_quantile(tau)?;
    let crit = std_normal_quantile(1.0 - 0.05 / 2.0)?;
    let shape = 1.5 * std_normal_pdf(z).powi(2) / (2.0 * z * z + 1.0);
    Ok((t_len as f64).powf(-1.0 / 3.0) * crit.powf(2.0 / 3.0) * shape.cbrt())
}

/// Powell kernel bandwidth `ĉ_T = k̂_T [Φ⁻¹(τ+m̂_T) − Φ⁻¹(τ−m̂_T)]`, with
/// `k̂_T` the raw median absolute deviation of the residuals about their median.
pub fn kernel_bandwidth(residuals: &[f64], tau: f64) -> Result<f64> {
    kernel_bandwidth_with(residuals, tau, MadConvention::default())
}

pub fn kernel_bandwidth_with(residuals: &[f64], tau: f64, mad: MadConvention) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: residuals.len(),
        });
    }
    let m = kernel_m(residuals.len(), tau)?;
    let (lo, hi) = (tau - m, tau + m);
    if !(lo > 0.0 && hi < 1.0) {
        return Err(Error::BandwidthDomain { lo, hi });
    }
    let k = mad_with(residuals, mad)?;
    Ok(k * (std_normal_quantile(hi)? - std_normal_quantile(lo)?))
}

/// Parzen-window weights `1{|ε̂_t| < ĉ_T} / (2ĉ_T)` and the bandwidth.
pub fn h_hat_kernel(residuals: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    h_hat_kernel_with(residuals, tau, MadConvention::default())
}

pub fn h_hat_kernel_with(residuals: &[f64], tau: f64, mad: MadConvention) -> Result<(Vec<f64>, f64)> {
    let c = kernel_bandwidth_with(residuals, tau, mad)?;
    if !(c > 0.0) {
        return Err(Error::Domain(format!("kernel bandwidth is {c}")));
    }
    let h = residuals
        .iter()
        .map(|e| if e.abs() < c { 0.5 / c } else { 0.0 })
        .collect();
    Ok((h, c))
}

/// Difference quotients `2Δτ / (f_t⁺ − f_t⁻)`. Non-positive denominators
/// give zero and are counted.
pub fn fd_weights(f_hi: &[f64], f_lo: &[f64], dtau: f64) -> Result<(Vec<f64>, usize)> {
    if f_hi.len() != f_lo.len() {
        return Err(Error::Dimension("finite-difference paths differ in length".into()));
    }
    let mut crossings = 0;
    let h = f_hi
        .iter()
        .zip(f_lo)
        .map(|(hi, lo)| {
            let den = hi - lo;
            if den > 0.0 {
                2.0 * dtau / den
            } else {
                crossings += 1;
                0.0
            }
        })
        .collect();
    Ok((h, crossings))
}

#[derive(Debug, Clone)]
pub struct FdPaths {
    pub h: Vec<f64>,
    pub crossings: usize,
    pub fit_lo: FitResult,
    pub fit_hi: FitResult,
}

/// Hendricks–Koenker weights from two extra fits at `τ ± Δτ`.
pub fn h_hat_fd(
    spec: &crate::model::ModelSpec,
    y: &[f64],
    dtau: f64,
    cfg: &EstimateConfig,
) -> Result<FdPaths> {
    let tau = spec.tau;
    if !(dtau > 0.0 && tau - dtau > 0.0 && tau + dtau < 1.0) {
        return Err(Error::Domain(format!("tau +/- dtau must stay in (0,1), dtau = {dtau}")));
    }
    let mut lo_spec = spec.clone();
    lo_spec.tau = tau - dtau;
    let mut hi_spec = spec.clone();
    hi_spec.tau = tau + dtau;
    let fit_lo = fit(&lo_spec, y, &cfg.clone().with_seed(substream_seed(cfg.seed, 1)))?;
    let fit_hi = fit(&hi_spec, y, &cfg.clone().with_seed(substream_seed(cfg.seed, 2)))?;
    let (h, crossings) = fd_weights(&fit_hi.path.f, &fit_lo.path.f, dtau)?;
    Ok(FdPaths {
        h,
        crossings,
        fit_lo,
        fit_hi,
    })
}

/// Marks the `k` smallest absolute residuals, ties broken by index.
pub fn zeroed_set(residuals: &[f64], k: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[a].abs().total_cmp(&residuals[b].abs()).then(a.cmp(&b)));
    let mut mask = vec![false; residuals.len()];
    for &t in order.iter().take(k) {
        mask[t] = true;
    }
    mask
}

/// Draws `δ_i = L z_i / √T` with `L L' = V_d`, stored row-major `n × dim`.
pub fn arb_draws(vd: &SquareMatrix, n: usize, t_len: usize, seed: u64) -> Result<Vec<f64>> {
    let l = vd.cholesky()?;
    let p = vd.rows();
    let scale = 1.0 / (t_len as f64).sqrt();
    let mut rng = stream(seed);
    let mut z = vec![0.0; p];
    let mut out = Vec::with_capacity(n * p);
    for _ in 0..n {
        for zk in z.iter_mut() {
            *zk = std_normal(&mut rng);
        }
        for i in 0..p {
            let s: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
            out.push(s * scale);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbSimPath {
    pub h: Vec<f64>,
    /// Monte Carlo standard error of each `ĥ_t`.
    pub std_err: Vec<f64>,
    /// Draws skipped because `∇'f_t δ_i = 0`.
    pub degenerate: usize,
}

/// Simulation ARB estimator with one shared draw set across `t`.
pub fn h_hat_arb_sim(
    residuals: &[f64],
    grads: &GradientPath,
    draws: &[f64],
    execution: Execution,
) -> Result<ArbSimPath> {
    check_grads(grads, residuals.len())?;
    let p = grads.dim();
    if draws.is_empty() || !draws.len().is_multiple_of(p) {
        return Err(Error::Dimension("draw matrix does not match the gradient dimension".into()));
    }
    let zeroed = zeroed_set(residuals, p);
    let per_t = map_indexed(residuals.len(), execution, |t| {
        let e = residuals[t];
        if zeroed[t] || e == 0.0 {
            return (0.0, 0.0, 0usize);
        }
        let g = grads.row(t);
        let (mut sum, mut sq, mut used, mut skipped) = (0.0, 0.0, 0usize, 0usize);
        for d in draws.chunks_exact(p) {
            let x: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
            if x == 0.0 {
                skipped += 1;
                continue;
            }
            used += 1;
            // 1{ε ≤ x} − 1{ε ≤ 0} is nonzero only when x lies beyond ε on
            // its side; the quotient is then 1/|x|.
            let term = if (e > 0.0 && x >= e) || (e < 0.0 && x < e) {
                1.0 / x.abs()
            } else {
                0.0
            };
            sum += term;
            sq += term * term;
        }
        if used == 0 {
            return (0.0, 0.0, skipped);
        }
        let n = used as f64;
        let mean = sum / n;
        let var = if used > 1 {
            ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / n).sqrt(), skipped)
    });
    Ok(ArbSimPath {
        h: per_t.iter().map(|v| v.0).collect(),
        std_err: per_t.iter().map(|v| v.1).collect(),
        degenerate: per_t.iter().map(|v| v.2).sum(),
    })
}

/// Closed form `E1(ε²/(2δ²)) / (2δ√(2π))` with `δ² = ∇'f V_d ∇f / T`.
pub fn arb_analytic_value(residual: f64, delta: f64) -> Result<f64> {
    if residual == 0.0 {
        return Ok(0.0);
    }
    let s = residual * residual / (2.0 * delta * delta);
    Ok(0.5 * FRAC_1_SQRT_2PI / delta * exp_integral_e1(s)?)
}

/// Analytic ARB estimator.
pub fn h_hat_arb_analytic(
    residuals: &[f64],
    grads: &GradientPath,
    vd: &SquareMatrix,
    execution: Execution,
) -> Result<Vec<f64>> {
    check_grads(grads, residuals.len())?;
    let t_len = residuals.len() as f64;
    let zeroed = zeroed_set(residuals, grads.dim());
    let out = map_indexed(residuals.len(), execution, |t| {
        let e = residuals[t];
        if zeroed[t] || e == 0.0 {
            return Ok(0.0);
        }
        let q = vd.quad_form(grads.row(t));
        if !(q > 0.0) {
            return Err(Error::DegenerateGradient { t: t + 1 });
        }
        arb_analytic_value(e, (q / t_len).sqrt())
    });
    out.into_iter().collect()
}

/// Iterated ARB sandwich: each pass computes `ĥ` under the current `V_d`,
/// then `V_d` is replaced by the resulting `D̂⁻¹ÂD̂⁻¹`.
pub fn arb_sandwich(fit: &FitResult, cfg: &ArbConfig, variant: ArbVariant) -> Result<SandwichEstimate> {
    let grads = fit.grads();
    let p = grads.dim();
    cfg.validate(p)?;
    let t_len = fit.len();
    let a = a_hat(grads, fit.tau());
    let mut vd = cfg.vd_initial.clone().unwrap_or_else(|| Matrix::identity(p));
    let mut history = vec![vd.clone()];
    let mut last = None;
    for iteration in 0..=cfg.vd_updates {
        let h = match variant {
            ArbVariant::Sim => {
                let draws = arb_draws(&vd, cfg.n_draws, t_len, substream_seed(cfg.seed, iteration as u64))
                    .map_err(|_| Error::SingularD { iteration })?;
                h_hat_arb_sim(&fit.residuals, grads, &draws, cfg.execution)?.h
            }
            ArbVariant::Analytic => h_hat_arb_analytic(&fit.residuals, grads, &vd, cfg.execution)?,
        };
        let d = d_hat(&h, grads)?;
        let cov = sandwich_cov(&a, &d, iteration)?;
        vd = cov.clone();
        history.push(vd.clone());
        last = Some((h, d, cov));
    }
    let (h, d, cov) = last.expect("at least one pass");
    let method = match variant {
        ArbVariant::Sim => Method::ArbSim {
            n: cfg.n_draws,
            vd_updates: cfg.vd_updates,
        },
        ArbVariant::Analytic => Method::ArbAnalytic {
            vd_updates: cfg.vd_updates,
        },
    };
    Ok(SandwichEstimate {
        method,
        a_hat: a,
        d_hat: d,
        cov,
        h_hat_path: h,
        vd_history: history,
        crossings: 0,
    })
}

/// Sandwich from given density weights at the fitted gradients.
pub fn sandwich_from_weights(
    grads: &GradientPath,
    tau: f64,
    h: Vec<f64>,
    method: Method,
) -> Result<SandwichEstimate> {
    let a = a_hat(grads, tau);
    let d = d_hat(&h, grads)?;
    let cov = sandwich_cov(&a, &d, 0)?;
    Ok(SandwichEstimate {
        method,
        a_hat: a,
        d_hat: d,
        cov,
        h_hat_path: h,
        vd_history: Vec::new(),
        crossings: 0,
    })
}

pub fn kernel_sandwich(fit: &FitResult) -> Result<SandwichEstimate> {
    kernel_sandwich_with(fit, MadConvention::default())
}

pub fn kernel_sandwich_with(fit: &FitResult, mad: MadConvention) -> Result<SandwichEstimate> {
    let (h, _) = h_hat_kernel_with(&fit.residuals, fit.tau(), mad)?;
    sandwich_from_weights(fit.grads(), fit.tau(), h, Method::Kernel)
}

pub fn fd_sandwich(fit: &FitResult, y: &[f64], dtau: f64, cfg: &EstimateConfig) -> Result<SandwichEstimate> {
    let fd = h_hat_fd(&fit.spec, y, dtau, cfg)?;
    let mut est = sandwich_from_weights(fit.grads(), fit.tau(), fd.h, Method::FiniteDifference { dtau })?;
    est.crossings = fd.crossings;
    Ok(est)
}

/// True density weights at the fitted gradients.
pub fn oracle_h0_sandwich(fit: &FitResult, h_true: &[f64]) -> Result<SandwichEstimate> {
    sandwich_from_weights(fit.grads(), fit.tau(), h_true.to_vec(), Method::OracleH0)
}

/// True density weights with both `Â` and `D̂` built from the gradients at
/// the true parameter.
pub fn oracle_true_beta_sandwich(
    true_grads: &GradientPath,
    tau: f64,
    h_true: &[f64],
) -> Result<SandwichEstimate> {
    sandwich_from_weights(true_grads, tau, h_true.to_vec(), Method::OracleTrueBeta)
}

/// `(1 − β₁) φ(Φ⁻¹(τ))`: the constant density of DGP R1 at its τ-quantile.
pub fn h_oracle_r1(beta1: f64, tau: f64) -> Result<f64> {
    if !(beta1.abs() < 1.0) {
        return Err(Error::Domain(format!("|beta1| must be < 1, got {beta1}")));
    }
    Ok((1.0 - beta1) * std_normal_pdf(std_normal_quantile(tau)?))
}

/// Density of DGP R3 at its τ-quantile for observation `t` (0-based in `y`),
/// truncating the lag sum at `lags`. Returns `+∞` when every available lag
/// is non-positive, since the conditional quantile is then flat in τ.
pub fn h_oracle_r3(y: &[f64], t: usize, beta1: f64, tau: f64, lags: usize) -> Result<f64> {
    if !(beta1.abs() < 1.0) {
        return Err(Error::Domain(format!("|beta1| must be < 1, got {beta1}")));
    }
    let slope = 1.0 / std_normal_pdf(std_normal_quantile(tau)?);
    let mut sum = 0.0;
    let mut w = 1.0;
    for i in 1..=lags.min(t) {
        sum += w * y[t - i].max(0.0).sqrt();
        w *= beta1;
    }
    if sum > 0.0 {
        Ok(1.0 / (slope * sum))
    } else {
        Ok(f64::INFINITY)
    }
}
