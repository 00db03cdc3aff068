//! CAViaR model families and the recursions for the fitted quantile path, its
//! gradient and (for the linear lag-one families) its Hessian.
//!
//! Parameters are ordered `[β₀, β₁..β_q (quantile lags), β_{q+1}..β_{q+r}
//! (regressors)]`. Pre-sample observations are zero and every pre-sample
//! quantile equals the fixed initial value `f0`; since `f0` is held fixed
//! the pre-sample gradient is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|f_t|` above this marks the path as non-finite.
pub const OVERFLOW_LIMIT: f64 = 1e12;
const LOGISTIC_CLAMP: f64 = 40.0;

/// Transformation applied to a lagged observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Identity,
    Abs,
    /// `(y)⁺ = max(y, 0)`
    Pos,
    /// `(y)⁻ = -min(y, 0)`
    Neg,
    Square,
    /// `sqrt((y)⁺)`
    SqrtPos,
}

impl Transform {
    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Abs => y.abs(),
            Transform::Pos => y.max(0.0),
            Transform::Neg => (-y).max(0.0),
            Transform::Square => y * y,
            Transform::SqrtPos => y.max(0.0).sqrt(),
        }
    }
}

/// A transformed lagged observation `transform(y_{t-lag})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regressor {
    pub lag: usize,
    pub transform: Transform,
}

impl Regressor {
    pub const fn new(lag: usize, transform: Transform) -> Self {
        Self { lag, transform }
    }

    /// Value at 0-based time index `i`, with zero pre-sample observations.
    #[inline]
    pub fn value(&self, y: &[f64], i: usize) -> f64 {
        if i >= self.lag {
            self.transform.apply(y[i - self.lag])
        } else {
            0.0
        }
    }
}

/// What multiplies `β₀`: a constant one or a lagged observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterceptBasis {
    #[default]
    Constant,
    Lagged(Regressor),
}

/// Linear-in-lags specification
/// `f_t = β₀ b_t + Σ_i β_i f_{t-i} + Σ_j β_{q+j} l_j(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericSpec {
    pub q: usize,
    #[serde(default)]
    pub intercept: InterceptBasis,
    pub regressors: Vec<Regressor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Generic(GenericSpec),
    /// Symmetric absolute value: `β₀ + β₁ f_{t-1} + β₂ |y_{t-1}|`.
    Sav,
    /// Asymmetric slope: `β₀ + β₁ f_{t-1} + β₂ (y_{t-1})⁺ + β₃ (y_{t-1})⁻`.
    AsymmetricSlope,
    /// `-sqrt(β₀ + β₁ f_{t-1}² + β₂ y_{t-1}²)`.
    IndirectGarch,
    /// `f_{t-1} + β₁ ([1 + exp(G (y_{t-1} - f_{t-1}))]⁻¹ - τ)`.
    Adaptive { g: f64 },
}

/// A CAViaR model family at a quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub tau: f64,
}

impl ModelSpec {
    pub fn new(family: Family, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tau must be in (0,1), got {tau}")));
        }
        if let Family::Adaptive { g } = family {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Domain(format!("adaptive slope G must be positive, got {g}")));
            }
        }
        if let Family::Generic(ref gs) = family {
            if gs.regressors.iter().any(|r| r.lag == 0) {
                return Err(Error::Domain("regressor lags must be >= 1".into()));
            }
            if let InterceptBasis::Lagged(r) = gs.intercept {
                if r.lag == 0 {
                    return Err(Error::Domain("intercept basis lag must be >= 1".into()));
                }
            }
        }
        Ok(Self { family, tau })
    }

    pub fn sav(tau: f64) -> Result<Self> {
        Self::new(Family::Sav, tau)
    }

    pub fn asymmetric_slope(tau: f64) -> Result<Self> {
        Self::new(Family::AsymmetricSlope, tau)
    }

    pub fn indirect_garch(tau: f64) -> Result<Self> {
        Self::new(Family::IndirectGarch, tau)
    }

    pub fn adaptive(g: f64, tau: f64) -> Result<Self> {
        Self::new(Family::Adaptive { g }, tau)
    }

    /// Asymmetric slope with `β₀` scaled by `sqrt((y_{t-1})⁺)`, the full
    /// model nesting the time-varying-density DGP.
    pub fn asymmetric_slope_sqrt_intercept(tau: f64) -> Result<Self> {
        Self::new(
            Family::Generic(GenericSpec {
                q: 1,
                intercept: InterceptBasis::Lagged(Regressor::new(1, Transform::SqrtPos)),
                regressors: vec![
                    Regressor::new(1, Transform::Pos),
                    Regressor::new(1, Transform::Neg),
                ],
            }),
            tau,
        )
    }

    /// Parses the short names used on the command line.
    pub fn parse(name: &str, tau: f64, adaptive_g: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sav" => Self::sav(tau),
            "as" | "asymmetric-slope" => Self::asymmetric_slope(tau),
            "igarch" | "indirect-garch" => Self::indirect_garch(tau),
            "adaptive" => Self::adaptive(adaptive_g, tau),
            "as-sqrt" | "as-sqrt-intercept" => Self::asymmetric_slope_sqrt_intercept(tau),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.family {
            Family::Generic(g) if *g == sqrt_intercept_generic() => "as-sqrt",
            Family::Generic(_) => "generic",
            Family::Sav => "sav",
            Family::AsymmetricSlope => "as",
            Family::IndirectGarch => "igarch",
            Family::Adaptive { .. } => "adaptive",
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.family {
            Family::Generic(g) => 1 + g.q + g.regressors.len(),
            Family::Sav | Family::IndirectGarch => 3,
            Family::AsymmetricSlope => 4,
            Family::Adaptive { .. } => 1,
        }
    }

    /// Number of quantile-lag coefficients (they follow `β₀`).
    pub fn quantile_lags(&self) -> usize {
        match &self.family {
            Family::Generic(g) => g.q,
            Family::Sav | Family::AsymmetricSlope | Family::IndirectGarch => 1,
            Family::Adaptive { .. } => 0,
        }
    }

    /// The linear-in-lags form of SAV, AS and Generic families.
    pub fn linear_form(&self) -> Option<GenericSpec> {
        match &self.family {
            Family::Generic(g) => Some(g.clone()),
            Family::Sav => Some(GenericSpec {
                q: 1,
                intercept: InterceptBasis::Constant,
                regressors: vec![Regressor::new(1, Transform::Abs)],
            }),
            Family::AsymmetricSlope => Some(GenericSpec {
                q: 1,
                intercept: InterceptBasis::Constant,
                regressors: vec![
                    Regressor::new(1, Transform::Pos),
                    Regressor::new(1, Transform::Neg),
                ],
            }),
            Family::IndirectGarch | Family::Adaptive { .. } => None,
        }
    }
}

fn sqrt_intercept_generic() -> GenericSpec {
    GenericSpec {
        q: 1,
        intercept: InterceptBasis::Lagged(Regressor::new(1, Transform::SqrtPos)),
        regressors: vec![
            Regressor::new(1, Transform::Pos),
            Regressor::new(1, Transform::Neg),
        ],
    }
}

/// Per-time gradient rows stored row-major (`T × dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPath {
    dim: usize,
    data: Vec<f64>,
}

impl GradientPath {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged gradient rows".into()));
        }
        Ok(Self {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Fitted conditional-quantile path, optionally with its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePath {
    pub f: Vec<f64>,
    pub f0: f64,
    pub grads: Option<GradientPath>,
}

/// Check function `ρ_τ(x) = x (τ - 1{x < 0})`.
#[inline]
pub fn check_loss(tau: f64, residual: f64) -> f64 {
    if residual < 0.0 {
        (tau - 1.0) * residual
    } else {
        tau * residual
    }
}

/// A model bound to a data series and an initial condition; evaluates paths
/// and objectives for many parameter vectors without reallocating the
/// regressor columns.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    spec: ModelSpec,
    y: &'a [f64],
    f0: f64,
    linear: Option<Linear>,
}

#[derive(Debug, Clone)]
struct Linear {
    q: usize,
    r: usize,
    intercept: Vec<f64>,
    // row-major T × r
    cols: Vec<f64>,
}

// Σ ρ_τ(r_t) = (τ − ½) Σ r_t + ½ Σ |r_t|, which keeps the hot loop free of
// data-dependent branches. Overflow is checked once on the running peak.
impl Linear {
    // The recursion f_t = a_t + β₁ f_{t-1} is latency-bound when run one step
    // at a time; unrolling it four steps ahead lets the four quantiles of a
    // block be formed in parallel from the last quantile of the previous one.
    fn objective_lag_one<const R: usize>(&self, y: &[f64], f0: f64, tau: f64, beta: &[f64]) -> f64 {
        let (b0, b1) = (beta[0], beta[1]);
        let mut slopes = [0.0; R];
        slopes.copy_from_slice(&beta[2..2 + R]);
        let (p1, p2, p3, p4) = (b1, b1 * b1, b1 * b1 * b1, b1 * b1 * b1 * b1);
        let drift = |c: f64, row: &[f64]| {
            let mut a = b0 * c;
            for k in 0..R {
                a += slopes[k] * row[k];
            }
            a
        };
        let n = y.len();
        let blocks = n / 4;
        let mut prev = f0;
        let mut sum = [0.0; 4];
        let mut abs_sum = [0.0; 4];
        let mut peak = [0.0f64; 4];
        for ((c, rows), yb) in self
            .intercept
            .chunks_exact(4)
            .zip(self.cols.chunks_exact(4 * R))
            .zip(y.chunks_exact(4))
        {
            let a0 = drift(c[0], &rows[..R]);
            let a1 = drift(c[1], &rows[R..2 * R]);
            let a2 = drift(c[2], &rows[2 * R..3 * R]);
            let a3 = drift(c[3], &rows[3 * R..]);
            let c1 = a1 + p1 * a0;
            let c2 = a2 + p1 * a1 + p2 * a0;
            let c3 = a3 + p1 * a2 + p2 * a1 + p3 * a0;
            let f = [a0 + p1 * prev, c1 + p2 * prev, c2 + p3 * prev, c3 + p4 * prev];
            for k in 0..4 {
                peak[k] = larger(peak[k], f[k].abs());
                let r = yb[k] - f[k];
                sum[k] += r;
                abs_sum[k] += r.abs();
            }
            prev = f[3];
        }
        let mut sum: f64 = sum.iter().sum();
        let mut abs_sum: f64 = abs_sum.iter().sum();
        let mut peak = peak.iter().fold(0.0f64, |m, v| larger(m, *v));
        for t in 4 * blocks..n {
            let f = drift(self.intercept[t], &self.cols[t * R..(t + 1) * R]) + b1 * prev;
            peak = larger(peak, f.abs());
            let r = y[t] - f;
            sum += r;
            abs_sum += r.abs();
            prev = f;
        }
        finish_loss(tau, sum, abs_sum, peak, prev)
    }

    fn objective_lag_one_dyn(&self, y: &[f64], f0: f64, tau: f64, beta: &[f64]) -> f64 {
        let (b0, b1) = (beta[0], beta[1]);
        let slopes = &beta[2..];
        let mut prev = f0;
        let (mut sum, mut abs_sum, mut peak) = (0.0, 0.0, 0.0f64);
        for (t, yt) in y.iter().enumerate() {
            let row = &self.cols[t * self.r..(t + 1) * self.r];
            let mut a = b0 * self.intercept[t];
            for (b, x) in slopes.iter().zip(row) {
                a += b * x;
            }
            let f = a + b1 * prev;
            peak = larger(peak, f.abs());
            let r = yt - f;
            sum += r;
            abs_sum += r.abs();
            prev = f;
        }
        finish_loss(tau, sum, abs_sum, peak, prev)
    }
}

// Plain compare-and-select; `f64::max` carries NaN handling that is slow in
// the hot loop. NaN paths are caught through the sums instead.
#[inline(always)]
fn larger(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

#[inline]
fn finish_loss(tau: f64, sum: f64, abs_sum: f64, peak: f64, last: f64) -> f64 {
    if !(peak <= OVERFLOW_LIMIT) || !last.is_finite() || !sum.is_finite() || !abs_sum.is_finite() {
        return f64::INFINITY;
    }
    ((tau - 0.5) * sum + 0.5 * abs_sum).max(0.0)
}

impl<'a> Design<'a> {
    pub fn new(spec: &ModelSpec, y: &'a [f64], f0: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyInput("observation series"));
        }
        if !f0.is_finite() {
            return Err(Error::Domain("initial quantile f0 must be finite".into()));
        }
        let linear = spec.linear_form().map(|g| {
            let n = y.len();
            let r = g.regressors.len();
            let intercept = (0..n)
                .map(|i| match g.intercept {
                    InterceptBasis::Constant => 1.0,
                    InterceptBasis::Lagged(reg) => reg.value(y, i),
                })
                .collect();
            let mut cols = Vec::with_capacity(n * r);
            for i in 0..n {
                for reg in &g.regressors {
                    cols.push(reg.value(y, i));
                }
            }
            Linear {
                q: g.q,
                r,
                intercept,
                cols,
            }
        });
        Ok(Self {
            spec: spec.clone(),
            y,
            f0,
            linear,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn y(&self) -> &[f64] {
        self.y
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.spec.param_dim() {
            return Err(Error::Dimension(format!(
                "{} parameters for a model with {}",
                beta.len(),
                self.spec.param_dim()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(())
    }

    /// Check-loss objective `S_T(β)`; path failures map to `+∞`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        if self.check_beta(beta).is_err() {
            return f64::INFINITY;
        }
        let tau = self.spec.tau;
        match (&self.linear, &self.spec.family) {
            (Some(lin), _) if lin.q == 1 => match lin.r {
                1 => lin.objective_lag_one::<1>(self.y, self.f0, tau, beta),
                2 => lin.objective_lag_one::<2>(self.y, self.f0, tau, beta),
                _ => lin.objective_lag_one_dyn(self.y, self.f0, tau, beta),
            },
            _ => match self.path(beta) {
                Ok(f) => self
                    .y
                    .iter()
                    .zip(&f)
                    .map(|(y, f)| check_loss(tau, y - f))
                    .sum(),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// Fitted quantile path `f_1..f_T`.
    pub fn path(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_beta(beta)?;
        let n = self.y.len();
        let mut f = Vec::with_capacity(n);
        match (&self.linear, &self.spec.family) {
            (Some(lin), _) => {
                let q = lin.q;
                for t in 0..n {
                    let mut v = beta[0] * lin.intercept[t];
                    for i in 1..=q {
                        let lagged = if t >= i { f[t - i] } else { self.f0 };
                        v += beta[i] * lagged;
                    }
                    let row = &lin.cols[t * lin.r..(t + 1) * lin.r];
                    for (b, x) in beta[1 + q..].iter().zip(row) {
                        v += b * x;
                    }
                    push_checked(&mut f, v, t)?;
                }
            }
            (None, Family::IndirectGarch) => {
                let mut prev = self.f0;
                for t in 0..n {
                    let ylag = if t > 0 { self.y[t - 1] } else { 0.0 };
                    let radicand = beta[0] + beta[1] * prev * prev + beta[2] * ylag * ylag;
                    if radicand < 0.0 {
                        return Err(Error::NegativeRadicand { t: t + 1 });
                    }
                    let v = -radicand.sqrt();
                    push_checked(&mut f, v, t)?;
                    prev = v;
                }
            }
            (None, Family::Adaptive { g }) => {
                let tau = self.spec.tau;
                let mut prev = self.f0;
                for t in 0..n {
                    let ylag = if t > 0 { self.y[t - 1] } else { 0.0 };
                    let l = logistic(*g, ylag, prev);
                    let v = prev + beta[0] * (l - tau);
                    push_checked(&mut f, v, t)?;
                    prev = v;
                }
            }
            (None, _) => unreachable!("linear families always carry a linear form"),
        }
        Ok(f)
    }

    /// Path and gradient path `∇f_t(β)`.
    pub fn path_and_gradient(&self, beta: &[f64]) -> Result<(Vec<f64>, GradientPath)> {
        let f = self.path(beta)?;
        let n = self.y.len();
        let p = self.spec.param_dim();
        let mut g = vec![0.0; n * p];
        match (&self.linear, &self.spec.family) {
            (Some(lin), _) => {
                let q = lin.q;
                for t in 0..n {
                    let (done, rest) = g.split_at_mut(t * p);
                    let row = &mut rest[..p];
                    row[0] = lin.intercept[t];
                    for i in 1..=q {
                        row[i] = if t >= i { f[t - i] } else { self.f0 };
                    }
                    row[1 + q..].copy_from_slice(&lin.cols[t * lin.r..(t + 1) * lin.r]);
                    for i in 1..=q {
                        if t >= i {
                            let prev = &done[(t - i) * p..(t - i + 1) * p];
                            let b = beta[i];
                            for k in 0..p {
                                row[k] += b * prev[k];
                            }
                        }
                    }
                }
            }
            (None, Family::IndirectGarch) => {
                for t in 0..n {
                    if f[t] == 0.0 {
                        return Err(Error::DivisionByZero { t: t + 1 });
                    }
                    let fprev = if t > 0 { f[t - 1] } else { self.f0 };
                    let ylag = if t > 0 { self.y[t - 1] } else { 0.0 };
                    let direct = [1.0, fprev * fprev, ylag * ylag];
                    let scale = 0.5 / f[t];
                    for k in 0..3 {
                        let carried = if t > 0 {
                            2.0 * beta[1] * fprev * g[(t - 1) * p + k]
                        } else {
                            0.0
                        };
                        g[t * p + k] = scale * (direct[k] + carried);
                    }
                }
            }
            (None, Family::Adaptive { g: slope }) => {
                let tau = self.spec.tau;
                let mut gprev = 0.0;
                for t in 0..n {
                    let fprev = if t > 0 { f[t - 1] } else { self.f0 };
                    let ylag = if t > 0 { self.y[t - 1] } else { 0.0 };
                    let l = logistic(*slope, ylag, fprev);
                    let dl_df = slope * l * (1.0 - l);
                    let v = gprev * (1.0 + beta[0] * dl_df) + (l - tau);
                    g[t] = v;
                    gprev = v;
                }
            }
            (None, _) => unreachable!(),
        }
        let grads = GradientPath { dim: p, data: g };
        if !grads.is_finite() {
            return Err(Error::NonFinitePath { t: 0 });
        }
        Ok((f, grads))
    }

    /// Second partials `∂²f_t/∂β_k∂β_l` for SAV and AS; one `p × p` block per t.
    pub fn hessian(&self, beta: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        if !matches!(self.spec.family, Family::Sav | Family::AsymmetricSlope) {
            return Err(Error::UnsupportedFamily(format!(
                "Hessian recursion is only derived for SAV and AS, not {}",
                self.spec.name()
            )));
        }
        let (_, grads) = self.path_and_gradient(beta)?;
        let p = self.spec.param_dim();
        let b1 = beta[1];
        let mut out = Vec::with_capacity(self.y.len());
        let mut prev = vec![vec![0.0; p]; p];
        for t in 0..self.y.len() {
            let gprev: Vec<f64> = if t > 0 {
                grads.row(t - 1).to_vec()
            } else {
                vec![0.0; p]
            };
            let mut h = vec![vec![0.0; p]; p];
            for k in 0..p {
                for l in 0..p {
                    let mut v = b1 * prev[k][l];
                    if k == 1 {
                        v += gprev[l];
                    }
                    if l == 1 {
                        v += gprev[k];
                    }
                    h[k][l] = v;
                }
            }
            prev = h.clone();
            out.push(h);
        }
        Ok(out)
    }
}

#[inline]
fn logistic(g: f64, ylag: f64, fprev: f64) -> f64 {
    let z = (g * (ylag - fprev)).clamp(-LOGISTIC_CLAMP, LOGISTIC_CLAMP);
    1.0 / (1.0 + z.exp())
}

#[inline]
fn push_checked(f: &mut Vec<f64>, v: f64, t: usize) -> Result<()> {
    if !(v.abs() <= OVERFLOW_LIMIT) {
        return Err(Error::NonFinitePath { t: t + 1 });
    }
    f.push(v);
    Ok(())
}

/// Fitted quantile path `f_t(β)`.
pub fn quantile_path(spec: &ModelSpec, beta: &[f64], y: &[f64], f0: f64) -> Result<QuantilePath> {
    let f = Design::new(spec, y, f0)?.path(beta)?;
    Ok(QuantilePath { f, f0, grads: None })
}

/// Quantile path together with the gradient path `∇f_t(β)`.
pub fn gradient_path(spec: &ModelSpec, beta: &[f64], y: &[f64], f0: f64) -> Result<QuantilePath> {
    let (f, g) = Design::new(spec, y, f0)?.path_and_gradient(beta)?;
    Ok(QuantilePath {
        f,
        f0,
        grads: Some(g),
    })
}

/// Per-time Hessian blocks (diagnostic only).
pub fn hessian_path(
    spec: &ModelSpec,
    beta: &[f64],
    y: &[f64],
    f0: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    Design::new(spec, y, f0)?.hessian(beta)
}

/// `S_T(β) = Σ ρ_τ(y_t - f_t(β))`, `+∞` when the path is invalid.
pub fn objective(spec: &ModelSpec, beta: &[f64], y: &[f64], f0: f64) -> f64 {
    match Design::new(spec, y, f0) {
        Ok(d) => d.objective(beta),
        Err(_) => f64::INFINITY,
    }
}
