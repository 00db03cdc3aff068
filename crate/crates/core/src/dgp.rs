//! All-quantile CAViaR data-generating processes.
//!
//! A DGP fixes the coefficient of every regressor as a function of the
//! quantile level `u`, so that `y_t = f_t(β_{u_t})` with `u_t` i.i.d. uniform.
//! Because `f_t(β_u)` depends on the lagged quantiles at the *same* level `u`,
//! the simulator keeps, for every future draw `u_s`, the running value of
//! `f_t(β_{u_s})`. This is exact and costs `O(n² q)` for `n` generated points.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InterceptBasis, ModelSpec, Regressor, Transform};
use crate::numkit::{std_normal_pdf, std_normal_quantile};
use crate::rng;

pub const DEFAULT_BURN_IN: usize = 200;
pub const EXPLOSION_LIMIT: f64 = 1e9;

/// Coefficient as a function of the quantile level `u ∈ (0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefFn {
    Const { value: f64 },
    /// `scale · Φ⁻¹(u)`
    Normal { scale: f64 },
    /// `scale · F⁻¹_{t(3)}(u)`
    StudentT3 { scale: f64 },
    /// `scales[k] · Φ⁻¹(u)` for `breaks[k-1] < u <= breaks[k]`; the last
    /// regime runs to 1, so `scales` has one more entry than `breaks`.
    Regimes { breaks: Vec<f64>, scales: Vec<f64> },
    /// `intercept + slope · u`
    Affine { intercept: f64, slope: f64 },
}

impl CoefFn {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            CoefFn::Const { value } => *value,
            CoefFn::Normal { scale } => scale * std_normal_quantile(u).unwrap_or(f64::NAN),
            CoefFn::StudentT3 { scale } => scale * student_t3_quantile(u).unwrap_or(f64::NAN),
            CoefFn::Regimes { .. } => {
                self.regime_scale(u) * std_normal_quantile(u).unwrap_or(f64::NAN)
            }
            CoefFn::Affine { intercept, slope } => intercept + slope * u,
        }
    }

    /// `d/du` of the coefficient (away from regime breaks).
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            CoefFn::Const { .. } => 0.0,
            CoefFn::Normal { scale } => scale / normal_density_at_quantile(u),
            CoefFn::StudentT3 { scale } => match student_t3_quantile(u) {
                Ok(x) => scale / student_t3_pdf(x),
                Err(_) => f64::NAN,
            },
            CoefFn::Regimes { .. } => self.regime_scale(u) / normal_density_at_quantile(u),
            CoefFn::Affine { slope, .. } => *slope,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefFn::Const { .. })
    }

    fn regime_scale(&self, u: f64) -> f64 {
        match self {
            CoefFn::Regimes { breaks, scales } => {
                let k = breaks.iter().take_while(|b| u > **b).count();
                scales[k]
            }
            _ => 1.0,
        }
    }
}

fn normal_density_at_quantile(u: f64) -> f64 {
    match std_normal_quantile(u) {
        Ok(x) => std_normal_pdf(x),
        Err(_) => f64::NAN,
    }
}

/// Distribution used for the pre-sample quantiles `f_{1-i}(β_u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    Normal,
    StudentT3,
}

impl Innovation {
    pub fn quantile(self, u: f64) -> Result<f64> {
        match self {
            Innovation::Normal => std_normal_quantile(u),
            Innovation::StudentT3 => student_t3_quantile(u),
        }
    }

    pub fn quantile_derivative(self, u: f64) -> Result<f64> {
        let x = self.quantile(u)?;
        Ok(match self {
            Innovation::Normal => 1.0 / std_normal_pdf(x),
            Innovation::StudentT3 => 1.0 / student_t3_pdf(x),
        })
    }
}

/// `f_t(β_u) = β₀(u) b_t + Σ_i β_i(u) f_{t-i}(β_u) + Σ_j β_{q+j}(u) l_j(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub q: usize,
    #[serde(default)]
    pub intercept: InterceptBasis,
    pub regressors: Vec<Regressor>,
    /// One function per coefficient, ordered as the model parameters.
    pub coefs: Vec<CoefFn>,
    pub innovation: Innovation,
}

pub const CATALOG: [&str; 11] = [
    "1a", "1b", "1c", "2a", "2b", "2c", "r1", "r2", "r3", "r4", "iid-normal",
];

fn lag1(t: Transform) -> Regressor {
    Regressor::new(1, t)
}

fn c(value: f64) -> CoefFn {
    CoefFn::Const { value }
}

impl DgpSpec {
    pub fn new(
        name: impl Into<String>,
        q: usize,
        intercept: InterceptBasis,
        regressors: Vec<Regressor>,
        coefs: Vec<CoefFn>,
        innovation: Innovation,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            q,
            intercept,
            regressors,
            coefs,
            innovation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefs.len() != self.param_dim() {
            return Err(Error::Dimension(format!(
                "DGP '{}' has {} coefficient functions for {} parameters",
                self.name,
                self.coefs.len(),
                self.param_dim()
            )));
        }
        if self.regressors.iter().any(|r| r.lag == 0) {
            return Err(Error::Domain("regressor lags must be >= 1".into()));
        }
        for cf in &self.coefs {
            if let CoefFn::Regimes { breaks, scales } = cf {
                let sorted = breaks.windows(2).all(|w| w[0] < w[1]);
                let inside = breaks.iter().all(|b| *b > 0.0 && *b < 1.0);
                if scales.len() != breaks.len() + 1 || !sorted || !inside {
                    return Err(Error::Domain(
                        "regime breaks must be sorted in (0,1) with one more scale than breaks"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn param_dim(&self) -> usize {
        1 + self.q + self.regressors.len()
    }

    /// Built-in DGPs by name (case-insensitive, dots optional: `R1`, `1.a`).
    pub fn catalog(name: &str) -> Result<Self> {
        let key: String = name
            .to_ascii_lowercase()
            .chars()
            .filter(|ch| *ch != '.')
            .collect();
        let t3 = CoefFn::StudentT3 { scale: 1.0 };
        let n01 = CoefFn::Normal { scale: 1.0 };
        let constant = InterceptBasis::Constant;
        use Innovation::*;
        use Transform::*;
        let spec = match key.as_str() {
            "1a" => Self::new("1a", 1, constant, vec![lag1(Abs)], vec![t3, c(0.5), c(-0.5)], StudentT3),
            "1b" => Self::new("1b", 1, constant, vec![lag1(Identity)], vec![t3, c(0.5), c(-0.5)], StudentT3),
            "1c" => Self::new("1c", 0, constant, vec![lag1(Identity)], vec![t3, c(-0.5)], StudentT3),
            "2a" => Self::new("2a", 1, constant, vec![lag1(Abs)], vec![t3, c(-0.5), c(0.5)], StudentT3),
            // the printed intercept of 2.b reads F⁻¹(τ); u_t is meant, as in its siblings
            "2b" => Self::new("2b", 1, constant, vec![lag1(Identity)], vec![t3, c(-0.5), c(0.5)], StudentT3),
            "2c" => Self::new("2c", 0, constant, vec![lag1(Identity)], vec![t3, c(0.5)], StudentT3),
            "r1" => Self::new("r1", 1, constant, vec![lag1(Abs)], vec![n01, c(0.2), c(0.3)], Normal),
            "r2" => Self::new("r2", 1, constant, vec![lag1(Identity)], vec![n01, c(0.2), c(0.3)], Normal),
            "r3" => Self::new(
                "r3",
                1,
                InterceptBasis::Lagged(lag1(SqrtPos)),
                vec![lag1(Abs)],
                vec![n01, c(0.2), c(0.3)],
                Normal,
            ),
            "r4" => Self::new(
                "r4",
                1,
                constant,
                vec![lag1(Abs)],
                vec![
                    CoefFn::Regimes {
                        breaks: vec![0.4, 0.6],
                        scales: vec![3.0, 1.0, 2.0],
                    },
                    c(0.2),
                    c(0.3),
                ],
                Normal,
            ),
            "iid-normal" | "iid" => Self::new("iid-normal", 0, constant, vec![], vec![n01], Normal),
            _ => Err(Error::Config(format!(
                "unknown DGP '{name}' (known: {})",
                CATALOG.join(", ")
            ))),
        }?;
        Ok(spec)
    }

    /// Coefficient vector `β_u`.
    pub fn beta_at(&self, u: f64) -> Vec<f64> {
        self.coefs.iter().map(|cf| cf.eval(u)).collect()
    }

    /// True parameter vector at level `tau` expressed in the parameterisation
    /// of `model`.
    ///
    /// Each DGP regressor must be reproducible from the model's regressors at
    /// the same lag: an exact transform match, `|y| = y⁺ + y⁻` or
    /// `y = y⁺ − y⁻`. The quantile-lag order and intercept basis must agree.
    pub fn true_beta_for(&self, model: &ModelSpec, tau: f64) -> Result<Vec<f64>> {
        let lin = model.linear_form().ok_or_else(|| {
            Error::UnsupportedFamily(format!("{} is not linear in its lags", model.name()))
        })?;
        if lin.q != self.q || lin.intercept != self.intercept {
            return Err(Error::UnsupportedForm(format!(
                "model {} does not nest DGP {}",
                model.name(),
                self.name
            )));
        }
        let beta = self.beta_at(tau);
        let mut out = vec![0.0; model.param_dim()];
        out[..=self.q].copy_from_slice(&beta[..=self.q]);
        let find = |lag: usize, tr: Transform| {
            lin.regressors
                .iter()
                .position(|r| r.lag == lag && r.transform == tr)
        };
        for (j, reg) in self.regressors.iter().enumerate() {
            let b = beta[1 + self.q + j];
            if let Some(k) = find(reg.lag, reg.transform) {
                out[1 + lin.q + k] += b;
                continue;
            }
            let split = match reg.transform {
                Transform::Abs => Some((1.0, 1.0)),
                Transform::Identity => Some((1.0, -1.0)),
                _ => None,
            };
            match (split, find(reg.lag, Transform::Pos), find(reg.lag, Transform::Neg)) {
                (Some((sp, sn)), Some(kp), Some(kn)) => {
                    out[1 + lin.q + kp] += sp * b;
                    out[1 + lin.q + kn] += sn * b;
                }
                _ => {
                    return Err(Error::UnsupportedForm(format!(
                        "model {} cannot represent regressor {:?} of DGP {}",
                        model.name(),
                        reg,
                        self.name
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// Simulated sample. The burn-in segment is retained privately so quantile
/// paths at any level can be recomputed over the full history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    /// Observations after burn-in.
    pub y: Vec<f64>,
    /// Quantile levels realised after burn-in.
    pub u: Vec<f64>,
    burn_y: Vec<f64>,
}

impl SimOutput {
    pub fn burn_in(&self) -> usize {
        self.burn_y.len()
    }

    fn full_y(&self) -> Vec<f64> {
        let mut all = self.burn_y.clone();
        all.extend_from_slice(&self.y);
        all
    }

    /// The true conditional `tau`-quantile path `f_t(β_τ)` over the kept sample.
    pub fn quantile_path(&self, dgp: &DgpSpec, tau: f64) -> Result<Vec<f64>> {
        let full = self.full_y();
        let path = level_path(dgp, &full, tau)?;
        Ok(path[self.burn_in()..].to_vec())
    }

    /// `∂f_t(β_τ)/∂τ` over the kept sample; its reciprocal is the conditional
    /// density of `y_t` at its `tau`-quantile.
    pub fn quantile_slope_path(&self, dgp: &DgpSpec, tau: f64) -> Result<Vec<f64>> {
        let full = self.full_y();
        let beta = dgp.beta_at(tau);
        let dbeta: Vec<f64> = dgp.coefs.iter().map(|cf| cf.derivative(tau)).collect();
        let f = level_path(dgp, &full, tau)?;
        let q = dgp.q;
        let init = dgp.innovation.quantile(tau)?;
        let dinit = dgp.innovation.quantile_derivative(tau)?;
        let mut d = Vec::with_capacity(full.len());
        for t in 0..full.len() {
            let mut v = dbeta[0] * basis_value(dgp, &full, t);
            for i in 1..=q {
                let (fl, dl) = if t >= i { (f[t - i], d[t - i]) } else { (init, dinit) };
                v += dbeta[i] * fl + beta[i] * dl;
            }
            for (j, reg) in dgp.regressors.iter().enumerate() {
                v += dbeta[1 + q + j] * reg.value(&full, t);
            }
            d.push(v);
        }
        Ok(d[self.burn_in()..].to_vec())
    }
}

fn basis_value(dgp: &DgpSpec, y: &[f64], t: usize) -> f64 {
    match dgp.intercept {
        InterceptBasis::Constant => 1.0,
        InterceptBasis::Lagged(reg) => reg.value(y, t),
    }
}

// f_t(β_u) for t over the whole history at a fixed level u.
fn level_path(dgp: &DgpSpec, y: &[f64], u: f64) -> Result<Vec<f64>> {
    let beta = dgp.beta_at(u);
    let init = dgp.innovation.quantile(u)?;
    let q = dgp.q;
    let mut f = Vec::with_capacity(y.len());
    for t in 0..y.len() {
        let mut v = beta[0] * basis_value(dgp, y, t);
        for i in 1..=q {
            v += beta[i] * if t >= i { f[t - i] } else { init };
        }
        for (j, reg) in dgp.regressors.iter().enumerate() {
            v += beta[1 + q + j] * reg.value(y, t);
        }
        f.push(v);
    }
    Ok(f)
}

/// Simulates `t_len` observations after the default 200-observation burn-in.
pub fn simulate(dgp: &DgpSpec, t_len: usize, seed: u64) -> Result<SimOutput> {
    simulate_with_burn_in(dgp, t_len, seed, DEFAULT_BURN_IN)
}

pub fn simulate_with_burn_in(
    dgp: &DgpSpec,
    t_len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<SimOutput> {
    dgp.validate()?;
    if t_len == 0 {
        return Err(Error::EmptyInput("sample size T must be at least 1"));
    }
    let n = burn_in + t_len;
    let p = dgp.param_dim();
    let q = dgp.q;
    let r = dgp.regressors.len();

    let mut stream = rng::stream(seed);
    let u: Vec<f64> = (0..n).map(|_| rng::open01(&mut stream)).collect();
    let mut coef = Vec::with_capacity(n * p);
    for &uk in &u {
        coef.extend(dgp.coefs.iter().map(|cf| cf.eval(uk)));
    }
    // lagged quantiles f_{t-1..t-q}(β_{u_k}) for every k not yet realised
    let mut lags = Vec::with_capacity(n * q);
    for &uk in &u {
        let f0 = dgp.innovation.quantile(uk)?;
        lags.extend(std::iter::repeat_n(f0, q));
    }

    let mut y = Vec::with_capacity(n);
    let mut x = vec![0.0; r];
    for t in 0..n {
        let b = basis_value(dgp, &y, t);
        for (xj, reg) in x.iter_mut().zip(&dgp.regressors) {
            *xj = reg.value(&y, t);
        }
        // quantile-lag terms only matter for future draws when q > 0
        let last = if q > 0 { n } else { t + 1 };
        let mut yt = 0.0;
        for k in t..last {
            let ck = &coef[k * p..(k + 1) * p];
            let lk = &mut lags[k * q..(k + 1) * q];
            let mut v = ck[0] * b;
            for i in 0..q {
                v += ck[1 + i] * lk[i];
            }
            for j in 0..r {
                v += ck[1 + q + j] * x[j];
            }
            if k == t {
                yt = v;
            } else if q > 0 {
                lk.rotate_right(1);
                lk[0] = v;
            }
        }
        if !(yt.abs() <= EXPLOSION_LIMIT) {
            return Err(Error::Explosion {
                t: t + 1,
                value: yt.abs(),
            });
        }
        y.push(yt);
    }

    let kept_y = y.split_off(burn_in);
    Ok(SimOutput {
        y: kept_y,
        u: u[burn_in..].to_vec(),
        burn_y: y,
    })
}

/// A pair of adjacent grid levels whose quantiles are out of order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    /// 1-based time index within the kept sample.
    pub t: usize,
    pub u_lo: f64,
    pub u_hi: f64,
}

/// Evaluates `f_t(β_u)` on the grid at every kept `t` and lists the places
/// where a higher level gives a strictly lower quantile.
pub fn check_monotone(dgp: &DgpSpec, sim: &SimOutput, grid: &[f64]) -> Vec<MonotoneViolation> {
    let paths: Vec<Vec<f64>> = grid
        .iter()
        .map(|&u| sim.quantile_path(dgp, u).unwrap_or_else(|_| vec![f64::NAN; sim.y.len()]))
        .collect();
    let mut out = Vec::new();
    for t in 0..sim.y.len() {
        for w in 0..grid.len().saturating_sub(1) {
            let (a, b) = (paths[w][t], paths[w + 1][t]);
            let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
            if !(b >= a - tol) {
                out.push(MonotoneViolation {
                    t: t + 1,
                    u_lo: grid[w],
                    u_hi: grid[w + 1],
                });
            }
        }
    }
    out
}

/// Student t(3) density.
pub fn student_t3_pdf(x: f64) -> f64 {
    let d = 3.0 + x * x;
    6.0 * 3f64.sqrt() / (PI * d * d)
}

/// Student t(3) distribution function.
pub fn student_t3_cdf(x: f64) -> f64 {
    let th = (x / 3f64.sqrt()).atan();
    0.5 + (th + th.sin() * th.cos()) / PI
}

/// Inverse of the Student t(3) distribution function.
///
/// With `x = −√3 cot(δ/2)` the lower half reduces to `δ − sin δ = 2πu` on
/// `δ ∈ (0, π]`, solved by safeguarded Newton; the upper half follows by
/// symmetry. Working in `δ` keeps full relative accuracy far into the tail.
pub fn student_t3_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("t(3) quantile needs u in (0,1), got {u}")));
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    if u > 0.5 {
        return Ok(-t3_lower(1.0 - u));
    }
    Ok(t3_lower(u))
}

fn t3_lower(u: f64) -> f64 {
    let target = 2.0 * PI * u;
    let g = |d: f64| -> f64 {
        if d < 0.1 {
            let d2 = d * d;
            d * d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0 * (1.0 - d2 / 72.0)))
        } else {
            d - d.sin()
        }
    };
    let (mut lo, mut hi) = (0.0, PI);
    let mut d = (6.0 * target).cbrt().min(PI);
    for _ in 0..100 {
        let val = g(d) - target;
        if val > 0.0 {
            hi = d;
        } else {
            lo = d;
        }
        let half = (0.5 * d).sin();
        let slope = 2.0 * half * half;
        let mut next = d - val / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - d).abs() <= 1e-16 * d {
            d = next;
            break;
        }
        d = next;
    }
    -3f64.sqrt() / (0.5 * d).tan()
}

/// Writes a single-column CSV with header `y`.
pub fn write_csv<W: Write>(mut w: W, y: &[f64]) -> Result<()> {
    writeln!(w, "y")?;
    for v in y {
        writeln!(w, "{v}")?;
    }
    Ok(())
}
