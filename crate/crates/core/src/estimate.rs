//! Multistart Nelder–Mead estimation of CAViaR parameters.
//!
//! 1. draw `n_trials` initial vectors uniformly in a bounds box;
//! 2. run a Nelder–Mead search from each;
//! 3. keep the `m_keep` best;
//! 4. restart the search from each kept vector, `a_polish` times;
//! 5. return the best polished vector.
//!
//! The initial quantile `f0` is the empirical τ-quantile of the first
//! `⌊0.1 T⌋` observations and stays fixed. Bounds only shape the initial
//! draws; local searches may leave the box. Indirect GARCH is searched over
//! nonnegative coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{Design, Family, ModelSpec, QuantilePath};
use crate::numkit::empirical_quantile;
use crate::rng;

pub const MIN_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Stop once `max f − min f` over the simplex falls below this.
    pub spread_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            spread_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search (reflection 1, expansion 2, contractions 0.5,
/// shrink 0.5). The initial simplex perturbs each nonzero coordinate by 5%
/// and each zero coordinate by 0.00025. An infinite objective is treated as
/// worse than any finite value.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for k in 0..n {
        let mut v = x0.to_vec();
        v[k] = if v[k] != 0.0 { 1.05 * v[k] } else { 0.00025 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let spread = values[worst] - values[best];
        if spread.is_finite() && spread <= opts.spread_tol {
            converged = true;
            break;
        }
        if values[best] == f64::INFINITY && values[worst] == f64::INFINITY {
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);
        let second_worst = values[order[n - 1]];
        let fw = values[worst];

        let along = |out: &mut Vec<f64>, coef: f64, xw: &[f64], c: &[f64]| {
            for ((o, ci), wi) in out.iter_mut().zip(c).zip(xw) {
                *o = ci + coef * (ci - wi);
            }
        };
        along(&mut trial, 1.0, &simplex[worst], &centroid);
        let fr = eval(&trial);

        if fr < values[best] {
            along(&mut trial2, 2.0, &simplex[worst], &centroid);
            let fe = eval(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < second_worst {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }
        if fr < fw {
            along(&mut trial2, 0.5, &simplex[worst], &centroid);
            let fc = eval(&trial2);
            if fc <= fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fc;
                continue;
            }
        } else {
            along(&mut trial2, -0.5, &simplex[worst], &centroid);
            let fcc = eval(&trial2);
            if fcc < fw {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fcc;
                continue;
            }
        }
        // shrink towards the best vertex
        let xb = simplex[best].clone();
        for &i in &order[1..] {
            for (x, b) in simplex[i].iter_mut().zip(&xb) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    NelderMeadResult {
        x: simplex[order[0]].clone(),
        value: values[order[0]],
        iterations,
        evaluations: evals,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    /// Default initialisation box: `β₀ ∈ [−3, 3]`, quantile lags in
    /// `[−0.99, 0.99]`, regressors in `[−2, 2]`. Indirect GARCH uses a
    /// nonnegative box since its radicand must stay nonnegative.
    pub fn default_for(spec: &ModelSpec) -> Self {
        match spec.family {
            Family::IndirectGarch => Self {
                lo: vec![0.0, 0.0, 0.0],
                hi: vec![3.0, 0.99, 2.0],
            },
            _ => {
                let p = spec.param_dim();
                let q = spec.quantile_lags();
                let mut lo = vec![-2.0; p];
                let mut hi = vec![2.0; p];
                lo[0] = -3.0;
                hi[0] = 3.0;
                for i in 1..=q {
                    lo[i] = -0.99;
                    hi[i] = 0.99;
                }
                Self { lo, hi }
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.lo.len() != dim || self.hi.len() != dim {
            return Err(Error::Dimension(format!(
                "bounds of length {}/{} for {} parameters",
                self.lo.len(),
                self.hi.len(),
                dim
            )));
        }
        if self
            .lo
            .iter()
            .zip(&self.hi)
            .any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::Config("bounds must be finite with lo < hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub n_trials: usize,
    pub m_keep: usize,
    pub a_polish: usize,
    /// `None` selects [`Bounds::default_for`] the model.
    pub bounds: Option<Bounds>,
    pub simplex: NelderMeadOptions,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            n_trials: 200,
            m_keep: 10,
            a_polish: 5,
            bounds: None,
            simplex: NelderMeadOptions::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl EstimateConfig {
    /// Full multistart sizes: 10⁴ trials, 10 kept, 5 polishing rounds.
    pub fn paper_scale() -> Self {
        Self {
            n_trials: 10_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.m_keep == 0 {
            return Err(Error::Config("n_trials and m_keep must be positive".into()));
        }
        if self.m_keep > self.n_trials {
            return Err(Error::Config(format!(
                "m_keep ({}) exceeds n_trials ({})",
                self.m_keep, self.n_trials
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub initial: Vec<f64>,
    pub initial_objective: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub beta: Vec<f64>,
    pub rq: f64,
    pub path: QuantilePath,
    pub residuals: Vec<f64>,
    pub f0: f64,
    pub trials: Vec<TrialRecord>,
    pub seed: u64,
}

impl FitResult {
    pub fn tau(&self) -> f64 {
        self.spec.tau
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn grads(&self) -> &crate::model::GradientPath {
        self.path
            .grads
            .as_ref()
            .expect("fit always stores the gradient path")
    }
}

/// Initial condition `f0`: empirical τ-quantile of the first `⌊0.1 T⌋` points.
pub fn initial_quantile(y: &[f64], tau: f64) -> Result<f64> {
    if y.len() < MIN_SAMPLE {
        return Err(Error::TooShort {
            need: MIN_SAMPLE,
            got: y.len(),
        });
    }
    empirical_quantile(&y[..y.len() / 10], tau)
}

/// Multistart estimate of `spec` on `y`.
pub fn fit(spec: &ModelSpec, y: &[f64], cfg: &EstimateConfig) -> Result<FitResult> {
    cfg.validate()?;
    let f0 = initial_quantile(y, spec.tau)?;
    let design = Design::new(spec, y, f0)?;
    let p = spec.param_dim();
    let bounds = cfg.bounds.clone().unwrap_or_else(|| Bounds::default_for(spec));
    bounds.validate(p)?;

    let mut stream = rng::stream(cfg.seed);
    let initials: Vec<Vec<f64>> = (0..cfg.n_trials)
        .map(|_| {
            bounds
                .lo
                .iter()
                .zip(&bounds.hi)
                .map(|(l, h)| l + (h - l) * rng::open01(&mut stream))
                .collect()
        })
        .collect();

    let objective = |b: &[f64]| {
        if admissible(spec, b) {
            design.objective(b)
        } else {
            f64::INFINITY
        }
    };
    let searched: Vec<(TrialRecord, Vec<f64>)> = map_indexed(cfg.n_trials, cfg.execution, |i| {
        let x0 = &initials[i];
        let v0 = objective(x0);
        if v0.is_infinite() {
            let rec = TrialRecord {
                initial: x0.clone(),
                initial_objective: v0,
                objective: v0,
            };
            return (rec, x0.clone());
        }
        let res = nelder_mead(objective, x0, &cfg.simplex);
        let rec = TrialRecord {
            initial: x0.clone(),
            initial_objective: v0,
            objective: res.value,
        };
        (rec, res.x)
    });
    let (trials, minimisers): (Vec<TrialRecord>, Vec<Vec<f64>>) = searched.into_iter().unzip();

    let mut ranked: Vec<usize> = (0..cfg.n_trials)
        .filter(|&i| trials[i].objective.is_finite())
        .collect();
    if ranked.is_empty() {
        return Err(Error::AllTrialsInvalid);
    }
    ranked.sort_by(|&a, &b| trials[a].objective.total_cmp(&trials[b].objective).then(a.cmp(&b)));
    ranked.truncate(cfg.m_keep);

    let mut kept: Vec<(Vec<f64>, f64)> = ranked
        .iter()
        .map(|&i| (minimisers[i].clone(), trials[i].objective))
        .collect();
    for _ in 0..cfg.a_polish {
        kept = map_indexed(kept.len(), cfg.execution, |k| {
            let res = nelder_mead(objective, &kept[k].0, &cfg.simplex);
            if res.value <= kept[k].1 {
                (res.x, res.value)
            } else {
                kept[k].clone()
            }
        });
    }
    let best = (0..kept.len())
        .min_by(|&a, &b| kept[a].1.total_cmp(&kept[b].1).then(a.cmp(&b)))
        .expect("at least one candidate is kept");
    let beta = kept[best].0.clone();
    finish(spec, y, f0, beta, trials, cfg.seed)
}

/// Parameter region searched by [`fit`]. Indirect GARCH keeps every
/// coefficient nonnegative, as for a GARCH variance; otherwise the search can
/// settle where the radicand touches zero and the gradient does not exist.
fn admissible(spec: &ModelSpec, beta: &[f64]) -> bool {
    match spec.family {
        Family::IndirectGarch => beta.iter().all(|b| *b >= 0.0),
        _ => true,
    }
}

/// Builds a [`FitResult`] at a given parameter vector (no search).
pub fn evaluate_at(spec: &ModelSpec, y: &[f64], beta: &[f64]) -> Result<FitResult> {
    let f0 = initial_quantile(y, spec.tau)?;
    finish(spec, y, f0, beta.to_vec(), Vec::new(), 0)
}

fn finish(
    spec: &ModelSpec,
    y: &[f64],
    f0: f64,
    beta: Vec<f64>,
    trials: Vec<TrialRecord>,
    seed: u64,
) -> Result<FitResult> {
    let design = Design::new(spec, y, f0)?;
    let rq = design.objective(&beta);
    let (f, grads) = design.path_and_gradient(&beta)?;
    let residuals = y.iter().zip(&f).map(|(y, f)| y - f).collect();
    Ok(FitResult {
        spec: spec.clone(),
        beta,
        rq,
        path: QuantilePath {
            f,
            f0,
            grads: Some(grads),
        },
        residuals,
        f0,
        trials,
        seed,
    })
}
