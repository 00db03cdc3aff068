//! Fitting the four CAViaR specifications to a return series with ARB
//! standard errors, exceedance rates and DQ tests, in the layout of the
//! empirical tables.

use caviar_core::covmat::{arb_sandwich, ArbConfig, ArbVariant};
use caviar_core::estimate::{fit, EstimateConfig, FitResult};
use caviar_core::infer::{dq_default, exceedance_rate, format_p, param_report, DqMode};
use caviar_core::model::{quantile_path, ModelSpec};
use caviar_core::rng::substream_seed;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub tau: f64,
    /// Trailing observations held out for out-of-sample checks.
    pub out_of_sample: usize,
    /// Reported in this order.
    pub models: Vec<String>,
    pub adaptive_g: f64,
    pub arb_draws: usize,
    pub vd_updates: usize,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            out_of_sample: 400,
            models: vec!["as".into(), "sav".into(), "igarch".into(), "adaptive".into()],
            adaptive_g: 10.0,
            arb_draws: 1000,
            vd_updates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLine {
    /// Subscript used in the tables (the adaptive model's only parameter is β₁).
    pub index: usize,
    pub estimate: f64,
    pub std_err: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub params: Vec<ParamLine>,
    pub rq: f64,
    pub exceed_in_pct: f64,
    pub exceed_out_pct: f64,
    pub dq_in_p: f64,
    pub dq_out_p: f64,
    /// Full-sample quantile path, in-sample part followed by the forecasts.
    #[serde(skip)]
    pub quantiles: Vec<f64>,
    #[serde(skip)]
    pub fit: Option<FitResult>,
    #[serde(skip)]
    pub cov: Option<caviar_core::numkit::SquareMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: String,
    pub report: Option<ModelReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub source: String,
    pub tau: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub models: Vec<ModelOutcome>,
}

fn title(model: &str) -> String {
    match model {
        "as" => "The Asymmetric Slope Model".into(),
        "sav" => "The Symmetric Absolute Value Model".into(),
        "igarch" => "The Indirect GARCH(1,1) Model".into(),
        "adaptive" => "The Adaptive Model".into(),
        other => format!("The {other} Model"),
    }
}

fn one_model(
    spec: &ModelSpec,
    y: &[f64],
    n_in: usize,
    est: &EstimateConfig,
    arb: &ArbConfig,
) -> caviar_core::Result<ModelReport> {
    let tau = spec.tau;
    let y_in = &y[..n_in];
    let fitted = fit(spec, y_in, est)?;
    let se = arb_sandwich(&fitted, arb, ArbVariant::Sim)?;
    let rows = param_report(&fitted.beta, &se.cov, n_in)?;
    let offset = usize::from(matches!(spec.family, caviar_core::model::Family::Adaptive { .. }));
    let full = quantile_path(spec, &fitted.beta, y, fitted.f0)?.f;
    let (f_in, f_out) = full.split_at(n_in);
    let y_out = &y[n_in..];
    Ok(ModelReport {
        params: rows
            .iter()
            .enumerate()
            .map(|(k, r)| ParamLine {
                index: k + offset,
                estimate: r.estimate,
                std_err: r.std_err,
                p_value: r.p_value,
            })
            .collect(),
        rq: fitted.rq,
        exceed_in_pct: exceedance_rate(y_in, f_in)?,
        exceed_out_pct: exceedance_rate(y_out, f_out)?,
        dq_in_p: dq_default(y_in, f_in, tau, DqMode::InSample)?.p_value,
        dq_out_p: dq_default(y_out, f_out, tau, DqMode::OutOfSample)?.p_value,
        quantiles: full,
        fit: Some(fitted),
        cov: Some(se.cov),
    })
}

/// Runs every configured model. A failing model is recorded in its outcome
/// and does not stop the others.
pub fn empirical_pipeline(
    y: &[f64],
    source: &str,
    cfg: &EmpiricalConfig,
    est: &EstimateConfig,
    seed: u64,
) -> CliResult<EmpiricalReport> {
    if cfg.out_of_sample == 0 || y.len() < cfg.out_of_sample + 100 {
        return Err(CliError::input(format!(
            "series of length {} is too short for {} out-of-sample observations plus 100 in-sample",
            y.len(),
            cfg.out_of_sample
        )));
    }
    if cfg.models.is_empty() {
        return Err(CliError::input("no models configured"));
    }
    let specs = cfg
        .models
        .iter()
        .map(|m| ModelSpec::parse(m, cfg.tau, cfg.adaptive_g))
        .collect::<caviar_core::Result<Vec<_>>>()?;
    let n_in = y.len() - cfg.out_of_sample;
    let models = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let est = est.clone().with_seed(substream_seed(seed, 2 * k as u64));
            let arb = ArbConfig {
                n_draws: cfg.arb_draws,
                vd_initial: None,
                vd_updates: cfg.vd_updates,
                seed: substream_seed(seed, 2 * k as u64 + 1),
                execution: est.execution,
            };
            let result = one_model(spec, y, n_in, &est, &arb);
            ModelOutcome {
                model: spec.name().to_string(),
                error: result.as_ref().err().map(|e| e.to_string()),
                report: result.ok(),
            }
        })
        .collect();
    Ok(EmpiricalReport {
        source: source.to_string(),
        tau: cfg.tau,
        n_in,
        n_out: cfg.out_of_sample,
        models,
    })
}

/// Row labels and values of one model, in table order.
pub fn fields(report: &ModelReport) -> Vec<(String, String, f64)> {
    let mut v = Vec::new();
    for p in &report.params {
        let k = p.index;
        v.push((format!("beta_{k}"), format!("beta_{k}"), p.estimate));
        v.push((format!("se_beta_{k}"), format!("s.e.(beta_{k})"), p.std_err));
        v.push((format!("p_beta_{k}"), format!("p-value(beta_{k})"), p.p_value));
    }
    v.push(("rq".into(), "RQ".into(), report.rq));
    v.push(("exceed_in_pct".into(), "Exceedance in-sample (%)".into(), report.exceed_in_pct));
    v.push(("exceed_out_pct".into(), "Exceedance out-of-sample (%)".into(), report.exceed_out_pct));
    v.push(("dq_in_p".into(), "DQ in-sample (p value)".into(), report.dq_in_p));
    v.push(("dq_out_p".into(), "DQ out-of-sample (p value)".into(), report.dq_out_p));
    v
}

impl EmpiricalReport {
    pub fn failures(&self) -> Vec<&ModelOutcome> {
        self.models.iter().filter(|m| m.error.is_some()).collect()
    }

    /// `model,field,value`, one line per table entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,field,value\n");
        for m in &self.models {
            match &m.report {
                Some(r) => {
                    for (key, _, value) in fields(r) {
                        s.push_str(&format!("{},{key},{value}\n", m.model));
                    }
                }
                None => s.push_str(&format!("{},error,\n", m.model)),
            }
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "Series: {} ({} in-sample, {} out-of-sample observations)\n",
            self.source, self.n_in, self.n_out
        );
        for m in &self.models {
            s.push_str(&format!("\n{} (tau = {})\n", title(&m.model), self.tau));
            match (&m.report, &m.error) {
                (Some(r), _) => {
                    for (key, label, value) in fields(r) {
                        let text = if key.starts_with("p_") || key.starts_with("dq_") {
                            format_p(value)
                        } else {
                            format!("{value:.4}")
                        };
                        s.push_str(&format!("{label:<30}{text:>12}\n"));
                    }
                }
                (None, Some(e)) => s.push_str(&format!("failed: {e}\n")),
                (None, None) => {}
            }
        }
        s
    }
}
