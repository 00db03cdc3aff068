//! Monte Carlo size studies for Wald tests under different sandwich
//! estimators.
//!
//! Each replication simulates a DGP, fits the full model, builds every
//! requested sandwich and records the Wald p-value. Replications are seeded
//! from the master seed and their index alone, so results do not depend on
//! execution order or thread count.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::covmat::{self, ArbConfig, ArbVariant, SandwichEstimate};
use crate::dgp::{simulate_with_burn_in, DgpSpec, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::estimate::{fit, EstimateConfig, FitResult};
use crate::exec::{map_indexed, Execution};
use crate::infer::wald;
use crate::model::{gradient_path, ModelSpec};
use crate::numkit::Matrix;
use crate::rng::substream_seed;

pub const DEFAULT_ALPHAS: [f64; 4] = [0.01, 0.05, 0.10, 0.20];

/// One row of a size table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum McMethod {
    /// True density and gradients at the true parameter.
    OracleTrueBeta,
    /// True density with gradients at the estimate.
    OracleH0,
    ArbSim { n: usize, vd_updates: usize },
    ArbAnalytic { vd_updates: usize },
    /// Finite differences with `Δτ = scale / T`.
    FiniteDifference { scale: f64 },
    Kernel,
}

impl McMethod {
    /// Short identifier used in CSV output.
    pub fn slug(&self) -> String {
        match self {
            McMethod::OracleTrueBeta => "d0".into(),
            McMethod::OracleH0 => "dh0".into(),
            McMethod::ArbSim { n, vd_updates } => format!("arb-sim-n{n}-u{vd_updates}"),
            McMethod::ArbAnalytic { vd_updates } => format!("arb-analytic-u{vd_updates}"),
            McMethod::FiniteDifference { scale } => format!("fd-{scale}"),
            McMethod::Kernel => "ker".into(),
        }
    }

    /// Row label in the text tables.
    pub fn label(&self) -> String {
        let vd = |u: usize| {
            if u == 0 {
                "Vd = I, no update".to_string()
            } else {
                format!("{u} times updating Vd")
            }
        };
        match self {
            McMethod::OracleTrueBeta => "Using D^0".into(),
            McMethod::OracleH0 => "Using D^h0".into(),
            McMethod::ArbSim { n, vd_updates } => format!("Using D^arb (n={n}, {})", vd(*vd_updates)),
            McMethod::ArbAnalytic { vd_updates } => format!("Using D^arb (analytic, {})", vd(*vd_updates)),
            McMethod::FiniteDifference { scale } => format!("Using D^fd (dtau = {scale}/T)"),
            McMethod::Kernel => "Using D^ker".into(),
        }
    }

    fn needs_truth(&self) -> bool {
        matches!(self, McMethod::OracleTrueBeta | McMethod::OracleH0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub dgp: String,
    pub t_len: usize,
    pub burn_in: usize,
    pub replications: usize,
    pub tau: f64,
    pub model: String,
    pub adaptive_g: f64,
    pub r: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub alphas: Vec<f64>,
    pub methods: Vec<McMethod>,
    pub estimate: EstimateConfig,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
    /// JSON-lines file of finished replications; reruns skip them.
    #[serde(skip)]
    pub checkpoint: Option<PathBuf>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dgp: "r1".into(),
            t_len: 4000,
            burn_in: DEFAULT_BURN_IN,
            replications: 300,
            tau: 0.5,
            model: "as".into(),
            adaptive_g: 10.0,
            r: vec![vec![0.0, 0.0, 1.0, -1.0]],
            gamma: vec![0.0],
            alphas: DEFAULT_ALPHAS.to_vec(),
            methods: vec![
                McMethod::ArbAnalytic { vd_updates: 0 },
                McMethod::Kernel,
            ],
            estimate: EstimateConfig::default(),
            seed: 20_240_101,
            execution: Execution::default(),
            checkpoint: None,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.alphas.is_empty()
            || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0))
            || self.alphas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("alpha levels must lie in (0,1), ascending".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.r.len() != self.gamma.len() || self.r.is_empty() {
            return Err(Error::Config("R and gamma must have the same number of rows".into()));
        }
        let spec = self.model_spec()?;
        if self.r.iter().any(|row| row.len() != spec.param_dim()) {
            return Err(Error::Config(format!(
                "R rows must have {} columns for model {}",
                spec.param_dim(),
                spec.name()
            )));
        }
        self.dgp_spec()?;
        self.estimate.validate()
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::parse(&self.model, self.tau, self.adaptive_g)
    }

    pub fn dgp_spec(&self) -> Result<DgpSpec> {
        DgpSpec::catalog(&self.dgp)
    }

    pub fn replication_seed(&self, index: usize) -> u64 {
        substream_seed(self.seed, index as u64)
    }

    // Outcomes depend on the replication index only, so the count is left
    // out and a study can be extended from an existing checkpoint.
    fn fingerprint(&self) -> String {
        let key = McConfig {
            replications: 0,
            ..self.clone()
        };
        serde_json::to_string(&key).expect("configs serialise")
    }
}

/// Outcome of one replication: a p-value or an error message per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub index: usize,
    pub seed: u64,
    pub beta: Option<Vec<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub method: McMethod,
    pub rejections: Vec<usize>,
    pub rates: Vec<f64>,
    pub n_reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub title: String,
    pub config: McConfig,
    pub alphas: Vec<f64>,
    pub rows: Vec<McRow>,
    pub replications: usize,
    pub wall_clock_secs: f64,
    pub outcomes: Vec<RepOutcome>,
}

impl McReport {
    /// `method,alpha,rate,n_reps,failures`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,alpha,rate,n_reps,failures\n");
        for row in &self.rows {
            for (a, r) in self.alphas.iter().zip(&row.rates) {
                s.push_str(&format!("{},{},{:.6},{},{}\n", row.method.slug(), a, r, row.n_reps, row.failures));
            }
        }
        s
    }

    /// Aligned text table: one row per method, one column per level.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.method.label().len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut s = format!("{}\n", self.title);
        s.push_str(&format!("{:<width$}", "Tests"));
        for a in &self.alphas {
            s.push_str(&format!(" | alpha = {a:<5}"));
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&format!("{:<width$}", row.method.label()));
            for r in &row.rates {
                s.push_str(&format!(" | {r:<13.3}"));
            }
            if row.failures > 0 {
                s.push_str(&format!("  ({} failed)", row.failures));
            }
            s.push('\n');
        }
        s
    }

    /// One line per replication and method.
    pub fn replication_log_csv(&self) -> String {
        let mut s = String::from("replication,seed,method,p_value,error\n");
        for o in &self.outcomes {
            for (k, m) in self.config.methods.iter().enumerate() {
                let p = o.p_values[k].map(|p| format!("{p:.10}")).unwrap_or_default();
                let e = o.errors[k].clone().unwrap_or_default().replace(',', ";");
                s.push_str(&format!("{},{},{},{},{}\n", o.index, o.seed, m.slug(), p, e));
            }
        }
        s
    }

    pub fn row(&self, method: &McMethod) -> Option<&McRow> {
        self.rows.iter().find(|r| &r.method == method)
    }

    /// Rejection rate of `method` at level `alpha`.
    pub fn rate(&self, method: &McMethod, alpha: f64) -> Option<f64> {
        let k = self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12)?;
        self.row(method).map(|r| r.rates[k])
    }
}

struct Truth {
    h: Vec<f64>,
    beta: Vec<f64>,
}

fn sandwich_for(
    method: &McMethod,
    fitted: &FitResult,
    y: &[f64],
    truth: Option<&Truth>,
    cfg: &McConfig,
    rep_seed: u64,
) -> Result<SandwichEstimate> {
    let arb = |n: usize, vd_updates: usize| ArbConfig {
        n_draws: n,
        vd_initial: None,
        vd_updates,
        seed: substream_seed(rep_seed, 2),
        execution: Execution::Sequential,
    };
    let truth = || truth.ok_or_else(|| Error::UnsupportedForm("no oracle density for this DGP".into()));
    match method {
        McMethod::Kernel => covmat::kernel_sandwich(fitted),
        McMethod::ArbSim { n, vd_updates } => covmat::arb_sandwich(fitted, &arb(*n, *vd_updates), ArbVariant::Sim),
        McMethod::ArbAnalytic { vd_updates } => {
            covmat::arb_sandwich(fitted, &arb(1, *vd_updates), ArbVariant::Analytic)
        }
        McMethod::FiniteDifference { scale } => {
            let est = EstimateConfig {
                execution: Execution::Sequential,
                ..cfg.estimate.clone()
            }
            .with_seed(substream_seed(rep_seed, 3));
            covmat::fd_sandwich(fitted, y, scale / y.len() as f64, &est)
        }
        McMethod::OracleH0 => covmat::oracle_h0_sandwich(fitted, &truth()?.h),
        McMethod::OracleTrueBeta => {
            let t = truth()?;
            let path = gradient_path(&fitted.spec, &t.beta, y, fitted.f0)?;
            let grads = path.grads.expect("gradient_path fills gradients");
            covmat::oracle_true_beta_sandwich(&grads, fitted.tau(), &t.h)
        }
    }
}

/// Runs replication `index` of the study.
pub fn run_replication(cfg: &McConfig, index: usize) -> RepOutcome {
    let seed = cfg.replication_seed(index);
    let n_methods = cfg.methods.len();
    let fail_all = |msg: String| RepOutcome {
        index,
        seed,
        beta: None,
        p_values: vec![None; n_methods],
        errors: vec![Some(msg); n_methods],
    };
    let prepared = (|| -> Result<_> {
        let dgp = cfg.dgp_spec()?;
        let spec = cfg.model_spec()?;
        let sim = simulate_with_burn_in(&dgp, cfg.t_len, substream_seed(seed, 0), cfg.burn_in)?;
        let est = EstimateConfig {
            execution: Execution::Sequential,
            ..cfg.estimate.clone()
        }
        .with_seed(substream_seed(seed, 1));
        let fitted = fit(&spec, &sim.y, &est)?;
        let truth = if cfg.methods.iter().any(McMethod::needs_truth) {
            let beta = dgp.true_beta_for(&spec, cfg.tau).ok();
            let slope = sim.quantile_slope_path(&dgp, cfg.tau).ok();
            match (beta, slope) {
                (Some(beta), Some(slope)) if slope.iter().all(|s| *s > 0.0 && s.is_finite()) => Some(Truth {
                    h: slope.iter().map(|s| 1.0 / s).collect(),
                    beta,
                }),
                _ => None,
            }
        } else {
            None
        };
        Ok((sim, fitted, truth))
    })();
    let (sim, fitted, truth) = match prepared {
        Ok(v) => v,
        Err(e) => return fail_all(e.to_string()),
    };
    let r = match Matrix::from_rows(&cfg.r) {
        Ok(r) => r,
        Err(e) => return fail_all(e.to_string()),
    };
    let mut p_values = Vec::with_capacity(n_methods);
    let mut errors = Vec::with_capacity(n_methods);
    for m in &cfg.methods {
        let res = sandwich_for(m, &fitted, &sim.y, truth.as_ref(), cfg, seed)
            .and_then(|s| wald(&fitted.beta, &s.cov, &r, &cfg.gamma, fitted.len()));
        match res {
            Ok(w) => {
                p_values.push(Some(w.p_value));
                errors.push(None);
            }
            Err(e) => {
                p_values.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    RepOutcome {
        index,
        seed,
        beta: Some(fitted.beta),
        p_values,
        errors,
    }
}

fn load_checkpoint(path: &Path, fingerprint: &str) -> Result<BTreeMap<usize, RepOutcome>> {
    let mut done = BTreeMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            let stored: serde_json::Value =
                serde_json::from_str(&header).map_err(|e| Error::Io(format!("checkpoint header: {e}")))?;
            if stored.get("config").and_then(|v| v.as_str()) != Some(fingerprint) {
                return Err(Error::Config(format!(
                    "checkpoint {} was written for a different configuration",
                    path.display()
                )));
            }
        }
        None => return Ok(done),
    }
    for line in lines {
        let line = line?;
        // a torn final line from an interrupted run is simply recomputed
        if let Ok(o) = serde_json::from_str::<RepOutcome>(&line) {
            done.insert(o.index, o);
        }
    }
    Ok(done)
}

/// Runs the full study, resuming from the checkpoint when configured.
pub fn run_size_study(cfg: &McConfig) -> Result<McReport> {
    run_size_study_titled(cfg, "")
}

fn run_size_study_titled(cfg: &McConfig, title: &str) -> Result<McReport> {
    cfg.validate()?;
    let started = Instant::now();
    let fingerprint = cfg.fingerprint();
    let mut done = match &cfg.checkpoint {
        Some(p) => load_checkpoint(p, &fingerprint)?,
        None => BTreeMap::new(),
    };
    let writer = match &cfg.checkpoint {
        Some(p) => {
            let fresh = !p.exists() || std::fs::metadata(p)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            if fresh {
                writeln!(f, "{}", serde_json::json!({ "config": fingerprint }))?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };
    done.retain(|i, _| *i < cfg.replications);
    let todo: Vec<usize> = (0..cfg.replications).filter(|i| !done.contains_key(i)).collect();
    let fresh = map_indexed(todo.len(), cfg.execution, |k| {
        let outcome = run_replication(cfg, todo[k]);
        if let Some(w) = &writer {
            let line = serde_json::to_string(&outcome).expect("outcomes serialise");
            let mut f = w.lock().unwrap_or_else(|e| e.into_inner());
            let _ = writeln!(f, "{line}").and_then(|_| f.flush());
        }
        outcome
    });
    for o in fresh {
        done.insert(o.index, o);
    }
    let outcomes: Vec<RepOutcome> = (0..cfg.replications)
        .map(|i| done.remove(&i).expect("every replication ran"))
        .collect();
    let rows = tabulate(cfg, &outcomes);
    Ok(McReport {
        title: title.to_string(),
        config: cfg.clone(),
        alphas: cfg.alphas.clone(),
        rows,
        replications: cfg.replications,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        outcomes,
    })
}

fn tabulate(cfg: &McConfig, outcomes: &[RepOutcome]) -> Vec<McRow> {
    cfg.methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let ps: Vec<f64> = outcomes.iter().filter_map(|o| o.p_values[k]).collect();
            let rejections: Vec<usize> = cfg
                .alphas
                .iter()
                .map(|a| ps.iter().filter(|p| **p <= *a).count())
                .collect();
            let n = ps.len();
            McRow {
                method: m.clone(),
                rates: rejections
                    .iter()
                    .map(|r| if n == 0 { f64::NAN } else { *r as f64 / n as f64 })
                    .collect(),
                rejections,
                n_reps: n,
                failures: outcomes.len() - n,
            }
        })
        .collect()
}

/// Named groups of size studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Table1,
    Table2,
    Table3,
    /// Three-regime DGP R4 across τ and T.
    Table5,
    /// DGP R1 across τ and T.
    Table6,
    /// DGP R3 across τ and T.
    Table7,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "table1" => Ok(Suite::Table1),
            "table2" => Ok(Suite::Table2),
            "table3" => Ok(Suite::Table3),
            "table5" => Ok(Suite::Table5),
            "table6" => Ok(Suite::Table6),
            "table7" => Ok(Suite::Table7),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

/// Shared settings for [`suite_configs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Replications as a fraction of 1000.
    pub scale: f64,
    pub arb_draws: usize,
    pub estimate: EstimateConfig,
    pub seed: u64,
    pub execution: Execution,
    /// Directory for per-study checkpoint files.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            scale: 0.3,
            arb_draws: 10_000,
            estimate: EstimateConfig::default(),
            seed: 20_240_101,
            execution: Execution::default(),
            checkpoint_dir: None,
        }
    }
}

/// The studies of one suite, each with its title.
pub fn suite_configs(suite: Suite, opts: &SuiteOptions) -> Vec<(String, McConfig)> {
    let reps = ((1000.0 * opts.scale).round() as usize).max(1);
    let n = opts.arb_draws;
    let base = |dgp: &str, model: &str, t_len: usize, tau: f64, r: Vec<f64>, methods: Vec<McMethod>| McConfig {
        dgp: dgp.into(),
        t_len,
        replications: reps,
        tau,
        model: model.into(),
        r: vec![r],
        gamma: vec![0.0],
        methods,
        estimate: opts.estimate.clone(),
        seed: opts.seed,
        execution: opts.execution,
        ..McConfig::default()
    };
    let all_rows = vec![
        McMethod::OracleTrueBeta,
        McMethod::OracleH0,
        McMethod::ArbSim { n, vd_updates: 0 },
        McMethod::ArbAnalytic { vd_updates: 0 },
        McMethod::ArbSim { n, vd_updates: 2 },
        McMethod::ArbAnalytic { vd_updates: 2 },
        McMethod::FiniteDifference { scale: 10.0 },
        McMethod::Kernel,
    ];
    let arb_ker = vec![McMethod::ArbSim { n, vd_updates: 2 }, McMethod::Kernel];
    let abs_null = vec![0.0, 0.0, 1.0, -1.0];
    let mut out = match suite {
        Suite::Table1 => vec![(
            "Table 1: DGP R1, tau = 0.5, R = [0,0,1,-1], T = 4000".to_string(),
            base("r1", "as", 4000, 0.5, abs_null, all_rows),
        )],
        Suite::Table2 => vec![(
            "Table 2: DGP R2, tau = 0.5, R = [0,0,1,1], T = 4000".to_string(),
            base("r2", "as", 4000, 0.5, vec![0.0, 0.0, 1.0, 1.0], all_rows),
        )],
        Suite::Table3 => vec![(
            "Table 3: DGP R3, tau = 0.5, R = [0,0,1,-1], T = 2000"
                .to_string(),
            base(
                "r3",
                "as-sqrt",
                2000,
                0.5,
                abs_null,
                vec![
                    McMethod::ArbSim { n, vd_updates: 0 },
                    McMethod::ArbAnalytic { vd_updates: 0 },
                    McMethod::ArbSim { n, vd_updates: 2 },
                    McMethod::ArbAnalytic { vd_updates: 2 },
                    McMethod::Kernel,
                ],
            ),
        )],
        Suite::Table5 | Suite::Table6 | Suite::Table7 => {
            let (dgp, big, name) = match suite {
                Suite::Table5 => ("r4", 5000, "Table 5: DGP R4"),
                Suite::Table6 => ("r1", 4000, "Table 6: DGP R1"),
                _ => ("r3", 5000, "Table 7: DGP R3"),
            };
            let mut v = Vec::new();
            for tau in [0.05, 0.3, 0.5] {
                for t_len in [big, 2000] {
                    v.push((
                        format!("{name}, tau = {tau}, T = {t_len}, R = [0,0,1,-1]"),
                        base(dgp, "as", t_len, tau, abs_null.clone(), arb_ker.clone()),
                    ));
                }
            }
            v
        }
    };
    if let Some(dir) = &opts.checkpoint_dir {
        let tag = format!("{suite:?}").to_ascii_lowercase();
        for (k, (_, cfg)) in out.iter_mut().enumerate() {
            cfg.checkpoint = Some(dir.join(format!("{tag}-{k}.jsonl")));
        }
    }
    out
}

/// Runs every study of a suite.
pub fn run_table_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<McReport>> {
    suite_configs(suite, opts)
        .into_iter()
        .map(|(title, cfg)| run_size_study_titled(&cfg, &title))
        .collect()
}
