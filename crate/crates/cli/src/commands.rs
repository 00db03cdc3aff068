//! Argument parsing and subcommand dispatch.

use std::path::{Path, PathBuf};

use caviar_core::covmat::{self, arb_sandwich, ArbVariant, SandwichEstimate};
use caviar_core::dgp::{simulate_with_burn_in, write_csv, DgpSpec};
use caviar_core::estimate::{evaluate_at, fit, EstimateConfig, FitResult};
use caviar_core::exec::with_threads;
use caviar_core::infer::{dq_default, format_p, param_report, wald, DqMode};
use caviar_core::mcstudy::{run_size_study, run_table_suite, suite_configs, McConfig, Suite, SuiteOptions};
use caviar_core::model::{quantile_path, ModelSpec};
use caviar_core::numkit::Matrix;
use caviar_core::stability::{classify, classify_dgp, StabilityVerdict};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, Settings};
use crate::empirical::empirical_pipeline;
use crate::error::{CliError, CliResult};
use crate::ingest::{ingest_prices, read_series};

#[derive(Debug, Parser)]
#[command(name = "caviar", version, about = "CAViaR quantile models: simulation, estimation and inference")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the shared pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use 10^4 multistart trials per fit instead of 200.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Settings file, TOML or `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Inline override such as `estimate.n_trials=500`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Column to read (default `y`, or the only column).
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Reuse a fit written by `fit --format json` instead of estimating.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeMethod {
    Kernel,
    Fd,
    ArbSim,
    ArbAnalytic,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "arb-sim")]
    pub method: SeMethod,
    /// ARB draws (overrides `arb.n_draws`).
    #[arg(long)]
    pub n_draws: Option<usize>,
    /// ARB V_d updates (overrides `arb.vd_updates`).
    #[arg(long)]
    pub vd_updates: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a catalog DGP and write a `y` CSV.
    Simulate {
        #[arg(long)]
        dgp: Option<String>,
        #[arg(long = "t-len", short = 'n')]
        t_len: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Root conditions for a catalog DGP or explicit lag coefficients.
    Stability {
        #[arg(long, conflicts_with_all = ["quantile_lags", "y_lags"])]
        dgp: Option<String>,
        /// Comma-separated β₁..β_q.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        quantile_lags: Vec<f64>,
        /// Comma-separated y-lag coefficients.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y_lags: Vec<f64>,
    },
    /// Estimate a model; CSV output is `param,estimate`.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sandwich standard errors for a fitted model.
    Se {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Wald test of `R β = γ`.
    Wald {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        method: MethodArgs,
        /// Rows separated by `;`, entries by `,`.
        #[arg(long, allow_hyphen_values = true)]
        r: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gamma: Vec<f64>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Dynamic quantile tests in and out of sample.
    Dq {
        #[command(flatten)]
        data: DataArgs,
        /// Trailing observations held out; 0 runs the in-sample test only.
        #[arg(long, default_value_t = 0)]
        out_of_sample: usize,
    },
    /// Monte Carlo size study from a study file (a TOML `McConfig`).
    McSize {
        study: Option<PathBuf>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-replication log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Run one named suite of size studies.
    Tables {
        /// table1, table2, table3, table5, table6 or table7.
        suite: String,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        /// Directory for one CSV per study.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// List the studies without running them.
        #[arg(long)]
        dry_run: bool,
    },
    /// Fit the four empirical models to a price series.
    Empirical {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = "close")]
        column: String,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Resolves the layered settings for a parsed command line.
pub fn settings_for(cli: &Cli) -> CliResult<Settings> {
    let mut s = config::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
        s.mc.seed = seed;
    }
    if cli.threads.is_some() {
        s.threads = cli.threads;
    }
    if cli.paper_scale {
        let p = EstimateConfig::paper_scale();
        s.estimate.n_trials = p.n_trials;
        s.estimate.m_keep = p.m_keep;
        s.estimate.a_polish = p.a_polish;
        s.mc.estimate.n_trials = p.n_trials;
        s.mc.estimate.m_keep = p.m_keep;
        s.mc.estimate.a_polish = p.a_polish;
    }
    s.estimate.validate()?;
    Ok(s)
}

/// Runs a parsed command line and returns what goes to standard output.
pub fn run(cli: &Cli) -> CliResult<String> {
    let settings = settings_for(cli)?;
    match settings.threads {
        Some(0) => Err(CliError::input("--threads must be at least 1")),
        Some(n) => with_threads(n, || dispatch(cli, &settings))?,
        None => dispatch(cli, &settings),
    }
}

fn write_or_return(out: Option<&Path>, text: String) -> CliResult<String> {
    match out {
        Some(p) => {
            std::fs::write(p, &text)
                .map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

struct Loaded {
    y: Vec<f64>,
    fit: FitResult,
}

fn load_and_fit(args: &DataArgs, s: &Settings) -> CliResult<Loaded> {
    let column = args.column.as_deref().unwrap_or(&s.column);
    let y = read_series(&args.data, column)?;
    let fitted = match &args.fit {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let stored: FitResult = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("{}: not a fit result: {e}", path.display())))?;
            if stored.len() != y.len() {
                return Err(CliError::input(format!(
                    "fit has {} observations, data has {}",
                    stored.len(),
                    y.len()
                )));
            }
            let mut again = evaluate_at(&stored.spec, &y, &stored.beta)?;
            again.trials = stored.trials;
            again.seed = stored.seed;
            again
        }
        None => {
            let spec = model_spec(args, s)?;
            fit(&spec, &y, &s.estimate_config())?
        }
    };
    Ok(Loaded { y, fit: fitted })
}

fn model_spec(args: &DataArgs, s: &Settings) -> CliResult<ModelSpec> {
    let model = args.model.as_deref().unwrap_or(&s.model);
    Ok(ModelSpec::parse(model, args.tau.unwrap_or(s.tau), s.adaptive_g)?)
}

fn sandwich(m: &MethodArgs, loaded: &Loaded, s: &Settings) -> CliResult<SandwichEstimate> {
    let mut arb = s.arb_config();
    if let Some(n) = m.n_draws {
        arb.n_draws = n;
    }
    if let Some(u) = m.vd_updates {
        arb.vd_updates = u;
    }
    let f = &loaded.fit;
    Ok(match m.method {
        SeMethod::Kernel => covmat::kernel_sandwich_with(f, s.kernel_mad)?,
        SeMethod::Fd => {
            let est = s.estimate_config().with_seed(caviar_core::rng::substream_seed(s.seed, 3));
            covmat::fd_sandwich(f, &loaded.y, s.fd_scale / loaded.y.len() as f64, &est)?
        }
        SeMethod::ArbSim => arb_sandwich(f, &arb, ArbVariant::Sim)?,
        SeMethod::ArbAnalytic => arb_sandwich(f, &arb, ArbVariant::Analytic)?,
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialise");
    s.push('\n');
    s
}

/// Parses `a,b,c;d,e,f` into a matrix.
pub fn parse_matrix(text: &str) -> CliResult<Matrix> {
    let rows = text
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(|r| {
            r.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::input(format!("cannot parse '{v}' in R")))
                })
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Matrix::from_rows(&rows)?)
}

fn stability_text(v: &StabilityVerdict) -> String {
    let moduli: Vec<String> = v.root_moduli().iter().map(|m| format!("{m:.6}")).collect();
    format!(
        "verdict: {}\nsum of quantile-lag coefficients: {:.6} ({})\nroot moduli: {}\n",
        serde_json::to_value(v.verdict).expect("verdicts serialise").as_str().unwrap_or(""),
        v.quantile_lag_sum,
        if v.condition1_ok { "inside (-1, 1)" } else { "outside (-1, 1)" },
        if moduli.is_empty() { "none".into() } else { moduli.join(", ") }
    )
}

fn dispatch(cli: &Cli, s: &Settings) -> CliResult<String> {
    match &cli.command {
        Command::Simulate {
            dgp,
            t_len,
            burn_in,
            out,
        } => {
            let d = DgpSpec::catalog(dgp.as_deref().unwrap_or(&s.simulate.dgp))?;
            let sim = simulate_with_burn_in(
                &d,
                t_len.unwrap_or(s.simulate.t_len),
                s.seed,
                burn_in.unwrap_or(s.simulate.burn_in),
            )?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &sim.y)?;
            write_or_return(out.as_deref(), String::from_utf8(buf).expect("csv is utf-8"))
        }
        Command::Stability {
            dgp,
            quantile_lags,
            y_lags,
        } => {
            let v = match dgp {
                Some(name) => classify_dgp(&DgpSpec::catalog(name)?)?,
                None if quantile_lags.is_empty() && y_lags.is_empty() => {
                    return Err(CliError::input("give --dgp or lag coefficients"))
                }
                None => classify(quantile_lags, y_lags)?,
            };
            Ok(stability_text(&v))
        }
        Command::Fit { data, format, out } => {
            let l = load_and_fit(data, s)?;
            let text = match format {
                Format::Json => json(&l.fit),
                _ => {
                    let mut t = String::from("param,estimate\n");
                    for (k, b) in l.fit.beta.iter().enumerate() {
                        t.push_str(&format!("beta_{k},{b}\n"));
                    }
                    t.push_str(&format!("rq,{}\n", l.fit.rq));
                    t
                }
            };
            write_or_return(out.as_deref(), text)
        }
        Command::Se { data, method, format } => {
            let l = load_and_fit(data, s)?;
            let est = sandwich(method, &l, s)?;
            let rows = param_report(&l.fit.beta, &est.cov, l.y.len())?;
            Ok(match format {
                Format::Json => json(&serde_json::json!({ "params": rows, "sandwich": est })),
                _ => {
                    let mut t = String::from("param,estimate,std_err,p_value\n");
                    for (k, r) in rows.iter().enumerate() {
                        t.push_str(&format!("beta_{k},{},{},{}\n", r.estimate, r.std_err, r.p_value));
                    }
                    t
                }
            })
        }
        Command::Wald {
            data,
            method,
            r,
            gamma,
            format,
        } => {
            let l = load_and_fit(data, s)?;
            let est = sandwich(method, &l, s)?;
            let r = parse_matrix(r)?;
            let w = wald(&l.fit.beta, &est.cov, &r, gamma, l.y.len())?;
            Ok(match format {
                Format::Json => json(&w),
                Format::Csv => format!("statistic,dof,p_value\n{},{},{}\n", w.statistic, w.dof, w.p_value),
                Format::Table => format!(
                    "Wald statistic: {:.4}\ndegrees of freedom: {}\np-value: {}\nmethod: {}\n",
                    w.statistic,
                    w.dof,
                    format_p(w.p_value),
                    est.method.label()
                ),
            })
        }
        Command::Dq { data, out_of_sample } => {
            let column = data.column.as_deref().unwrap_or(&s.column);
            let y = read_series(&data.data, column)?;
            if *out_of_sample >= y.len() {
                return Err(CliError::input("out-of-sample window covers the whole series"));
            }
            let n_in = y.len() - out_of_sample;
            let spec = model_spec(data, s)?;
            let fitted = fit(&spec, &y[..n_in], &s.estimate_config())?;
            let full = quantile_path(&spec, &fitted.beta, &y, fitted.f0)?.f;
            let mut t = String::from("mode,statistic,dof,p_value\n");
            let dq = dq_default(&y[..n_in], &full[..n_in], spec.tau, DqMode::InSample)?;
            t.push_str(&format!("in-sample,{},{},{}\n", dq.statistic, dq.dof, dq.p_value));
            if *out_of_sample > 0 {
                let dq = dq_default(&y[n_in..], &full[n_in..], spec.tau, DqMode::OutOfSample)?;
                t.push_str(&format!("out-of-sample,{},{},{}\n", dq.statistic, dq.dof, dq.p_value));
            }
            Ok(t)
        }
        Command::McSize {
            study,
            replications,
            checkpoint,
            log,
            format,
        } => {
            let mut cfg = match study {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| CliError::input(format!("cannot read {}: {e}", p.display())))?;
                    let mut c: McConfig = config::parse_table(&text)?
                        .try_into()
                        .map_err(|e: toml::de::Error| CliError::input(format!("invalid study: {}", e.message())))?;
                    if let Some(seed) = cli.seed {
                        c.seed = seed;
                    }
                    c
                }
                None => s.mc.clone(),
            };
            if let Some(n) = replications {
                cfg.replications = *n;
            }
            cfg.checkpoint = checkpoint.clone();
            let report = run_size_study(&cfg)?;
            if let Some(p) = log {
                write_or_return(Some(p), report.replication_log_csv())?;
            }
            Ok(match format {
                Format::Csv => report.to_csv(),
                Format::Json => json(&report.rows),
                Format::Table => report.to_table(),
            })
        }
        Command::Tables {
            suite,
            scale,
            checkpoint_dir,
            out_dir,
            dry_run,
        } => {
            let suite = Suite::parse(suite)?;
            let opts = SuiteOptions {
                scale: scale.unwrap_or(s.tables.scale),
                arb_draws: s.tables.arb_draws,
                estimate: s.estimate.clone(),
                seed: s.seed,
                execution: s.estimate.execution,
                checkpoint_dir: checkpoint_dir.clone().or_else(|| s.tables.checkpoint_dir.clone()),
            };
            if *dry_run {
                let mut t = String::new();
                for (title, cfg) in suite_configs(suite, &opts) {
                    t.push_str(&format!("{title}: {} replications, model {}\n", cfg.replications, cfg.model));
                }
                return Ok(t);
            }
            if let Some(dir) = &opts.checkpoint_dir {
                std::fs::create_dir_all(dir)?;
            }
            let reports = run_table_suite(suite, &opts)?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir)?;
                let tag = format!("{suite:?}").to_ascii_lowercase();
                for (k, r) in reports.iter().enumerate() {
                    std::fs::write(dir.join(format!("{tag}-{k}.csv")), r.to_csv())?;
                }
            }
            Ok(reports.iter().map(|r| r.to_table()).collect::<Vec<_>>().join("\n"))
        }
        Command::Empirical {
            prices,
            column,
            format,
            out,
        } => {
            let series = ingest_prices(prices, column)?;
            let report = empirical_pipeline(&series.y, &series.source, &s.empirical, &s.estimate, s.seed)?;
            let text = match format {
                Format::Csv => report.to_csv(),
                Format::Json => json(&report),
                Format::Table => report.to_table(),
            };
            let printed = write_or_return(out.as_deref(), text)?;
            let failed = report.failures();
            if failed.is_empty() {
                Ok(printed)
            } else {
                // the report is still emitted before the failure is signalled
                print!("{printed}");
                let names: Vec<String> = failed
                    .iter()
                    .map(|m| format!("{}: {}", m.model, m.error.as_deref().unwrap_or("")))
                    .collect();
                Err(CliError::Numerical(format!("model failures: {}", names.join("; "))))
            }
        }
    }
}
