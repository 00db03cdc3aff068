//! Layered settings: built-in defaults, then a config file, then `--set`
//! overrides, then the global flags.
//!
//! A config file is either TOML or plain `key = value` lines. Dotted keys
//! address nested tables (`estimate.n_trials = 500`) and bare words are read
//! as strings (`model = sav`).

use std::path::{Path, PathBuf};

use caviar_core::covmat::ArbConfig;
use caviar_core::estimate::EstimateConfig;
use caviar_core::mcstudy::McConfig;
use caviar_core::numkit::MadConvention;
use caviar_core::rng::substream_seed;
use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub dgp: String,
    pub t_len: usize,
    pub burn_in: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            dgp: "r1".into(),
            t_len: 2000,
            burn_in: caviar_core::dgp::DEFAULT_BURN_IN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesSettings {
    /// Replications as a fraction of 1000.
    pub scale: f64,
    pub arb_draws: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TablesSettings {
    fn default() -> Self {
        Self {
            scale: 0.3,
            arb_draws: 10_000,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Master seed. Single-fit commands derive the estimation and ARB seeds
    /// from it; `mc-size` and `tables` use it as the study seed.
    pub seed: u64,
    pub threads: Option<usize>,
    pub tau: f64,
    pub model: String,
    pub adaptive_g: f64,
    /// Data column read by `fit`, `se`, `wald` and `dq`.
    pub column: String,
    pub estimate: EstimateConfig,
    pub arb: ArbConfig,
    pub kernel_mad: MadConvention,
    /// Finite-difference step is `fd_scale / T`.
    pub fd_scale: f64,
    pub simulate: SimulateSettings,
    pub empirical: EmpiricalConfig,
    pub mc: McConfig,
    pub tables: TablesSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 20_240_101,
            threads: None,
            tau: 0.5,
            model: "as".into(),
            adaptive_g: 10.0,
            column: "y".into(),
            estimate: EstimateConfig::default(),
            arb: ArbConfig::default(),
            kernel_mad: MadConvention::default(),
            fd_scale: 10.0,
            simulate: SimulateSettings::default(),
            empirical: EmpiricalConfig::default(),
            mc: McConfig::default(),
            tables: TablesSettings::default(),
        }
    }
}

impl Settings {
    /// Estimation settings for single fits: the multistart seed is a
    /// substream of the master seed.
    pub fn estimate_config(&self) -> EstimateConfig {
        self.estimate.clone().with_seed(substream_seed(self.seed, 1))
    }

    pub fn arb_config(&self) -> ArbConfig {
        ArbConfig {
            seed: substream_seed(self.seed, 2),
            execution: self.estimate.execution,
            ..self.arb.clone()
        }
    }
}

/// Turns `key = value` lines into TOML, quoting values that are not TOML
/// literals. Blank lines and `#` comments are skipped.
pub fn key_values_to_toml(text: &str) -> CliResult<String> {
    let mut out = String::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("config line {}: expected key = value", k + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::input(format!("config line {}: empty key", k + 1)));
        }
        let literal = format!("v = {value}").parse::<toml::Table>().is_ok();
        let value = if literal {
            value.to_string()
        } else {
            toml::Value::String(value.to_string()).to_string()
        };
        out.push_str(&format!("{key} = {value}\n"));
    }
    Ok(out)
}

/// Parses config text as TOML, falling back to `key = value` lines.
pub fn parse_table(text: &str) -> CliResult<toml::Table> {
    match text.parse::<toml::Table>() {
        Ok(t) => Ok(t),
        Err(first) => key_values_to_toml(text)?
            .parse::<toml::Table>()
            .map_err(|_| CliError::input(format!("config is neither TOML nor key = value lines: {first}"))),
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Builds settings from an optional config file and `key=value` overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Settings> {
    let mut table = toml::Table::new();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
        table = parse_table(&text)?;
    }
    for o in overrides {
        merge(&mut table, parse_table(&key_values_to_toml(o)?)?);
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::input(format!("invalid config: {}", e.message())))
}
