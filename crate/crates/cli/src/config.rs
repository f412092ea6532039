//! TOML configuration file and command-line overrides.
//!
//! ```toml
//! config_version = 1
//!
//! [sim]
//! n_nodes = 16
//! rounds = 2000
//! mode = "time_weighted"
//! adversaries = [{ node = 0, samples_k = 8 }]
//!
//! [output]
//! chain = "chain.jsonl"
//! keys = "keys.json"
//! metrics = "metrics.json"
//! format = "text"
//! ```
//!
//! `[sim]` accepts every `SimConfig` field. Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use por_core::netsim::SimError;
use por_core::{AdversarySpec, Mode, SelectionRule, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_text, CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub chain: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub config_version: u32,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            config_version: CONFIG_VERSION,
            sim: SimConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: CliConfig = toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "config: unsupported config_version {} (expected {CONFIG_VERSION})",
                cfg.config_version
            )));
        }
        Ok(cfg)
    }

    /// A missing or unreadable config file is a configuration error.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path).map_err(|e| CliError::config(format!("config file {e}")))?;
        Self::parse(&text)
    }
}

/// Inclusive-exclusive seed range `a..b`, or `a..=b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedRange(pub Vec<u64>);

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            return Err(format!("expected a..b or a..=b, got {s:?}"));
        };
        let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
        let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
        if seeds.is_empty() {
            return Err(format!("seed range {s:?} is empty"));
        }
        Ok(SeedRange(seeds))
    }
}

/// `node:k`, e.g. `0:8`.
pub fn parse_adversary(s: &str) -> Result<AdversarySpec, String> {
    let (node, k) = s.split_once(':').ok_or_else(|| format!("expected node:k, got {s:?}"))?;
    Ok(AdversarySpec {
        node: node.trim().parse().map_err(|e| format!("adversary node: {e}"))?,
        samples_k: k.trim().parse().map_err(|e| format!("adversary samples: {e}"))?,
    })
}

/// Flags shared by `simulate` and `attack`. Each one overrides the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct SimArgs {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run every seed in `a..b` (or `a..=b`) in parallel
    #[arg(long)]
    pub seeds: Option<SeedRange>,
    /// small, large or weighted
    #[arg(long)]
    pub mode: Option<Mode>,
    /// min or max
    #[arg(long)]
    pub rule: Option<SelectionRule>,
    /// Grinding node as `id:k`; repeatable
    #[arg(long = "adversary", value_parser = parse_adversary)]
    pub adversaries: Vec<AdversarySpec>,
    /// Run the randomness gate on every node's pool
    #[arg(long)]
    pub gate: bool,
    #[arg(long)]
    pub blob_bytes: Option<usize>,
    #[arg(long)]
    pub min_dt: Option<u64>,
    #[arg(long)]
    pub dt_per_sample: Option<u64>,
    #[arg(long)]
    pub curve: Option<String>,
    /// Chain output (JSON lines)
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Node public keys output, needed by `verify`
    #[arg(long)]
    pub keys: Option<PathBuf>,
    /// Metrics output, JSON unless the format is csv
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl SimArgs {
    /// File values first, then flags on top.
    pub fn resolve(&self) -> CliResult<CliConfig> {
        let mut cfg = match &self.config {
            Some(p) => CliConfig::load(p)?,
            None => CliConfig::default(),
        };
        let sim = &mut cfg.sim;
        if let Some(v) = self.nodes {
            sim.n_nodes = v;
        }
        if let Some(v) = self.rounds {
            sim.rounds = v;
        }
        if let Some(v) = self.seed {
            sim.seed = v;
        }
        if let Some(v) = self.mode {
            sim.mode = v;
        }
        if let Some(v) = self.rule {
            sim.selection_rule = v;
        }
        if !self.adversaries.is_empty() {
            sim.adversaries = self.adversaries.clone();
        }
        if self.gate {
            sim.gate_randomness = true;
        }
        if let Some(v) = self.blob_bytes {
            sim.blob_bytes = v;
        }
        if let Some(v) = self.min_dt {
            sim.min_dt_ms = v;
        }
        if let Some(v) = self.dt_per_sample {
            sim.dt_per_sample_ms = v;
        }
        if let Some(v) = &self.curve {
            sim.curve = v.clone();
        }
        let out = &mut cfg.output;
        if let Some(v) = &self.chain {
            out.chain = Some(v.clone());
        }
        if let Some(v) = &self.keys {
            out.keys = Some(v.clone());
        }
        if let Some(v) = &self.metrics {
            out.metrics = Some(v.clone());
        }
        if let Some(v) = self.format {
            out.format = v;
        }
        cfg.sim.validate().map_err(sim_error)?;
        Ok(cfg)
    }

    pub fn seeds(&self, cfg: &CliConfig) -> Vec<u64> {
        match &self.seeds {
            Some(r) => r.0.clone(),
            None => vec![cfg.sim.seed],
        }
    }
}

pub fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::ConfigInvalid(_) => CliError::config(e),
        other => CliError::runtime(other),
    }
}
