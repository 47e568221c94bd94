//! Experiment configuration files (JSON, schema version 1).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sdentropy::estimators::DEFAULT_ORACLE_CAP;
use sdentropy::model::{
    circulant, make_constellation, memory10_taps, normalize_taps, selective_channel, ChannelInstance, Constellation,
    ConstellationKind, Ordering,
};
use sdentropy::rng;

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub channel: ChannelSpec,
    pub constellation: ConstellationSpec,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Each entry is an object with a `name` field plus method parameters.
    pub methods: Vec<Value>,
    pub n_d: usize,
    pub n_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
}

fn default_oracle_cap() -> u64 {
    DEFAULT_ORACLE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Circulant FIR channel.
    Fir { n_t: usize, taps: Taps },
    /// `H = A·G` with Rayleigh diagonal `A`.
    Selective { n_t: usize, memory: usize, seed: u64 },
    Identity { n_t: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Taps {
    /// `"memory10"`: `g_l = 1/(1+(l−5)²)`, `l = 0..=10`.
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSpec {
    pub kind: String,
    pub size: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.n_d == 0 || self.n_n == 0 {
            return Err(HarnessError::Config("n_d and n_n must be at least 1".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(HarnessError::Config(format!("SNR {bad} is not finite")));
        }
        self.build_constellation()?;
        Ok(())
    }

    pub fn n_t(&self) -> usize {
        match self.channel {
            ChannelSpec::Fir { n_t, .. } | ChannelSpec::Selective { n_t, .. } | ChannelSpec::Identity { n_t } => n_t,
        }
    }

    pub fn build_constellation(&self) -> Result<Constellation, HarnessError> {
        let kind: ConstellationKind = self.constellation.kind.parse().map_err(config_err)?;
        make_constellation(kind, self.constellation.size).map_err(config_err)
    }

    /// The FIR taps (normalized) when the channel is an FIR channel.
    pub fn fir_taps(&self) -> Result<Option<Vec<f64>>, HarnessError> {
        match &self.channel {
            ChannelSpec::Fir { taps, .. } => Ok(Some(normalize_taps(&resolve_taps(taps)?).map_err(config_err)?)),
            ChannelSpec::Identity { .. } => Ok(Some(vec![1.0])),
            ChannelSpec::Selective { .. } => Ok(None),
        }
    }

    pub fn build_channel(&self) -> Result<ChannelInstance, HarnessError> {
        let h = match &self.channel {
            ChannelSpec::Fir { n_t, taps } => circulant(&resolve_taps(taps)?, *n_t).map_err(config_err)?,
            ChannelSpec::Identity { n_t } => circulant(&[1.0], *n_t).map_err(config_err)?,
            ChannelSpec::Selective { n_t, memory, seed } => {
                let mut r = rng::stream(*seed, rng::domain::CHANNEL, 0);
                return selective_channel(*n_t, *memory, &mut r).map_err(config_err);
            }
        };
        ChannelInstance::new(h, Ordering::Natural).map_err(HarnessError::from)
    }
}

fn resolve_taps(taps: &Taps) -> Result<Vec<f64>, HarnessError> {
    match taps {
        Taps::Named(name) if name == "memory10" => Ok(memory10_taps()),
        Taps::Named(name) => Err(HarnessError::Config(format!("unknown tap set `{name}`"))),
        Taps::Values(v) => Ok(v.clone()),
    }
}

pub(crate) fn config_err(e: sdentropy::Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

/// Parses a comma-separated list of reals; `inf` is accepted.
pub fn parse_list(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "inf" | "∞" => Ok(f64::INFINITY),
            _ => t
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("`{t}` is not a number"))),
        })
        .collect()
}
