//! Experiment configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::combinatorics::{Verification, DEFAULT_ENUMERATION_BUDGET};
use crate::params::ParamsDocument;
use crate::protocols::CoinMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// A complete, serializable experiment description. Together with the code
/// version it fixes every output byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub params: ParamsDocument,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub seed: u64,
    /// Lets the adversary read honest payloads.
    #[serde(default)]
    pub full_information: bool,
    #[serde(default = "default_coin")]
    pub coin: CoinMode,
    /// Parallel coin instances.
    #[serde(default = "default_ell")]
    pub ell: usize,
    /// How generated committees and graphs are checked.
    #[serde(default = "default_verification")]
    pub verification: Verification,
    /// Enumeration budget for exhaustive verification.
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_log: Option<PathBuf>,
}

fn default_strategy() -> String {
    "fifo".into()
}

fn default_trials() -> u64 {
    10_000
}

fn default_confidence() -> f64 {
    0.99
}

fn default_coin() -> CoinMode {
    CoinMode::Ideal
}

fn default_ell() -> usize {
    1
}

fn default_verification() -> Verification {
    Verification::Exhaustive
}

fn default_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

impl ExperimentConfig {
    pub fn new(params: ParamsDocument) -> Self {
        ExperimentConfig {
            params,
            strategy: default_strategy(),
            trials: default_trials(),
            confidence: default_confidence(),
            seed: 0,
            full_information: false,
            coin: default_coin(),
            ell: default_ell(),
            verification: default_verification(),
            budget: default_budget(),
            layout: None,
            out: None,
            event_log: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Canonical JSON: fields in declaration order, no whitespace.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical_json`].
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

/// Hex SHA-256 of the compact JSON form of `value`.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{CoinParams, ParamOverrides};

    fn sample() -> ExperimentConfig {
        ExperimentConfig::new(ParamsDocument {
            params: CoinParams {
                n: 16,
                t: 4,
                z: 0.1,
                k: 4.0,
                epsilon: 1.0 / 12.0,
                alpha: 1.0 / 3.0,
                delta: 1.0,
                r: 1.0,
            },
            overrides: ParamOverrides {
                q: Some(5),
                ..Default::default()
            },
        })
    }

    #[test]
    fn round_trips_and_digest_is_stable() {
        let cfg = sample();
        let back = ExperimentConfig::from_json(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = ExperimentConfig::from_json(
            r#"{"n": 16, "z": 0.3, "k": 2, "epsilon": 0.05, "alpha": 0.3333}"#,
        )
        .unwrap();
        assert_eq!(cfg.trials, 10_000);
        assert_eq!(cfg.strategy, "fifo");
        assert_eq!(cfg.coin, CoinMode::Ideal);
        assert_eq!(cfg.params.params.r, 1.0);
    }

    #[test]
    fn seed_changes_digest() {
        let mut other = sample();
        other.seed = 1;
        assert_ne!(other.digest(), sample().digest());
    }
}
