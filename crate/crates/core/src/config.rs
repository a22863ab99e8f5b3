//! Configuration blocks of the command-line stages and the replay metadata
//! stamped on every output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::reconstruct::TemporalSource;
use crate::step_law::StepLawJson;
use crate::torus::SceneryJson;

/// SHA-256 of the compact JSON form of a configuration. `serde_json` keeps
/// object keys sorted, so equal configurations hash equally.
pub fn config_hash(value: &serde_json::Value) -> String {
    let text = serde_json::to_string(value).expect("json value serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Replay metadata carried by every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Stage tolerances or error estimates, as readable text.
    pub tolerances: Vec<String>,
}

impl Meta {
    pub fn new(command: &str, config: &serde_json::Value, seed: u64) -> Self {
        Meta {
            command: command.into(),
            config_hash: config_hash(config),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            tolerances: Vec::new(),
        }
    }

    /// `# `-prefixed header lines for CSV outputs (without the prefix).
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("command: {}", self.command),
            format!("config_hash: {}", self.config_hash),
            format!("seed: {}", self.seed),
            format!("version: {}", self.version),
        ];
        lines.extend(self.tolerances.iter().map(|t| format!("tolerance: {t}")));
        lines
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub law: StepLawJson,
    pub scenery: SceneryJson,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierConfig {
    pub scenery: SceneryJson,
    pub n: usize,
    #[serde(rename = "K")]
    pub cutoff: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Mc,
    Exact,
    Quadrature,
}

fn default_samples() -> u64 {
    100_000
}

fn default_series_cutoff() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    pub law: StepLawJson,
    pub scenery: SceneryJson,
    /// Time-gap tuples; an empty tuple asks for `S_0`.
    pub times: Vec<Vec<f64>>,
    pub method: CorrelationMethod,
    #[serde(default = "default_samples")]
    pub samples: u64,
    /// Series truncation for the exact method.
    #[serde(rename = "K", default = "default_series_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub gap: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Where an inversion reads temporal correlations from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvertOracle {
    Exact,
    Mc,
    Trace,
}

impl From<TemporalSource> for InvertOracle {
    fn from(s: TemporalSource) -> Self {
        match s {
            TemporalSource::Exact => InvertOracle::Exact,
            TemporalSource::Mc => InvertOracle::Mc,
        }
    }
}

fn default_t0() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertConfig {
    pub law: StepLawJson,
    #[serde(default)]
    pub scenery: Option<SceneryJson>,
    #[serde(default)]
    pub trace_file: Option<PathBuf>,
    pub n: usize,
    #[serde(rename = "K")]
    pub cutoff: usize,
    /// Unknowns are solved on `|k| <= guard + K`; only `|k| <= K` is kept.
    #[serde(default = "default_guard")]
    pub guard: usize,
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Per-coordinate multipliers; all ones by default.
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    /// Powers per coordinate; twice the solve band by default.
    #[serde(default)]
    pub moments: Option<usize>,
    pub oracle: InvertOracle,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_series_cutoff")]
    pub fourier_cutoff: usize,
    /// Tables of orders `1..n-1`, needed when the law has an atom.
    #[serde(default)]
    pub lower_tables: Vec<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_guard() -> usize {
    1
}

fn default_resolution() -> usize {
    1024
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Scenery JSON, or a reconstruction output with an `estimate` field.
    pub estimate: PathBuf,
    pub truth: PathBuf,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub allow_reflection: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{ "b":[1,2], "a":1 }"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: serde_json::Value = serde_json::from_str(r#"{"a":2,"b":[1,2]}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn configs_parse() {
        let text = r#"{"scenery":{"dim":1,"boxes":[[[0,3.14]]]},"n":1,"K":3}"#;
        let f: FourierConfig = serde_json::from_str(text).unwrap();
        assert_eq!(f.cutoff, 3);
        let text = r#"{"law":{"dim":1,"brownian":{"drift":[1],"sigma2":[1]}},
            "scenery":{"dim":1,"boxes":[[[0,1]]]},"times":[[0.5],[0.3,0.7]],"method":"mc"}"#;
        let c: CorrelateConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.samples, 100_000);
        assert_eq!(c.method, CorrelationMethod::Mc);
        assert!(serde_json::from_str::<FourierConfig>(
            r#"{"scenery":{"dim":1,"boxes":[]},"n":1,"K":3,"x":1}"#
        )
        .is_err());
    }

    #[test]
    fn header_lines_carry_hash_and_seed() {
        let v = serde_json::json!({"a": 1});
        let mut meta = Meta::new("simulate", &v, 7);
        meta.tolerances.push("none".into());
        let lines = meta.header_lines();
        assert!(lines.iter().any(|l| l == "seed: 7"));
        assert!(lines.iter().any(|l| l.starts_with("config_hash: ")));
        assert_eq!(lines.last().unwrap(), "tolerance: none");
    }
}
