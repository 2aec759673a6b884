use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeldMode {
    /// Full subgraph melding with region replication.
    #[default]
    Darm,
    /// Only melds the two arms of a plain if-then-else diamond.
    BranchFusion,
}

impl std::str::FromStr for MeldMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "darm" => Ok(MeldMode::Darm),
            "branch-fusion" | "branch-fusion-only" => Ok(MeldMode::BranchFusion),
            other => Err(ConfigError::BadValue {
                key: "mode".into(),
                value: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeldConfig {
    /// Minimum subgraph profitability for a pair to be melded, in `[0, 0.5]`.
    pub threshold: f64,
    /// Score of one gap column in both alignments; must not be positive.
    pub gap_penalty: f64,
    pub max_iterations: usize,
    pub mode: MeldMode,
    pub target_function: Option<String>,
    /// Stop after the first round of melding.
    pub run_once: bool,
}

impl Default for MeldConfig {
    fn default() -> Self {
        MeldConfig {
            threshold: 0.2,
            gap_penalty: -1.0,
            max_iterations: 32,
            mode: MeldMode::Darm,
            target_function: None,
            run_once: false,
        }
    }
}

impl MeldConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        MeldConfig {
            threshold,
            ..MeldConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String| ConfigError::BadValue {
            key: key.into(),
            value,
        };
        if !(0.0..=0.5).contains(&self.threshold) {
            return Err(bad("threshold", self.threshold.to_string()));
        }
        if self.gap_penalty.is_nan() || self.gap_penalty > 0.0 {
            return Err(bad("gap-penalty", self.gap_penalty.to_string()));
        }
        if self.max_iterations == 0 {
            return Err(bad("max-iterations", "0".into()));
        }
        Ok(())
    }

    /// Apply one `key = value` setting. Keys accept `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        match key.replace('_', "-").as_str() {
            "threshold" => self.threshold = value.parse().map_err(|_| bad())?,
            "gap-penalty" => self.gap_penalty = value.parse().map_err(|_| bad())?,
            "max-iterations" => self.max_iterations = value.parse().map_err(|_| bad())?,
            "mode" => self.mode = value.parse()?,
            "function" | "target-function" => self.target_function = Some(value.to_string()),
            "run-once" => self.run_once = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Overlay a key=value file onto `self`. `#` starts a comment.
    pub fn merge_kv(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or(ConfigError::Malformed { line: i + 1 })?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }
}
