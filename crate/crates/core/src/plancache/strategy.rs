use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.75;
pub const DEFAULT_PCA_DIMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategyKind {
    /// Classify, strip parameters, search the template within the intent.
    AgentReuse,
    /// Raw-text similarity over the whole cache, no intent.
    GptCache,
    /// `GptCache` with PCA-reduced embeddings.
    MeanCache,
    /// `AgentReuse` but searching across all intents.
    OneIntent,
    /// `AgentReuse` without parameter stripping.
    WithArgs,
}

/// What text/vector a strategy stores and searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Template,
    Raw,
    RawPca,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::AgentReuse,
        StrategyKind::GptCache,
        StrategyKind::MeanCache,
        StrategyKind::OneIntent,
        StrategyKind::WithArgs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::AgentReuse => "AGENT_REUSE",
            StrategyKind::GptCache => "GPTCACHE",
            StrategyKind::MeanCache => "MEANCACHE",
            StrategyKind::OneIntent => "ONE_INTENT",
            StrategyKind::WithArgs => "WITH_ARGS",
        }
    }

    pub fn classifies(self) -> bool {
        matches!(self, StrategyKind::AgentReuse | StrategyKind::OneIntent | StrategyKind::WithArgs)
    }

    pub fn searches_all(self) -> bool {
        !matches!(self, StrategyKind::AgentReuse | StrategyKind::WithArgs)
    }

    pub fn key_kind(self) -> KeyKind {
        match self {
            StrategyKind::AgentReuse | StrategyKind::OneIntent => KeyKind::Template,
            StrategyKind::WithArgs | StrategyKind::GptCache => KeyKind::Raw,
            StrategyKind::MeanCache => KeyKind::RawPca,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match norm.as_str() {
            "agentreuse" => Ok(StrategyKind::AgentReuse),
            "gptcache" => Ok(StrategyKind::GptCache),
            "meancache" => Ok(StrategyKind::MeanCache),
            "oneintent" => Ok(StrategyKind::OneIntent),
            "withargs" => Ok(StrategyKind::WithArgs),
            _ => Err(Error::Config(format!("unknown strategy {s:?}"))),
        }
    }
}

/// A strategy with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Minimum cosine similarity for a hit.
    pub gamma: f64,
    /// Output dimension of the PCA reduction (MEANCACHE only).
    pub pca_dims: usize,
}

impl Strategy {
    pub fn new(kind: StrategyKind, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(Self {
            kind,
            gamma,
            pca_dims: DEFAULT_PCA_DIMS,
        })
    }

    pub fn with_pca_dims(mut self, dims: usize) -> Self {
        self.pca_dims = dims;
        self
    }
}

impl Default for Strategy {
    fn default() -> Self {
        Self {
            kind: StrategyKind::AgentReuse,
            gamma: DEFAULT_GAMMA,
            pca_dims: DEFAULT_PCA_DIMS,
        }
    }
}
