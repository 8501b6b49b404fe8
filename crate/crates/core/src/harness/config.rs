//! TOML configuration: backends, cache parameters, tool bindings.
//!
//! Every section is optional; the defaults give the fully in-process setup
//! (hashed n-gram embedder, bundled rule pack, stub planner, builtin tools).
//! Relative paths resolve against the config file's directory.
//!
//! ```toml
//! [cache]
//! strategy = "AGENT_REUSE"
//! gamma = 0.75
//! pca_dims = 64
//! template_mode = "delete"   # or "placeholder"
//! # capacity = 10000
//!
//! [embedding]
//! backend = "hashed"         # or "remote" (needs url)
//! dim = 512
//!
//! [classifier]
//! backend = "rules"          # or "remote" (needs url, taxonomy)
//! rules = "rules.json"
//!
//! [planner]
//! backend = "stub"           # or "remote" (needs url)
//! latency_ms = 31800
//!
//! [tools]
//! query_flight = "format"    # format | echo | concat
//!
//! [server]
//! port = 8080
//! snapshot = "cache.snapshot.json"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use crate::embedding::{Embedder, HashedNgramEmbedder, RemoteEmbedder, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::intent::{Classifier, IntentCategory, RemoteClassifier, RuleClassifier, RulePack};
use crate::metrics::Backends;
use crate::plan::tools::{builtin_registry, BuiltinTool};
use crate::plan::ToolRegistry;
use crate::plancache::{PlanCache, Strategy, StrategyKind, DEFAULT_GAMMA, DEFAULT_PCA_DIMS};
use crate::planner::{Planner, RemotePlanner, StubPlanner, DEFAULT_PLAN_LATENCY};
use crate::template::TemplateMode;

/// The rule pack shipped with the crate, used when none is configured.
pub const BUNDLED_RULES: &str = include_str!("../../data/rules.json");

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Image tag to builtin behaviour; added to the builtin registry.
    #[serde(default)]
    pub tools: BTreeMap<String, String>,
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_pca_dims")]
    pub pca_dims: usize,
    #[serde(default)]
    pub template_mode: TemplateMode,
    #[serde(default)]
    pub capacity: Option<usize>,
}

fn default_strategy() -> String {
    "AGENT_REUSE".into()
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_pca_dims() -> usize {
    DEFAULT_PCA_DIMS
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            strategy: default_strategy(),
            gamma: DEFAULT_GAMMA,
            pca_dims: DEFAULT_PCA_DIMS,
            template_mode: TemplateMode::Delete,
            capacity: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default = "hashed")]
    pub backend: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub case_fold: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn hashed() -> String {
    "hashed".into()
}
fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: hashed(),
            dim: DEFAULT_DIM,
            case_fold: false,
            seed: None,
            url: None,
            timeout_ms: default_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    #[serde(default = "rules")]
    pub backend: String,
    /// Rule pack path; the bundled pack when absent.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub url: Option<String>,
    /// Category names a remote classifier may return.
    #[serde(default)]
    pub taxonomy: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn rules() -> String {
    "rules".into()
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            backend: rules(),
            rules: None,
            url: None,
            taxonomy: Vec::new(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(default = "stub")]
    pub backend: String,
    /// Accounted latency of the stub planner.
    #[serde(default = "default_latency_ms")]
    pub latency_ms: u64,
    #[serde(default)]
    pub url: Option<String>,
    /// Prompt template file sent to a remote planner.
    #[serde(default)]
    pub prompt: Option<PathBuf>,
    #[serde(default = "default_planner_timeout_ms")]
    pub timeout_ms: u64,
}

fn stub() -> String {
    "stub".into()
}
fn default_latency_ms() -> u64 {
    DEFAULT_PLAN_LATENCY.as_millis() as u64
}
fn default_planner_timeout_ms() -> u64 {
    120_000
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            backend: stub(),
            latency_ms: default_latency_ms(),
            url: None,
            prompt: None,
            timeout_ms: default_planner_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
}

fn default_port() -> u16 {
    8080
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            port: default_port(),
            snapshot: None,
        }
    }
}

fn need<'a>(v: &'a Option<String>, what: &str) -> Result<&'a str> {
    v.as_deref()
        .ok_or_else(|| Error::Config(format!("{what} backend \"remote\" needs a url")))
}

impl Config {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.into();
        c.strategy()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn strategy(&self) -> Result<Strategy> {
        let kind: StrategyKind = self.cache.strategy.parse()?;
        let s = Strategy::new(kind, self.cache.gamma).map_err(|e| Error::Config(e.to_string()))?;
        if self.cache.pca_dims == 0 {
            return Err(Error::Config("pca_dims must be positive".into()));
        }
        Ok(s.with_pca_dims(self.cache.pca_dims))
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>> {
        let e = &self.embedding;
        match e.backend.as_str() {
            "hashed" => {
                let mut h = HashedNgramEmbedder::new(e.dim).map_err(|err| Error::Config(err.to_string()))?;
                if let Some(seed) = e.seed {
                    h = h.with_seed(seed);
                }
                Ok(Arc::new(h.with_case_fold(e.case_fold)))
            }
            "remote" => Ok(Arc::new(RemoteEmbedder::new(
                need(&e.url, "embedding")?,
                e.dim,
                Duration::from_millis(e.timeout_ms),
            ))),
            other => Err(Error::Config(format!("unknown embedding backend {other:?}"))),
        }
    }

    pub fn classifier(&self) -> Result<Arc<dyn Classifier>> {
        let c = &self.classifier;
        match c.backend.as_str() {
            "rules" => {
                let pack = match &c.rules {
                    Some(p) => RulePack::load(self.resolve(p)),
                    None => RulePack::from_json(BUNDLED_RULES),
                }
                .map_err(|e| Error::Config(format!("rule pack: {e}")))?;
                Ok(Arc::new(RuleClassifier::new(pack).map_err(|e| Error::Config(e.to_string()))?))
            }
            "remote" => {
                let taxonomy = c
                    .taxonomy
                    .iter()
                    .map(|t| IntentCategory::new(t))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Config(e.to_string()))?;
                if taxonomy.is_empty() {
                    return Err(Error::Config("remote classifier needs a taxonomy".into()));
                }
                Ok(Arc::new(RemoteClassifier::new(
                    need(&c.url, "classifier")?,
                    taxonomy,
                    Duration::from_millis(c.timeout_ms),
                )))
            }
            other => Err(Error::Config(format!("unknown classifier backend {other:?}"))),
        }
    }

    pub fn planner(&self) -> Result<Arc<dyn Planner>> {
        let p = &self.planner;
        match p.backend.as_str() {
            "stub" => Ok(Arc::new(StubPlanner::new(Duration::from_millis(p.latency_ms)))),
            "remote" => {
                let mut r = RemotePlanner::new(need(&p.url, "planner")?, Duration::from_millis(p.timeout_ms));
                if let Some(prompt) = &p.prompt {
                    let path = self.resolve(prompt);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    r = r.with_prompt(text);
                }
                Ok(Arc::new(r))
            }
            other => Err(Error::Config(format!("unknown planner backend {other:?}"))),
        }
    }

    pub fn tools(&self) -> Result<ToolRegistry> {
        let mut reg = builtin_registry();
        for (tag, behaviour) in &self.tools {
            let b = BuiltinTool::parse(behaviour)
                .ok_or_else(|| Error::Config(format!("tool {tag}: unknown behaviour {behaviour:?}")))?;
            b.register(&mut reg, tag);
        }
        Ok(reg)
    }

    pub fn backends(&self) -> Result<Backends> {
        Ok(Backends {
            embedder: self.embedder()?,
            classifier: self.classifier()?,
            planner: self.planner()?,
        })
    }

    /// An empty cache for the configured strategy. MEANCACHE additionally
    /// needs a PCA model (see `Evaluator::fit_pca`).
    pub fn cache(&self, backends: &Backends) -> Result<PlanCache> {
        let mut cache = PlanCache::new(self.strategy()?, backends.embedder.clone(), backends.classifier.clone())
            .with_template_mode(self.cache.template_mode);
        if let Some(cap) = self.cache.capacity {
            cache = cache.with_capacity(cap);
        }
        Ok(cache)
    }
}
