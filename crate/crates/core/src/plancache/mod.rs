//! The plan cache: decides whether a request can reuse a stored plan.
//!
//! Per request, [`PlanCache::decide`] runs the strategy's pipeline
//! (classify, strip parameters, embed, search, threshold) and returns a
//! [`Decided`] carrying the decision, the search key and the latency split.
//! On a miss the caller generates a plan and hands it back through
//! [`PlanCache::admit`]. The cache is append-only.

mod pipeline;
mod snapshot;
mod strategy;

pub use pipeline::{Outcome, ReusePipeline};
pub use snapshot::SNAPSHOT_FORMAT_VERSION;
pub use strategy::{KeyKind, Strategy, StrategyKind, DEFAULT_GAMMA, DEFAULT_PCA_DIMS};

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedder, Embedding, PcaModel};
use crate::error::{Error, Result};
use crate::index::{EntryId, FlatIndex};
use crate::intent::{Classifier, IntentCategory, IntentResult, Slot};
use crate::metrics::LatencyBreakdown;
use crate::plan::StructuredPlan;
use crate::template::{extract_template_with, TemplateMode};
use crate::text::canonicalize;

/// Partition used by strategies that do not classify.
pub const GLOBAL_CATEGORY: &str = "_ALL";

fn global_category() -> IntentCategory {
    IntentCategory::new(GLOBAL_CATEGORY).expect("valid reserved category")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub id: EntryId,
    pub category: IntentCategory,
    /// The text that was embedded: the template, or the raw request.
    pub key_text: String,
    pub embedding: Embedding,
    pub plan: StructuredPlan,
    pub source_request_id: String,
    pub created_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum MissReason {
    BelowThreshold { best: f64 },
    EmptyCategory,
    /// The nearest entry cleared the threshold but its plan needs a
    /// parameter the request does not carry.
    ParameterMismatch { similarity: f64, missing: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum BypassReason {
    UndefinedIntent,
    BackendError(String),
}

#[derive(Debug, Clone)]
pub enum Decision {
    Hit {
        entry: Arc<CacheEntry>,
        similarity: f64,
        params: Vec<Slot>,
    },
    Miss(MissReason),
    Bypass(BypassReason),
}

impl Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Hit { .. } => "hit",
            Decision::Miss(_) => "miss",
            Decision::Bypass(_) => "bypass",
        }
    }

    pub fn is_hit(&self) -> bool {
        matches!(self, Decision::Hit { .. })
    }

    /// Best similarity seen by the search, if one ran.
    pub fn similarity(&self) -> Option<f64> {
        match self {
            Decision::Hit { similarity, .. } => Some(*similarity),
            Decision::Miss(MissReason::BelowThreshold { best }) => Some(*best),
            Decision::Miss(MissReason::ParameterMismatch { similarity, .. }) => Some(*similarity),
            _ => None,
        }
    }

    pub fn reason(&self) -> Option<String> {
        match self {
            Decision::Hit { .. } => None,
            Decision::Miss(MissReason::BelowThreshold { .. }) => Some("below_threshold".into()),
            Decision::Miss(MissReason::EmptyCategory) => Some("empty_category".into()),
            Decision::Miss(MissReason::ParameterMismatch { missing, .. }) => {
                Some(format!("parameter_mismatch: {missing}"))
            }
            Decision::Bypass(BypassReason::UndefinedIntent) => Some("undefined_intent".into()),
            Decision::Bypass(BypassReason::BackendError(e)) => Some(format!("backend_error: {e}")),
        }
    }
}

/// Where a request would be stored on admission.
#[derive(Debug, Clone)]
pub struct CacheKey {
    pub category: IntentCategory,
    pub text: String,
    pub embedding: Embedding,
}

/// The nearest stored entry found by the search.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub entry: Arc<CacheEntry>,
    pub similarity: f64,
    /// A slot role the entry's plan needs that the request lacks.
    pub missing: Option<String>,
}

/// Result of [`PlanCache::decide`].
#[derive(Debug, Clone)]
pub struct Decided {
    pub decision: Decision,
    /// `None` when the search did not run or found nothing.
    pub candidate: Option<Candidate>,
    /// Classification result; `UNDEFINED` with no slots for strategies that
    /// do not classify.
    pub intent: IntentResult,
    /// `None` for bypassed requests, which are never stored.
    pub key: Option<CacheKey>,
    pub latency: LatencyBreakdown,
}

impl Decided {
    /// Whether the same search would have been a hit under threshold `gamma`.
    pub fn hit_at(&self, gamma: f64) -> bool {
        !matches!(self.decision, Decision::Bypass(_))
            && self
                .candidate
                .as_ref()
                .is_some_and(|c| c.similarity >= gamma && c.missing.is_none())
    }
}

/// What [`PlanCache::admit`] did.
#[derive(Debug, Clone)]
pub enum Admission {
    Stored(Arc<CacheEntry>),
    /// A concurrent admission already stored an entry this request would
    /// have hit; nothing was added.
    Covered(Arc<CacheEntry>),
}

impl Admission {
    pub fn entry(&self) -> &Arc<CacheEntry> {
        match self {
            Admission::Stored(e) | Admission::Covered(e) => e,
        }
    }
}

#[derive(Debug, Default)]
struct State {
    index: FlatIndex,
    entries: HashMap<EntryId, Arc<CacheEntry>>,
    sources: HashSet<String>,
    next_id: EntryId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub categories: usize,
    pub comparisons: u64,
}

pub struct PlanCache {
    strategy: Strategy,
    embedder: Arc<dyn Embedder>,
    classifier: Arc<dyn Classifier>,
    pca: Option<PcaModel>,
    template_mode: TemplateMode,
    capacity: Option<usize>,
    state: RwLock<State>,
}

impl std::fmt::Debug for PlanCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlanCache")
            .field("strategy", &self.strategy)
            .field("embedder", &self.embedder.fingerprint())
            .field("entries", &self.len())
            .finish()
    }
}

impl PlanCache {
    pub fn new(strategy: Strategy, embedder: Arc<dyn Embedder>, classifier: Arc<dyn Classifier>) -> Self {
        Self {
            strategy,
            embedder,
            classifier,
            pca: None,
            template_mode: TemplateMode::Delete,
            capacity: None,
            state: RwLock::new(State::default()),
        }
    }

    /// Installs the projection MEANCACHE applies to every embedding.
    pub fn with_pca(mut self, model: PcaModel) -> Result<Self> {
        if model.d_in() != self.embedder.dim() {
            return Err(Error::Config(format!(
                "PCA input dimension {} does not match embedder dimension {}",
                model.d_in(),
                self.embedder.dim()
            )));
        }
        self.pca = Some(model);
        Ok(self)
    }

    pub fn with_template_mode(mut self, mode: TemplateMode) -> Self {
        self.template_mode = mode;
        self
    }

    /// Caps the number of entries; admissions beyond it are rejected.
    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = Some(capacity);
        self
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn classifier(&self) -> &Arc<dyn Classifier> {
        &self.classifier
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn len(&self) -> usize {
        self.state.read().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, id: EntryId) -> Option<Arc<CacheEntry>> {
        self.state.read().entries.get(&id).cloned()
    }

    pub fn stats(&self) -> CacheStats {
        let st = self.state.read();
        CacheStats {
            entries: st.entries.len(),
            categories: st.index.categories().count(),
            comparisons: st.index.comparisons(),
        }
    }

    /// Classifies `text` (when the strategy does) and decides.
    pub fn decide(&self, text: &str) -> Result<Decided> {
        let started = Instant::now();
        let canonical = canonicalize(text);
        if canonical.is_empty() {
            return Err(Error::InvalidInput("request text is empty".into()));
        }
        if !self.strategy.kind.classifies() {
            return self.decide_inner(&canonical, IntentResult::undefined(), started, Duration::ZERO);
        }
        let t = Instant::now();
        let classified = self.classifier.classify(&canonical);
        let intent_time = t.elapsed();
        match classified {
            Ok(intent) => self.decide_inner(&canonical, intent, started, intent_time),
            Err(e) if e.is_backend() => {
                tracing::warn!(error = %e, "classifier failed, bypassing cache");
                Ok(bypass(BypassReason::BackendError(e.to_string()), started, intent_time, Duration::ZERO))
            }
            Err(e) => Err(e),
        }
    }

    /// Decides with a given classification (gold labels), skipping the
    /// classifier. Strategies that do not classify ignore `intent`.
    pub fn decide_with_intent(&self, text: &str, intent: IntentResult) -> Result<Decided> {
        let started = Instant::now();
        let canonical = canonicalize(text);
        if canonical.is_empty() {
            return Err(Error::InvalidInput("request text is empty".into()));
        }
        let intent = if self.strategy.kind.classifies() {
            crate::intent::validate_slots(&canonical, &intent.slots)?;
            intent
        } else {
            IntentResult::undefined()
        };
        self.decide_inner(&canonical, intent, started, Duration::ZERO)
    }

    fn decide_inner(
        &self,
        canonical: &str,
        intent: IntentResult,
        started: Instant,
        intent_time: Duration,
    ) -> Result<Decided> {
        let kind = self.strategy.kind;
        if kind.classifies() && intent.category.is_undefined() {
            let mut d = bypass(BypassReason::UndefinedIntent, started, intent_time, Duration::ZERO);
            d.intent = intent;
            return Ok(d);
        }

        let key_text = match kind.key_kind() {
            KeyKind::Template => extract_template_with(canonical, &intent.slots, self.template_mode)?,
            KeyKind::Raw | KeyKind::RawPca => canonical.to_string(),
        };
        let embedding = match self.key_embedding(&key_text) {
            Ok(e) => e,
            Err(e) if e.is_backend() => {
                tracing::warn!(error = %e, "embedder failed, bypassing cache");
                let mut d = bypass(BypassReason::BackendError(e.to_string()), started, intent_time, Duration::ZERO);
                d.intent = intent;
                return Ok(d);
            }
            Err(e) => return Err(e),
        };
        let category = if kind.classifies() {
            intent.category.clone()
        } else {
            global_category()
        };

        let t = Instant::now();
        let best = {
            let st = self.state.read();
            let found = if kind.searches_all() {
                st.index.search_all(&embedding, 1)?.into_iter().next().map(|h| (h.id, h.similarity))
            } else {
                st.index.search(&category, &embedding, 1)?.into_iter().next().map(|h| (h.id, h.similarity))
            };
            found.map(|(id, sim)| (st.entries[&id].clone(), sim))
        };
        let search_time = t.elapsed();

        let candidate = best.map(|(entry, similarity)| Candidate {
            missing: missing_role(&entry.plan, &intent.slots, kind.classifies()),
            entry,
            similarity,
        });
        let decision = match &candidate {
            None => Decision::Miss(MissReason::EmptyCategory),
            Some(c) if c.similarity < self.strategy.gamma => {
                Decision::Miss(MissReason::BelowThreshold { best: c.similarity })
            }
            Some(Candidate {
                missing: Some(role),
                similarity,
                ..
            }) => Decision::Miss(MissReason::ParameterMismatch {
                similarity: *similarity,
                missing: role.clone(),
            }),
            Some(c) => Decision::Hit {
                entry: c.entry.clone(),
                similarity: c.similarity,
                params: intent.slots.clone(),
            },
        };
        Ok(Decided {
            decision,
            candidate,
            intent,
            key: Some(CacheKey {
                category,
                text: key_text,
                embedding,
            }),
            latency: LatencyBreakdown::from_measured(intent_time, search_time, started.elapsed()),
        })
    }

    fn key_embedding(&self, key_text: &str) -> Result<Embedding> {
        let e = self.embedder.embed(key_text)?;
        if self.strategy.kind.key_kind() != KeyKind::RawPca {
            return Ok(e);
        }
        let pca = self
            .pca
            .as_ref()
            .ok_or_else(|| Error::Config("MEANCACHE requires a fitted PCA model".into()))?;
        let projected = pca.apply(&e)?;
        if projected.degenerate {
            tracing::debug!("PCA projection degenerate, mapped to basis vector");
        }
        Ok(projected.embedding)
    }

    /// Stores `plan` under the key of a request that missed.
    pub fn admit(&self, request_id: &str, decided: &Decided, plan: StructuredPlan) -> Result<Admission> {
        let key = match (&decided.decision, &decided.key) {
            (Decision::Miss(_), Some(key)) => key,
            (Decision::Hit { .. }, _) => {
                return Err(Error::AdmissionRejected("request hit the cache".into()))
            }
            _ => return Err(Error::AdmissionRejected("bypassed requests are not stored".into())),
        };
        let mut st = self.state.write();
        if st.sources.contains(request_id) {
            return Err(Error::DuplicateEntry(format!("request {request_id} already admitted")));
        }
        if let Some(cap) = self.capacity {
            if st.entries.len() >= cap {
                tracing::warn!(capacity = cap, "cache full, admission rejected");
                return Err(Error::CapacityReached(cap));
            }
        }
        // Another admission may have landed since `decide` released the lock.
        if let Some((id, sim)) = self.nearest_locked(&st, key)? {
            let covering = st.entries[&id].clone();
            if sim >= self.strategy.gamma
                && missing_role(&covering.plan, &decided.intent.slots, self.strategy.kind.classifies()).is_none()
            {
                return Ok(Admission::Covered(covering));
            }
        }

        let id = st.next_id;
        let entry = Arc::new(CacheEntry {
            id,
            category: key.category.clone(),
            key_text: key.text.clone(),
            embedding: key.embedding.clone(),
            plan,
            source_request_id: request_id.to_string(),
            created_at_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        });
        st.index.insert(&entry.category, id, entry.embedding.clone())?;
        st.next_id += 1;
        st.sources.insert(request_id.to_string());
        st.entries.insert(id, entry.clone());
        Ok(Admission::Stored(entry))
    }

    fn nearest_locked(&self, st: &State, key: &CacheKey) -> Result<Option<(EntryId, f64)>> {
        if st.entries.is_empty() {
            return Ok(None);
        }
        Ok(if self.strategy.kind.searches_all() {
            st.index.search_all(&key.embedding, 1)?.into_iter().next().map(|h| (h.id, h.similarity))
        } else {
            st.index.search(&key.category, &key.embedding, 1)?.into_iter().next().map(|h| (h.id, h.similarity))
        })
    }

    /// All entries in admission order.
    pub fn entries(&self) -> Vec<Arc<CacheEntry>> {
        let st = self.state.read();
        let mut v: Vec<_> = st.entries.values().cloned().collect();
        v.sort_by_key(|e| e.id);
        v
    }

    /// Drops every entry.
    pub fn clear(&self) {
        *self.state.write() = State::default();
    }
}

fn bypass(reason: BypassReason, started: Instant, intent: Duration, search: Duration) -> Decided {
    Decided {
        decision: Decision::Bypass(reason),
        candidate: None,
        intent: IntentResult::undefined(),
        key: None,
        latency: LatencyBreakdown::from_measured(intent, search, started.elapsed()),
    }
}

/// First slot role the plan needs that `slots` lack. Strategies without a
/// classifier have no slots to check, so they skip it.
fn missing_role(plan: &StructuredPlan, slots: &[Slot], classifies: bool) -> Option<String> {
    if !classifies {
        return None;
    }
    plan.required_slots()
        .iter()
        .find(|r| !slots.iter().any(|s| &s.role == *r))
        .cloned()
}
