//! Replays a labelled request stream through a cache and scores it.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use super::{Cell, ConfusionCounts, LatencyBreakdown, Scores};
use crate::embedding::{Embedder, PcaModel};
use crate::error::{Error, Result};
use crate::intent::{Classifier, IntentCategory, IntentResult};
use crate::plan::parse_plan;
use crate::plancache::{Decided, Decision, PlanCache, Strategy, StrategyKind};
use crate::planner::Planner;
use crate::request::Request;
use crate::template::TemplateMode;
use crate::text::canonicalize;

/// Pluggable backends shared by every evaluation run.
#[derive(Clone)]
pub struct Backends {
    pub embedder: Arc<dyn Embedder>,
    pub classifier: Arc<dyn Classifier>,
    pub planner: Arc<dyn Planner>,
}

/// One line of the per-request log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub request_id: String,
    pub strategy: String,
    pub gamma: f64,
    pub decision: String,
    pub similarity: Option<f64>,
    pub label: bool,
    pub tp_fp_tn_fn: Cell,
    pub latency_intent_us: u64,
    pub latency_search_us: u64,
    pub latency_other_us: u64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub strategy: StrategyKind,
    pub gamma: f64,
    pub counts: ConfusionCounts,
    pub scores: Scores,
    /// Vector comparisons performed by the index over the whole replay.
    pub comparisons: u64,
    pub rows: Vec<LogRow>,
}

/// One row of the summary CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub gamma: f64,
    pub requests: u64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub comparisons: u64,
    pub mean_intent_us: f64,
    pub mean_search_us: f64,
    pub mean_other_us: f64,
}

impl EvalReport {
    pub fn hit_ids(&self) -> BTreeSet<&str> {
        self.rows
            .iter()
            .filter(|r| r.decision == "hit")
            .map(|r| r.request_id.as_str())
            .collect()
    }

    pub fn summary(&self) -> SummaryRow {
        let n = self.rows.len().max(1) as f64;
        let mean = |f: fn(&LogRow) -> u64| self.rows.iter().map(|r| f(r) as f64).sum::<f64>() / n;
        SummaryRow {
            strategy: self.strategy.to_string(),
            gamma: self.gamma,
            requests: self.counts.total(),
            tp: self.counts.tp,
            fp: self.counts.fp,
            tn: self.counts.tn,
            fn_: self.counts.fn_,
            precision: self.scores.precision,
            recall: self.scores.recall,
            f1: self.scores.f_beta,
            accuracy: self.scores.accuracy,
            comparisons: self.comparisons,
            mean_intent_us: mean(|r| r.latency_intent_us),
            mean_search_us: mean(|r| r.latency_search_us),
            mean_other_us: mean(|r| r.latency_other_us),
        }
    }
}

pub fn write_log_csv<W: Write>(rows: &[LogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Gold classification carried by a corpus record.
pub fn gold_intent(request: &Request) -> Result<IntentResult> {
    let name = request
        .intent
        .as_deref()
        .ok_or_else(|| Error::EvaluationInput(format!("request {} has no gold intent", request.id)))?;
    let category = IntentCategory::new(name)
        .map_err(|e| Error::EvaluationInput(format!("request {}: {e}", request.id)))?;
    Ok(IntentResult {
        category,
        slots: request.slots.clone().unwrap_or_default(),
        confidence: 1.0,
    })
}

/// Replays streams in order, single-threaded, one fresh cache per run.
#[derive(Clone)]
pub struct Evaluator {
    backends: Backends,
    gold_slots: bool,
    template_mode: TemplateMode,
}

impl Evaluator {
    pub fn new(backends: Backends) -> Self {
        Self {
            backends,
            gold_slots: false,
            template_mode: TemplateMode::Delete,
        }
    }

    /// Use the corpus' gold intents and slots instead of the classifier.
    pub fn with_gold_slots(mut self, on: bool) -> Self {
        self.gold_slots = on;
        self
    }

    pub fn with_template_mode(mut self, mode: TemplateMode) -> Self {
        self.template_mode = mode;
        self
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    /// Fits the MEANCACHE projection on the stream's raw request embeddings.
    pub fn fit_pca(&self, stream: &[Request], dims: usize) -> Result<PcaModel> {
        let texts: Vec<String> = stream.iter().map(|r| canonicalize(&r.text)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = self.backends.embedder.embed_batch(&refs)?;
        let d_out = dims.min(vectors.len()).min(self.backends.embedder.dim());
        if d_out < dims {
            tracing::warn!(dims, d_out, "corpus too small for requested PCA dimension");
        }
        crate::embedding::pca_fit(&vectors, d_out)
    }

    pub fn build_cache(&self, stream: &[Request], strategy: Strategy) -> Result<PlanCache> {
        let cache = PlanCache::new(strategy, self.backends.embedder.clone(), self.backends.classifier.clone())
            .with_template_mode(self.template_mode);
        if strategy.kind == StrategyKind::MeanCache {
            cache.with_pca(self.fit_pca(stream, strategy.pca_dims)?)
        } else {
            Ok(cache)
        }
    }

    fn check_labels(&self, stream: &[Request]) -> Result<()> {
        for r in stream {
            if r.reusable.is_none() {
                return Err(Error::EvaluationInput(format!("request {} has no reusability label", r.id)));
            }
            if self.gold_slots {
                gold_intent(r)?;
            }
        }
        Ok(())
    }

    /// Decides one request and admits a generated plan on a miss.
    pub fn step(&self, cache: &PlanCache, request: &Request) -> Result<Decided> {
        let mut decided = if self.gold_slots {
            cache.decide_with_intent(&request.text, gold_intent(request)?)?
        } else {
            cache.decide(&request.text)?
        };
        if let Decision::Miss(_) = decided.decision {
            let generated = self.backends.planner.generate_plan(&request.text, &decided.intent)?;
            let plan = parse_plan(&generated.plan_text)
                .map_err(|e| Error::PlannerBackend(format!("planner produced an invalid plan: {e}")))?;
            let t = std::time::Instant::now();
            match cache.admit(&request.id, &decided, plan) {
                Ok(_) | Err(Error::CapacityReached(_)) => {}
                Err(e) => return Err(e),
            }
            decided.latency.add_other(t.elapsed());
        }
        Ok(decided)
    }

    /// Feeds unlabelled requests through `cache`, admitting on misses.
    pub fn warm(&self, cache: &PlanCache, stream: &[Request]) -> Result<Vec<Decided>> {
        stream.iter().map(|r| self.step(cache, r)).collect()
    }

    pub fn run(&self, stream: &[Request], strategy: Strategy) -> Result<EvalReport> {
        self.check_labels(stream)?;
        let cache = self.build_cache(stream, strategy)?;
        self.replay(&cache, stream)
    }

    /// Replays `stream` against an existing (possibly warm) cache.
    pub fn replay(&self, cache: &PlanCache, stream: &[Request]) -> Result<EvalReport> {
        self.check_labels(stream)?;
        let strategy = cache.strategy();
        let before = cache.stats().comparisons;
        let mut counts = ConfusionCounts::default();
        let mut rows = Vec::with_capacity(stream.len());
        for request in stream {
            let decided = self.step(cache, request)?;
            let label = request.reusable.expect("checked above");
            let cell = Cell::classify(decided.decision.is_hit(), label);
            counts.record(cell);
            rows.push(log_row(request, strategy, &decided, label, cell));
        }
        Ok(EvalReport {
            strategy: strategy.kind,
            gamma: strategy.gamma,
            scores: counts.scores(),
            counts,
            comparisons: cache.stats().comparisons - before,
            rows,
        })
    }

    /// Threshold sweep over a single replay.
    ///
    /// The cache evolves exactly as in [`run`](Self::run) at
    /// `reference_gamma`; for every request, the one nearest-neighbour search
    /// is then judged against each threshold in `gammas`. Because every
    /// threshold sees the same cache state, hit sets are nested by
    /// construction, and the report for `reference_gamma` equals a plain run.
    pub fn sweep(
        &self,
        stream: &[Request],
        kind: StrategyKind,
        gammas: &[f64],
        reference_gamma: f64,
    ) -> Result<Vec<EvalReport>> {
        self.check_labels(stream)?;
        let reference = Strategy::new(kind, reference_gamma)?;
        for &g in gammas {
            Strategy::new(kind, g)?;
        }
        let cache = self.build_cache(stream, reference)?;
        let mut reports: Vec<EvalReport> = gammas
            .iter()
            .map(|&gamma| EvalReport {
                strategy: kind,
                gamma,
                counts: ConfusionCounts::default(),
                scores: ConfusionCounts::default().scores(),
                comparisons: 0,
                rows: Vec::with_capacity(stream.len()),
            })
            .collect();
        for request in stream {
            let decided = self.step(&cache, request)?;
            let label = request.reusable.expect("checked above");
            for report in &mut reports {
                let hit = decided.hit_at(report.gamma);
                let cell = Cell::classify(hit, label);
                report.counts.record(cell);
                let mut row = log_row(request, Strategy { gamma: report.gamma, ..reference }, &decided, label, cell);
                row.decision = match &decided.decision {
                    Decision::Bypass(_) => "bypass",
                    _ if hit => "hit",
                    _ => "miss",
                }
                .to_string();
                row.similarity = decided.candidate.as_ref().map(|c| c.similarity);
                report.rows.push(row);
            }
        }
        let comparisons = cache.stats().comparisons;
        for report in &mut reports {
            report.scores = report.counts.scores();
            report.comparisons = comparisons;
        }
        Ok(reports)
    }

    /// One independent replay per threshold, each with a fresh cache. Cache
    /// contents then differ between thresholds, so hit sets need not nest.
    pub fn sweep_independent(&self, stream: &[Request], kind: StrategyKind, gammas: &[f64]) -> Result<Vec<EvalReport>> {
        gammas
            .iter()
            .map(|&g| self.run(stream, Strategy::new(kind, g)?))
            .collect()
    }
}

fn micros(d: Duration) -> u64 {
    d.as_micros() as u64
}

fn log_row(request: &Request, strategy: Strategy, decided: &Decided, label: bool, cell: Cell) -> LogRow {
    LogRow {
        request_id: request.id.clone(),
        strategy: strategy.kind.to_string(),
        gamma: strategy.gamma,
        decision: decided.decision.label().to_string(),
        similarity: decided.decision.similarity(),
        label,
        tp_fp_tn_fn: cell,
        latency_intent_us: micros(decided.latency.intent_classification),
        latency_search_us: micros(decided.latency.similarity_search),
        latency_other_us: micros(decided.latency.other),
    }
}

/// Requests that hit at a higher threshold but not at a lower one. Empty
/// when hit sets shrink monotonically as γ grows.
pub fn nesting_violations(reports: &[EvalReport]) -> Vec<(f64, String)> {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let mut out = Vec::new();
    for w in sorted.windows(2) {
        let lower = w[0].hit_ids();
        for id in w[1].hit_ids() {
            if !lower.contains(id) {
                out.push((w[1].gamma, id.to_string()));
            }
        }
    }
    out
}

/// Mean breakdown over a set of measurements.
pub fn mean_latency(samples: &[LatencyBreakdown]) -> LatencyBreakdown {
    if samples.is_empty() {
        return LatencyBreakdown::default();
    }
    let n = samples.len() as u32;
    let sum = |f: fn(&LatencyBreakdown) -> Duration| samples.iter().map(f).sum::<Duration>() / n;
    let intent = sum(|l| l.intent_classification);
    let search = sum(|l| l.similarity_search);
    let other = sum(|l| l.other);
    LatencyBreakdown {
        intent_classification: intent,
        similarity_search: search,
        other,
        total: intent + search + other,
    }
}
