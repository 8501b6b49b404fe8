//! Effective reuse rate: does executing a reused plan give the same response
//! as executing a freshly generated one?

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intent::Classifier;
use crate::plan::{execute, inject_params, parse_plan, ToolRegistry};
use crate::plancache::{Decision, PlanCache, Strategy};
use crate::planner::Planner;
use crate::request::Request;
use crate::embedding::Embedder;

/// A probe request and an earlier request of the same family whose plan is
/// in the cache when the probe arrives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReusePair {
    pub seed: Request,
    pub probe: Request,
}

/// Picks up to `n` pairs from a labelled stream: for each family with at
/// least two requests, its first request seeds the cache and its second is
/// the probe. Families are taken round-robin across intents so the suite
/// mixes intents.
pub fn reuse_pairs(stream: &[Request], n: usize) -> Vec<ReusePair> {
    let mut by_family: Vec<(String, String, Vec<&Request>)> = Vec::new();
    for r in stream {
        let (Some(family), Some(intent)) = (&r.family, &r.intent) else { continue };
        if intent == "UNDEFINED" {
            continue;
        }
        match by_family.iter_mut().find(|(f, _, _)| f == family) {
            Some((_, _, v)) => v.push(r),
            None => by_family.push((family.clone(), intent.clone(), vec![r])),
        }
    }
    let candidates: Vec<_> = by_family.into_iter().filter(|(_, _, v)| v.len() >= 2).collect();
    let intents: BTreeSet<&str> = candidates.iter().map(|(_, i, _)| i.as_str()).collect();
    let mut queues: Vec<Vec<&(String, String, Vec<&Request>)>> = intents
        .iter()
        .map(|i| candidates.iter().filter(|(_, ci, _)| ci == i).collect())
        .collect();
    queues.iter_mut().for_each(|q| q.reverse());

    let mut out = Vec::new();
    while out.len() < n && queues.iter().any(|q| !q.is_empty()) {
        for q in queues.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some((_, _, reqs)) = q.pop() {
                out.push(ReusePair {
                    seed: reqs[0].clone(),
                    probe: reqs[1].clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub pair: usize,
    pub repetition: usize,
    pub probe_id: String,
    pub identical: bool,
    pub reused_response: Option<String>,
    pub fresh_response: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReuseReport {
    pub trials: usize,
    pub identical: usize,
    pub rate: f64,
    pub log: Vec<Trial>,
}

/// Runs each pair `repetitions` times. The cache is seeded with the plan
/// `reference` generates for the seed request; per trial the probe is
/// executed (a) through the cache hit and (b) through a fresh plan from
/// `planner`. Failures count as non-identical.
#[allow(clippy::too_many_arguments)]
pub fn measure_reuse_equivalence(
    pairs: &[ReusePair],
    repetitions: usize,
    embedder: Arc<dyn Embedder>,
    classifier: Arc<dyn Classifier>,
    reference: &dyn Planner,
    planner: &dyn Planner,
    tools: &ToolRegistry,
) -> Result<ReuseReport> {
    if pairs.is_empty() || repetitions == 0 {
        return Err(Error::EvaluationInput("no reuse trials to run".into()));
    }
    let cache = PlanCache::new(Strategy::default(), embedder, classifier);
    for pair in pairs {
        let d = cache.decide(&pair.seed.text)?;
        if let Decision::Miss(_) = d.decision {
            let plan = parse_plan(&reference.generate_plan(&pair.seed.text, &d.intent)?.plan_text)?;
            cache.admit(&pair.seed.id, &d, plan)?;
        }
    }

    let mut log = Vec::with_capacity(pairs.len() * repetitions);
    for repetition in 0..repetitions {
        for (i, pair) in pairs.iter().enumerate() {
            let mut trial = Trial {
                pair: i,
                repetition,
                probe_id: pair.probe.id.clone(),
                identical: false,
                reused_response: None,
                fresh_response: None,
                error: None,
            };
            match run_trial(&cache, planner, tools, &pair.probe) {
                Ok((reused, fresh)) => {
                    trial.identical = reused == fresh;
                    trial.reused_response = Some(reused);
                    trial.fresh_response = Some(fresh);
                }
                Err(e) => {
                    tracing::warn!(probe = %pair.probe.id, error = %e, "reuse trial failed");
                    trial.error = Some(e.to_string());
                }
            }
            log.push(trial);
        }
    }
    let identical = log.iter().filter(|t| t.identical).count();
    Ok(ReuseReport {
        trials: log.len(),
        identical,
        rate: identical as f64 / log.len() as f64,
        log,
    })
}

fn run_trial(cache: &PlanCache, planner: &dyn Planner, tools: &ToolRegistry, probe: &Request) -> Result<(String, String)> {
    let d = cache.decide(&probe.text)?;
    let Decision::Hit { entry, params, .. } = &d.decision else {
        return Err(Error::EvaluationInput(format!(
            "probe {} did not hit the cache ({})",
            probe.id,
            d.decision.reason().unwrap_or_default()
        )));
    };
    let reused = execute(&inject_params(&entry.plan, params)?, tools)?.response;
    let fresh_plan = parse_plan(&planner.generate_plan(&probe.text, &d.intent)?.plan_text)?;
    let fresh = execute(&inject_params(&fresh_plan, &d.intent.slots)?, tools)?.response;
    Ok((reused, fresh))
}
