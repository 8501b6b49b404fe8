use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{Admission, Decided, Decision, PlanCache};
use crate::error::{Error, Result};
use crate::index::EntryId;
use crate::intent::IntentResult;
use crate::metrics::LatencyBreakdown;
use crate::plan::{execute, inject_params, parse_plan, ExecutionTrace, StructuredPlan, ToolRegistry};
use crate::planner::Planner;

/// Everything that happened to one request.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub decided: Decided,
    /// The plan that was (or would be) executed.
    pub plan: Option<StructuredPlan>,
    /// Plan-generation latency, when the planner ran.
    pub planner_latency: Option<Duration>,
    /// Entry created or matched by admission.
    pub admitted: Option<EntryId>,
    pub trace: Option<ExecutionTrace>,
    /// Failure after the decision (planner, injection, execution).
    pub error: Option<String>,
    /// Reuse-mechanism overhead; admission time is counted in `other`.
    pub latency: LatencyBreakdown,
}

impl Outcome {
    pub fn response(&self) -> Option<&str> {
        self.trace.as_ref().map(|t| t.response.as_str())
    }
}

/// Decide, then reuse or generate, admit, and optionally execute.
pub struct ReusePipeline {
    cache: Arc<PlanCache>,
    planner: Arc<dyn Planner>,
    tools: Option<Arc<ToolRegistry>>,
}

impl ReusePipeline {
    pub fn new(cache: Arc<PlanCache>, planner: Arc<dyn Planner>) -> Self {
        Self {
            cache,
            planner,
            tools: None,
        }
    }

    /// Execute plans with these tools after deciding.
    pub fn with_tools(mut self, tools: Arc<ToolRegistry>) -> Self {
        self.tools = Some(tools);
        self
    }

    pub fn cache(&self) -> &Arc<PlanCache> {
        &self.cache
    }

    pub fn process(&self, request_id: &str, text: &str) -> Result<Outcome> {
        let decided = self.cache.decide(text)?;
        Ok(self.finish(request_id, text, decided))
    }

    /// As [`process`](Self::process) with a supplied classification.
    pub fn process_with_intent(&self, request_id: &str, text: &str, intent: IntentResult) -> Result<Outcome> {
        let decided = self.cache.decide_with_intent(text, intent)?;
        Ok(self.finish(request_id, text, decided))
    }

    fn finish(&self, request_id: &str, text: &str, decided: Decided) -> Outcome {
        let mut out = Outcome {
            latency: decided.latency,
            decided,
            plan: None,
            planner_latency: None,
            admitted: None,
            trace: None,
            error: None,
        };
        let result = match &out.decided.decision {
            Decision::Hit { entry, .. } => Ok(entry.plan.clone()),
            Decision::Miss(_) => self.generate(text, &mut out).and_then(|plan| {
                let t = Instant::now();
                let admitted = self.cache.admit(request_id, &out.decided, plan.clone());
                out.latency.add_other(t.elapsed());
                match admitted {
                    Ok(Admission::Stored(e)) | Ok(Admission::Covered(e)) => out.admitted = Some(e.id),
                    Err(e @ Error::CapacityReached(_)) => tracing::warn!(error = %e, "plan not cached"),
                    Err(e) => return Err(e),
                }
                Ok(plan)
            }),
            Decision::Bypass(_) => self.generate(text, &mut out),
        };
        let plan = match result {
            Ok(p) => p,
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        };
        out.plan = Some(plan.clone());

        let Some(tools) = &self.tools else { return out };
        let instantiated = match inject_params(&plan, &out.decided.intent.slots) {
            Ok(p) => Ok(p),
            // A cached plan whose parameters cannot be filled (strategies
            // without slot extraction) falls back to a fresh plan.
            Err(Error::MissingParameter(role)) if out.decided.decision.is_hit() => {
                tracing::debug!(role, "cached plan not injectable, regenerating");
                self.generate(text, &mut out).and_then(|p| {
                    out.plan = Some(p.clone());
                    inject_params(&p, &out.decided.intent.slots)
                })
            }
            Err(e) => Err(e),
        };
        match instantiated.and_then(|p| execute(&p, tools)) {
            Ok(trace) => out.trace = Some(trace),
            Err(e) => out.error = Some(e.to_string()),
        }
        out
    }

    fn generate(&self, text: &str, out: &mut Outcome) -> Result<StructuredPlan> {
        let generated = self.planner.generate_plan(text, &out.decided.intent)?;
        out.planner_latency = Some(generated.latency);
        parse_plan(&generated.plan_text)
            .map_err(|e| Error::PlannerBackend(format!("planner produced an invalid plan: {e}")))
    }
}
