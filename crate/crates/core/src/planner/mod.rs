//! Plan generation, standing in for the LLM.
//!
//! [`StubPlanner`] emits fixed dependency-annotated plans keyed by intent and
//! slot roles, and attaches an *accounted* generation latency (31.8 s by
//! default) instead of sleeping. [`RemotePlanner`] calls an HTTP service and
//! reports measured wall-clock time. [`PerturbedPlanner`] rewords plans at a
//! set rate to exercise the reuse-equivalence check.

mod perturbed;
mod remote;
mod stub;

pub use perturbed::PerturbedPlanner;
pub use remote::RemotePlanner;
pub use stub::{StubPlanner, BOOKING_PLAN};

use std::time::Duration;

use crate::error::Result;
use crate::intent::IntentResult;

/// Mean plan-generation latency observed for a GPT-4 backed agent.
pub const DEFAULT_PLAN_LATENCY: Duration = Duration::from_millis(31_800);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedPlan {
    pub plan_text: String,
    pub latency: Duration,
    /// `true` when `latency` is bookkeeping rather than measured time.
    pub accounted: bool,
}

pub trait Planner: Send + Sync {
    fn generate_plan(&self, request: &str, intent: &IntentResult) -> Result<GeneratedPlan>;
}

impl<P: Planner + ?Sized> Planner for std::sync::Arc<P> {
    fn generate_plan(&self, request: &str, intent: &IntentResult) -> Result<GeneratedPlan> {
        (**self).generate_plan(request, intent)
    }
}
