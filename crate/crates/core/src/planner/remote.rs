use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{GeneratedPlan, Planner};
use crate::error::{Error, Result};
use crate::intent::{IntentResult, Slot};

#[derive(Serialize)]
struct PlanRequest<'a> {
    request: &'a str,
    intent: &'a str,
    slots: &'a [Slot],
    #[serde(skip_serializing_if = "Option::is_none")]
    prompt: Option<&'a str>,
}

#[derive(Deserialize)]
struct PlanResponse {
    plan_text: String,
}

/// Client for an HTTP plan generator.
///
/// Protocol: `POST {"request", "intent", "slots"}` answered by
/// `{"plan_text"}`. When a prompt template is configured it is sent along as
/// `"prompt"`. Latency is measured wall-clock time.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    url: String,
    prompt: Option<String>,
    agent: ureq::Agent,
}

impl RemotePlanner {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            prompt: None,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt = Some(prompt.into());
        self
    }
}

impl Planner for RemotePlanner {
    fn generate_plan(&self, request: &str, intent: &IntentResult) -> Result<GeneratedPlan> {
        if request.trim().is_empty() {
            return Err(Error::InvalidInput("request is empty".into()));
        }
        let started = Instant::now();
        let body: PlanResponse = self
            .agent
            .post(&self.url)
            .send_json(PlanRequest {
                request,
                intent: intent.category.as_str(),
                slots: &intent.slots,
                prompt: self.prompt.as_deref(),
            })
            .map_err(|e| Error::PlannerBackend(e.to_string()))?
            .into_json()
            .map_err(|e| Error::PlannerBackend(format!("malformed response: {e}")))?;
        Ok(GeneratedPlan {
            plan_text: body.plan_text,
            latency: started.elapsed(),
            accounted: false,
        })
    }
}
