use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{validate_slots, Classifier, IntentCategory, IntentResult, Slot};
use crate::error::{Error, Result};
use crate::text::canonicalize;

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    category: String,
    #[serde(default)]
    slots: Vec<Slot>,
    confidence: f64,
}

/// Client for an HTTP intent classifier.
///
/// Protocol: `POST {"text": ...}` answered by
/// `{"category", "slots": [{"role","value","start","end"}], "confidence"}`.
/// Responses are validated; categories outside the configured taxonomy and
/// malformed spans are backend errors.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    url: String,
    taxonomy: Vec<IntentCategory>,
    agent: ureq::Agent,
}

impl RemoteClassifier {
    pub fn new(url: impl Into<String>, taxonomy: Vec<IntentCategory>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            taxonomy,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Classifier for RemoteClassifier {
    fn classify(&self, text: &str) -> Result<IntentResult> {
        let canonical = canonicalize(text);
        if canonical.is_empty() {
            return Err(Error::InvalidInput("text is empty".into()));
        }
        let body: ClassifyResponse = self
            .agent
            .post(&self.url)
            .send_json(ClassifyRequest { text: &canonical })
            .map_err(|e| Error::ClassifierBackend(e.to_string()))?
            .into_json()
            .map_err(|e| Error::ClassifierBackend(format!("malformed response: {e}")))?;

        let category = IntentCategory::new(&body.category)
            .map_err(|e| Error::ClassifierBackend(e.to_string()))?;
        if !category.is_undefined() && !self.taxonomy.contains(&category) {
            return Err(Error::ClassifierBackend(format!(
                "category {category} is not in the configured taxonomy"
            )));
        }
        if !(0.0..=1.0).contains(&body.confidence) {
            return Err(Error::ClassifierBackend(format!(
                "confidence {} outside [0, 1]",
                body.confidence
            )));
        }
        if category.is_undefined() {
            return Ok(IntentResult {
                confidence: body.confidence,
                ..IntentResult::undefined()
            });
        }
        let mut slots = body.slots;
        validate_slots(&canonical, &slots).map_err(|e| Error::ClassifierBackend(e.to_string()))?;
        slots.sort_by_key(|s| s.start);
        Ok(IntentResult {
            category,
            slots,
            confidence: body.confidence,
        })
    }

    fn taxonomy(&self) -> Vec<IntentCategory> {
        self.taxonomy.clone()
    }
}
