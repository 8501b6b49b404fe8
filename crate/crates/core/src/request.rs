use serde::{Deserialize, Serialize};

use crate::intent::Slot;

/// A user task utterance, optionally carrying evaluation labels.
///
/// This is also the record type of the JSONL corpus format:
/// `{"id", "text", "intent", "slots": [{role, value, start, end}], "family", "reusable"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub text: String,
    /// Gold intent category.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    /// Gold slots, spans into the canonical text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<Slot>>,
    /// Template family: requests of one family share a plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Whether an earlier request's plan can factually be reused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reusable: Option<bool>,
}

impl Request {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            intent: None,
            slots: None,
            family: None,
            reusable: None,
        }
    }
}
