//! Joint intent classification and slot filling.
//!
//! A [`Classifier`] maps request text to an [`IntentResult`]: one category
//! from a configured taxonomy (or [`IntentCategory::UNDEFINED`]) plus the key
//! parameters found in the text. Slot spans are character offsets into the
//! canonicalized request.

mod remote;
mod rules;

pub use remote::RemoteClassifier;
pub use rules::{IntentRule, RuleClassifier, RulePack, SlotPattern};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{char_len, char_slice};

/// Intent category token, e.g. `BOOK` or `QUERY`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IntentCategory(String);

impl IntentCategory {
    pub const UNDEFINED_NAME: &'static str = "UNDEFINED";
    pub const UNDEFINED: IntentCategory = IntentCategory(String::new());

    /// Parses a category name; must be non-empty uppercase ASCII
    /// (digits and `_` allowed).
    pub fn new(name: &str) -> Result<Self> {
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err(Error::InvalidInput(format!("invalid intent category {name:?}")));
        }
        if name == Self::UNDEFINED_NAME {
            return Ok(Self::UNDEFINED);
        }
        Ok(Self(name.to_string()))
    }

    pub fn undefined() -> Self {
        Self::UNDEFINED
    }

    pub fn is_undefined(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_str(&self) -> &str {
        if self.is_undefined() {
            Self::UNDEFINED_NAME
        } else {
            &self.0
        }
    }
}

impl TryFrom<String> for IntentCategory {
    type Error = Error;

    fn try_from(name: String) -> Result<Self> {
        IntentCategory::new(&name)
    }
}

impl From<IntentCategory> for String {
    fn from(c: IntentCategory) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for IntentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A key parameter with its character span in the canonical text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub role: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

impl Slot {
    pub fn new(role: impl Into<String>, value: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            role: role.into(),
            value: value.into(),
            start,
            end,
        }
    }
}

/// Checks span bounds, value faithfulness and pairwise non-overlap.
pub fn validate_slots(text: &str, slots: &[Slot]) -> Result<()> {
    let len = char_len(text);
    for s in slots {
        if s.start >= s.end || s.end > len {
            return Err(Error::InvalidSlots(format!(
                "span [{}, {}) of {:?} out of bounds for length {len}",
                s.start, s.end, s.role
            )));
        }
        if char_slice(text, s.start, s.end) != Some(s.value.as_str()) {
            return Err(Error::InvalidSlots(format!(
                "span [{}, {}) does not spell {:?}",
                s.start, s.end, s.value
            )));
        }
    }
    let mut spans: Vec<(usize, usize)> = slots.iter().map(|s| (s.start, s.end)).collect();
    spans.sort_unstable();
    if spans.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::InvalidSlots("overlapping slot spans".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResult {
    pub category: IntentCategory,
    /// Document order.
    pub slots: Vec<Slot>,
    pub confidence: f64,
}

impl IntentResult {
    pub fn undefined() -> Self {
        Self {
            category: IntentCategory::UNDEFINED,
            slots: Vec::new(),
            confidence: 0.0,
        }
    }

    pub fn slot(&self, role: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.role == role)
    }
}

/// Classifies a request into an intent and extracts its key parameters.
pub trait Classifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<IntentResult>;

    /// Configured categories, excluding UNDEFINED.
    fn taxonomy(&self) -> Vec<IntentCategory>;
}

/// Stable hash of a taxonomy, recorded in cache snapshots.
pub fn taxonomy_hash(taxonomy: &[IntentCategory]) -> String {
    let mut names: Vec<&str> = taxonomy.iter().map(IntentCategory::as_str).collect();
    names.sort_unstable();
    format!("{:016x}", crate::text::fnv1a64(0, names.join(",").as_bytes()))
}
