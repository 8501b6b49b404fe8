use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, IntentCategory, IntentResult, Slot};
use crate::error::{Error, Result};
use crate::text::canonicalize;

/// Rule pack schema (JSON).
///
/// ```json
/// {
///   "gazetteers": { "city": ["Hefei", "Beijing"], "time": ["tomorrow"] },
///   "intents": [{
///     "name": "BOOK",
///     "triggers": ["book", "reserve"],
///     "slots": [
///       { "role": "origin", "gazetteer": "city", "before": ["from"] },
///       { "role": "destination", "gazetteer": "city", "before": ["to"] },
///       { "role": "time", "gazetteer": "time", "absorb_before": ["for"] }
///     ]
///   }]
/// }
/// ```
///
/// Triggers and gazetteer entries match case-insensitively (ASCII) on word
/// boundaries. Slot patterns are tried in declaration order for each
/// gazetteer match; the first pattern whose anchors hold and whose role is
/// still free claims it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePack {
    pub gazetteers: BTreeMap<String, Vec<String>>,
    pub intents: Vec<IntentRule>,
    /// Results below this confidence become UNDEFINED. Off by default.
    #[serde(default)]
    pub min_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRule {
    pub name: String,
    pub triggers: Vec<String>,
    #[serde(default)]
    pub slots: Vec<SlotPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPattern {
    pub role: String,
    pub gazetteer: String,
    /// The word right before the value must be one of these.
    #[serde(default)]
    pub before: Vec<String>,
    /// The word right after the value must be one of these.
    #[serde(default)]
    pub after: Vec<String>,
    /// A preceding word from this list becomes part of the slot span.
    #[serde(default)]
    pub absorb_before: Vec<String>,
}

impl RulePack {
    pub fn from_json(json: &str) -> Result<Self> {
        let pack: RulePack =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("rule pack: {e}")))?;
        pack.check()?;
        Ok(pack)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for intent in &self.intents {
            let category = IntentCategory::new(&intent.name)
                .map_err(|e| Error::Config(format!("rule pack: {e}")))?;
            if category.is_undefined() {
                return Err(Error::Config("rule pack may not define UNDEFINED".into()));
            }
            if !seen.insert(intent.name.as_str()) {
                return Err(Error::Config(format!("duplicate intent {}", intent.name)));
            }
            if intent.triggers.iter().any(|t| t.trim().is_empty()) {
                return Err(Error::Config(format!("{}: empty trigger", intent.name)));
            }
            for p in &intent.slots {
                if !self.gazetteers.contains_key(&p.gazetteer) {
                    return Err(Error::Config(format!(
                        "{}: unknown gazetteer {:?}",
                        intent.name, p.gazetteer
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn intent(&self, name: &str) -> Option<&IntentRule> {
        self.intents.iter().find(|i| i.name == name)
    }
}

/// Reference classifier driven by a [`RulePack`].
#[derive(Debug, Clone)]
pub struct RuleClassifier {
    pack: RulePack,
    taxonomy: Vec<IntentCategory>,
    triggers: Vec<Vec<Vec<char>>>,
    gazetteers: BTreeMap<String, Vec<Vec<char>>>,
}

/// A gazetteer hit in the canonical text.
#[derive(Debug, Clone)]
struct Candidate {
    start: usize,
    end: usize,
    gazetteer: String,
}

fn fold(text: &str) -> Vec<char> {
    text.chars().map(|c| c.to_ascii_lowercase()).collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Start offsets of `needle` in `hay` on word boundaries.
fn find_all(hay: &[char], needle: &[char]) -> Vec<usize> {
    let mut out = Vec::new();
    if needle.is_empty() || needle.len() > hay.len() {
        return out;
    }
    for i in 0..=hay.len() - needle.len() {
        if hay[i..i + needle.len()] != *needle {
            continue;
        }
        let left_ok = i == 0 || !is_word_char(hay[i - 1]) || !is_word_char(needle[0]);
        let j = i + needle.len();
        let right_ok =
            j == hay.len() || !is_word_char(hay[j]) || !is_word_char(needle[needle.len() - 1]);
        if left_ok && right_ok {
            out.push(i);
        }
    }
    out
}

/// The word ending before `pos` and the offset where it starts, plus whether
/// only spaces separate it from `pos`.
fn word_before(chars: &[char], pos: usize) -> Option<(String, usize, bool)> {
    let mut i = pos;
    let mut only_space = true;
    while i > 0 && !is_word_char(chars[i - 1]) {
        if chars[i - 1] != ' ' {
            only_space = false;
        }
        i -= 1;
    }
    let end = i;
    while i > 0 && is_word_char(chars[i - 1]) {
        i -= 1;
    }
    (i < end).then(|| (chars[i..end].iter().collect(), i, only_space))
}

fn word_after(chars: &[char], pos: usize) -> Option<String> {
    let mut i = pos;
    while i < chars.len() && !is_word_char(chars[i]) {
        i += 1;
    }
    let start = i;
    while i < chars.len() && is_word_char(chars[i]) {
        i += 1;
    }
    (start < i).then(|| chars[start..i].iter().collect())
}

fn contains_word(list: &[String], word: &str) -> bool {
    list.iter().any(|w| w.eq_ignore_ascii_case(word))
}

impl RuleClassifier {
    pub fn new(pack: RulePack) -> Result<Self> {
        pack.check()?;
        let taxonomy = pack
            .intents
            .iter()
            .map(|i| IntentCategory::new(&i.name))
            .collect::<Result<Vec<_>>>()?;
        let triggers = pack
            .intents
            .iter()
            .map(|i| i.triggers.iter().map(|t| fold(&canonicalize(t))).collect())
            .collect();
        let gazetteers = pack
            .gazetteers
            .iter()
            .map(|(name, entries)| {
                let mut folded: Vec<Vec<char>> =
                    entries.iter().map(|e| fold(&canonicalize(e))).filter(|e| !e.is_empty()).collect();
                folded.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
                folded.dedup();
                (name.clone(), folded)
            })
            .collect();
        Ok(Self {
            pack,
            taxonomy,
            triggers,
            gazetteers,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(RulePack::load(path)?)
    }

    pub fn pack(&self) -> &RulePack {
        &self.pack
    }

    /// Gazetteer hits for the given gazetteers, resolved longest-first then
    /// leftmost, returned in document order.
    fn candidates(&self, folded: &[char], names: &[&str]) -> Vec<Candidate> {
        let mut all = Vec::new();
        for &name in names {
            let Some(entries) = self.gazetteers.get(name) else {
                continue;
            };
            for entry in entries {
                for start in find_all(folded, entry) {
                    all.push(Candidate {
                        start,
                        end: start + entry.len(),
                        gazetteer: name.to_string(),
                    });
                }
            }
        }
        all.sort_by(|a, b| {
            (b.end - b.start)
                .cmp(&(a.end - a.start))
                .then(a.start.cmp(&b.start))
        });
        let mut taken: Vec<Candidate> = Vec::new();
        for c in all {
            if taken.iter().all(|t| c.end <= t.start || c.start >= t.end) {
                taken.push(c);
            }
        }
        taken.sort_by_key(|c| c.start);
        taken
    }

    fn fill_slots(&self, rule: &IntentRule, canonical: &str) -> Vec<Slot> {
        let chars: Vec<char> = canonical.chars().collect();
        let folded = fold(canonical);
        let mut names: Vec<&str> = rule.slots.iter().map(|p| p.gazetteer.as_str()).collect();
        names.sort_unstable();
        names.dedup();

        let mut slots: Vec<Slot> = Vec::new();
        for cand in self.candidates(&folded, &names) {
            let before = word_before(&chars, cand.start);
            let after = word_after(&chars, cand.end);
            let pattern = rule.slots.iter().find(|p| {
                p.gazetteer == cand.gazetteer
                    && !slots.iter().any(|s| s.role == p.role)
                    && (p.before.is_empty()
                        || before.as_ref().is_some_and(|(w, _, _)| contains_word(&p.before, w)))
                    && (p.after.is_empty()
                        || after.as_deref().is_some_and(|w| contains_word(&p.after, w)))
            });
            let Some(pattern) = pattern else { continue };

            let mut start = cand.start;
            if let Some((word, word_start, true)) = &before {
                let free = slots.last().is_none_or(|s| s.end <= *word_start);
                if free && contains_word(&pattern.absorb_before, word) {
                    start = *word_start;
                }
            }
            slots.push(Slot {
                role: pattern.role.clone(),
                value: chars[start..cand.end].iter().collect(),
                start,
                end: cand.end,
            });
        }
        slots
    }
}

impl Classifier for RuleClassifier {
    fn classify(&self, text: &str) -> Result<IntentResult> {
        let canonical = canonicalize(text);
        if canonical.is_empty() {
            return Err(Error::InvalidInput("text is empty".into()));
        }
        let folded = fold(&canonical);

        let scores: Vec<usize> = self
            .triggers
            .iter()
            .map(|ts| ts.iter().filter(|t| !find_all(&folded, t).is_empty()).count())
            .collect();
        let total: usize = scores.iter().sum();
        // max score, earliest intent on ties
        let best = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
        let Some((idx, &score)) = best else {
            return Ok(IntentResult::undefined());
        };

        let confidence = score as f64 / total as f64;
        if self.pack.min_confidence.is_some_and(|tau| confidence < tau) {
            return Ok(IntentResult::undefined());
        }
        let rule = &self.pack.intents[idx];
        Ok(IntentResult {
            category: self.taxonomy[idx].clone(),
            slots: self.fill_slots(rule, &canonical),
            confidence,
        })
    }

    fn taxonomy(&self) -> Vec<IntentCategory> {
        self.taxonomy.clone()
    }
}
