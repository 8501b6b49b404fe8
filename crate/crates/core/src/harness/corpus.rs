//! Synthetic labelled corpora and the JSONL corpus format.
//!
//! A template file lists request *families*. Each family spec has variant
//! groups (`<0>`, `<1>`, ... in a form) and one or more forms, i.e. word
//! orders. Every combination of variants is a separate family; the forms of
//! a family are paraphrases of one another and share its plan. Slots are
//! written `{role:gazetteer}`.
//!
//! Labels follow one rule: a request is reusable iff an earlier request of
//! the same family occurs in the stream. Chit-chat requests (intent
//! `UNDEFINED`) each form their own family and are never reusable.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::Slot;
use crate::request::Request;
use crate::text::{canonicalize, char_slice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    /// Values per gazetteer.
    pub values: BTreeMap<String, Vec<String>>,
    /// Per gazetteer: a directly preceding word from this list belongs to
    /// the slot span (mirrors the rule pack's `absorb_before`).
    #[serde(default)]
    pub absorb_before: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub undefined_rate: f64,
    #[serde(default = "one")]
    pub zipf_exponent: f64,
    #[serde(default)]
    pub chit_chat: ChitChat,
    pub families: Vec<FamilySpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChitChat {
    pub openers: Vec<String>,
    pub bodies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub intent: String,
    #[serde(default)]
    pub variants: Vec<Vec<String>>,
    pub forms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Variant(usize),
    Slot { role: String, gazetteer: String },
}

fn parse_form(form: &str) -> Result<Vec<Piece>> {
    let bad = |msg: String| Error::Corpus(format!("form {form:?}: {msg}"));
    let mut pieces = Vec::new();
    let mut rest = form;
    while !rest.is_empty() {
        let next = rest.find(['<', '{']).unwrap_or(rest.len());
        if next > 0 {
            pieces.push(Piece::Text(rest[..next].to_string()));
            rest = &rest[next..];
            continue;
        }
        let (close, is_slot) = if rest.starts_with('<') { ('>', false) } else { ('}', true) };
        let end = rest.find(close).ok_or_else(|| bad(format!("unclosed {}", &rest[..1])))?;
        let inner = &rest[1..end];
        if is_slot {
            let (role, gazetteer) = inner.split_once(':').ok_or_else(|| bad(format!("slot {inner:?} lacks :gazetteer")))?;
            pieces.push(Piece::Slot {
                role: role.to_string(),
                gazetteer: gazetteer.to_string(),
            });
        } else {
            let n = inner.parse().map_err(|_| bad(format!("bad variant reference <{inner}>")))?;
            pieces.push(Piece::Variant(n));
        }
        rest = &rest[end + 1..];
    }
    Ok(pieces)
}

/// A concrete family: one combination of variants.
#[derive(Debug, Clone)]
struct Family {
    id: String,
    intent: String,
    choice: Vec<String>,
    forms: Vec<Vec<Piece>>,
}

impl TemplateSet {
    pub fn from_json(json: &str) -> Result<Self> {
        let set: TemplateSet = serde_json::from_str(json).map_err(|e| Error::Corpus(format!("template file: {e}")))?;
        set.families()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    fn families(&self) -> Result<Vec<Family>> {
        if !(0.0..1.0).contains(&self.undefined_rate) {
            return Err(Error::Corpus("undefined_rate must be in [0, 1)".into()));
        }
        if self.undefined_rate > 0.0 && (self.chit_chat.openers.is_empty() || self.chit_chat.bodies.is_empty()) {
            return Err(Error::Corpus("undefined_rate > 0 needs chit_chat openers and bodies".into()));
        }
        let mut out = Vec::new();
        for (k, spec) in self.families.iter().enumerate() {
            crate::intent::IntentCategory::new(&spec.intent).map_err(|e| Error::Corpus(e.to_string()))?;
            if spec.forms.is_empty() {
                return Err(Error::Corpus(format!("family {k} has no forms")));
            }
            let forms = spec.forms.iter().map(|f| parse_form(f)).collect::<Result<Vec<_>>>()?;
            for pieces in &forms {
                for p in pieces {
                    match p {
                        Piece::Variant(n) if *n >= spec.variants.len() => {
                            return Err(Error::Corpus(format!("family {k}: variant <{n}> undefined")))
                        }
                        Piece::Slot { gazetteer, .. } if self.values.get(gazetteer).is_none_or(|v| v.is_empty()) => {
                            return Err(Error::Corpus(format!("family {k}: no values for gazetteer {gazetteer:?}")))
                        }
                        _ => {}
                    }
                }
            }
            let mut combos: Vec<Vec<usize>> = vec![vec![]];
            for group in &spec.variants {
                if group.is_empty() {
                    return Err(Error::Corpus(format!("family {k} has an empty variant group")));
                }
                combos = combos
                    .into_iter()
                    .flat_map(|c| (0..group.len()).map(move |i| [c.clone(), vec![i]].concat()))
                    .collect();
            }
            for combo in combos {
                let suffix: Vec<String> = combo.iter().map(usize::to_string).collect();
                out.push(Family {
                    id: format!("{}/{k}/{}", spec.intent, if suffix.is_empty() { "-".into() } else { suffix.join(".") }),
                    intent: spec.intent.clone(),
                    choice: combo.iter().zip(&spec.variants).map(|(i, g)| g[*i].clone()).collect(),
                    forms: forms.clone(),
                });
            }
        }
        if out.is_empty() {
            return Err(Error::Corpus("template file defines no families".into()));
        }
        Ok(out)
    }

    /// Number of concrete families.
    pub fn family_count(&self) -> Result<usize> {
        Ok(self.families()?.len())
    }

    /// Generates `size` labelled requests; identical for identical seeds.
    pub fn generate(&self, size: usize, seed: u64) -> Result<Vec<Request>> {
        let families = self.families()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rank: Vec<usize> = (0..families.len()).collect();
        rank.shuffle(&mut rng);
        let mut weights = vec![0.0; families.len()];
        for (r, &f) in rank.iter().enumerate() {
            weights[f] = 1.0 / ((r + 1) as f64).powf(self.zipf_exponent);
        }
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::Corpus(e.to_string()))?;

        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(size);
        for i in 0..size {
            let id = format!("r{i:04}");
            if rng.random::<f64>() < self.undefined_rate {
                let opener = self.chit_chat.openers.choose(&mut rng).expect("checked non-empty");
                let body = self.chit_chat.bodies.choose(&mut rng).expect("checked non-empty");
                out.push(Request {
                    id,
                    text: capitalize(&format!("{opener}, {body}")),
                    intent: Some("UNDEFINED".into()),
                    slots: Some(vec![]),
                    family: Some(format!("undefined/{i}")),
                    reusable: Some(false),
                });
                continue;
            }
            let family = &families[pick.sample(&mut rng)];
            let form = family.forms.choose(&mut rng).expect("checked non-empty");
            let (text, slots) = self.render(family, form, &mut rng);
            out.push(Request {
                id,
                text,
                intent: Some(family.intent.clone()),
                slots: Some(slots),
                family: Some(family.id.clone()),
                reusable: Some(!seen.insert(family.id.clone())),
            });
        }
        check_corpus(&out)?;
        Ok(out)
    }

    fn render(&self, family: &Family, form: &[Piece], rng: &mut ChaCha8Rng) -> (String, Vec<Slot>) {
        let mut text = String::new();
        let mut spans: Vec<(String, usize, usize)> = Vec::new();
        let mut used: HashSet<&str> = HashSet::new();
        for piece in form {
            match piece {
                Piece::Text(t) => text.push_str(t),
                Piece::Variant(n) => text.push_str(&family.choice[*n]),
                Piece::Slot { role, gazetteer } => {
                    let pool = &self.values[gazetteer];
                    let value = loop {
                        let v = pool.choose(rng).expect("checked non-empty");
                        if !used.contains(v.as_str()) || pool.len() <= used.len() {
                            break v;
                        }
                    };
                    used.insert(value);
                    let mut start = text.chars().count();
                    if let Some(words) = self.absorb_before.get(gazetteer) {
                        start = absorbed_start(&text, start, words);
                    }
                    text.push_str(value);
                    spans.push((role.clone(), start, text.chars().count()));
                }
            }
        }
        let text = capitalize(&text);
        let slots = spans
            .into_iter()
            .map(|(role, s, e)| {
                let value = char_slice(&text, s, e).expect("span within text").to_string();
                Slot::new(role, value, s, e)
            })
            .collect();
        (text, slots)
    }
}

/// Start of the word directly before char offset `at` when it is one of
/// `words` (case-insensitive), otherwise `at`.
fn absorbed_start(text: &str, at: usize, words: &[String]) -> usize {
    let chars: Vec<char> = text.chars().collect();
    if at == 0 || chars[at - 1] != ' ' {
        return at;
    }
    let end = at - 1;
    let mut start = end;
    while start > 0 && chars[start - 1].is_alphanumeric() {
        start -= 1;
    }
    let word: String = chars[start..end].iter().collect();
    if start < end && words.iter().any(|w| w.eq_ignore_ascii_case(&word)) {
        start
    } else {
        at
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Verifies ids are unique, texts canonical, spans consistent and labels
/// follow the family rule.
pub fn check_corpus(requests: &[Request]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut families = HashSet::new();
    for r in requests {
        let fail = |msg: String| Err(Error::Corpus(format!("request {}: {msg}", r.id)));
        if !ids.insert(r.id.as_str()) {
            return fail("duplicate id".into());
        }
        if canonicalize(&r.text) != r.text {
            return fail("text is not canonical".into());
        }
        if let Some(slots) = &r.slots {
            crate::intent::validate_slots(&r.text, slots).map_err(|e| Error::Corpus(format!("request {}: {e}", r.id)))?;
            for s in slots {
                if char_slice(&r.text, s.start, s.end) != Some(s.value.as_str()) {
                    return fail(format!("slot {} value does not match its span", s.role));
                }
            }
        }
        if let (Some(family), Some(label)) = (&r.family, r.reusable) {
            let expected = !families.insert(family.as_str());
            if label != expected {
                return fail(format!("reusable={label} but family rule gives {expected}"));
            }
        }
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<Request>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Corpus(format!("line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Request = serde_json::from_str(&line).map_err(|e| Error::Corpus(format!("line {}: {e}", n + 1)))?;
        out.push(r);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Request>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))?;
    let corpus = read_corpus(std::io::BufReader::new(file))?;
    check_corpus(&corpus)?;
    Ok(corpus)
}

pub fn write_corpus<W: Write>(requests: &[Request], mut out: W) -> Result<()> {
    for r in requests {
        let line = serde_json::to_string(r).map_err(|e| Error::Corpus(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::Corpus(e.to_string()))?;
    }
    Ok(())
}
