//! Exact inner-product search over unit vectors, partitioned by intent.
//!
//! A flat scan: every stored vector of the searched partition is scored.
//! Results are sorted by similarity, ties broken by insertion order (oldest
//! first). The index counts vector comparisons so callers can measure how
//! much work category scoping saves.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, NORM_TOLERANCE};
use crate::error::{Error, Result};
use crate::intent::IntentCategory;

pub type EntryId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: EntryId,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalHit {
    pub category: IntentCategory,
    pub id: EntryId,
    pub similarity: f64,
}

#[derive(Debug, Default)]
struct Partition {
    ids: Vec<EntryId>,
    seqs: Vec<u64>,
    vectors: Vec<Embedding>,
    present: HashSet<EntryId>,
}

#[derive(Debug, Default)]
pub struct FlatIndex {
    dim: Option<usize>,
    partitions: BTreeMap<IntentCategory, Partition>,
    next_seq: u64,
    comparisons: AtomicU64,
}

struct Scored {
    seq: u64,
    id: EntryId,
    similarity: f64,
    category: usize,
}

fn rank(mut scored: Vec<Scored>, k: usize) -> Vec<Scored> {
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.seq.cmp(&b.seq)));
    scored.truncate(k);
    scored
}

impl FlatIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn insert(&mut self, category: &IntentCategory, id: EntryId, v: Embedding) -> Result<()> {
        if (v.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidVector(format!("norm {} is not 1", v.norm())));
        }
        match self.dim {
            Some(d) if d != v.dim() => {
                return Err(Error::InvalidVector(format!(
                    "dimension {} does not match index dimension {d}",
                    v.dim()
                )))
            }
            _ => self.dim = Some(v.dim()),
        }
        let part = self.partitions.entry(category.clone()).or_default();
        if !part.present.insert(id) {
            return Err(Error::DuplicateEntry(format!("id {id} already in {category}")));
        }
        part.ids.push(id);
        part.seqs.push(self.next_seq);
        part.vectors.push(v);
        self.next_seq += 1;
        Ok(())
    }

    fn check_query(&self, q: &Embedding) -> Result<()> {
        match self.dim {
            Some(d) if d != q.dim() => Err(Error::InvalidVector(format!(
                "query dimension {} does not match index dimension {d}",
                q.dim()
            ))),
            _ => Ok(()),
        }
    }

    fn score(&self, part: &Partition, q: &Embedding, category: usize, out: &mut Vec<Scored>) {
        for ((id, seq), v) in part.ids.iter().zip(&part.seqs).zip(&part.vectors) {
            out.push(Scored {
                seq: *seq,
                id: *id,
                similarity: q.dot(v),
                category,
            });
        }
        self.comparisons.fetch_add(part.ids.len() as u64, Ordering::Relaxed);
    }

    /// Top-`k` entries of one category. An unknown category yields no hits.
    pub fn search(&self, category: &IntentCategory, q: &Embedding, k: usize) -> Result<Vec<SearchHit>> {
        self.check_query(q)?;
        let Some(part) = self.partitions.get(category) else {
            return Ok(Vec::new());
        };
        let mut scored = Vec::with_capacity(part.ids.len());
        self.score(part, q, 0, &mut scored);
        Ok(rank(scored, k)
            .into_iter()
            .map(|s| SearchHit {
                id: s.id,
                similarity: s.similarity,
            })
            .collect())
    }

    /// Top-`k` entries across every category.
    pub fn search_all(&self, q: &Embedding, k: usize) -> Result<Vec<GlobalHit>> {
        self.check_query(q)?;
        let categories: Vec<&IntentCategory> = self.partitions.keys().collect();
        let mut scored = Vec::with_capacity(self.len());
        for (i, part) in self.partitions.values().enumerate() {
            self.score(part, q, i, &mut scored);
        }
        Ok(rank(scored, k)
            .into_iter()
            .map(|s| GlobalHit {
                category: categories[s.category].clone(),
                id: s.id,
                similarity: s.similarity,
            })
            .collect())
    }

    pub fn len(&self) -> usize {
        self.partitions.values().map(|p| p.ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn category_len(&self, category: &IntentCategory) -> usize {
        self.partitions.get(category).map_or(0, |p| p.ids.len())
    }

    pub fn categories(&self) -> impl Iterator<Item = &IntentCategory> {
        self.partitions.keys()
    }

    /// Total vector comparisons performed by searches so far.
    pub fn comparisons(&self) -> u64 {
        self.comparisons.load(Ordering::Relaxed)
    }

    pub fn reset_comparisons(&self) {
        self.comparisons.store(0, Ordering::Relaxed);
    }
}
