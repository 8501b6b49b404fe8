//! JSON snapshots of a cache's contents.
//!
//! The header pins what makes stored vectors comparable: embedder
//! fingerprint, dimension, key kind and taxonomy. Loading under a different
//! configuration fails with `IncompatibleSnapshot` instead of silently
//! returning garbage similarities.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CacheEntry, KeyKind, PlanCache, State};
use crate::embedding::PcaModel;
use crate::error::{Error, Result};
use crate::index::EntryId;
use crate::intent::taxonomy_hash;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    embedder: String,
    dim: usize,
    key_kind: KeyKind,
    taxonomy_hash: String,
}

#[derive(Serialize, Deserialize)]
struct PcaParts {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    header: Header,
    #[serde(default)]
    pca: Option<PcaParts>,
    next_id: EntryId,
    entries: Vec<CacheEntry>,
}

impl PlanCache {
    fn header(&self) -> Header {
        let dim = match (&self.pca, self.strategy.kind.key_kind()) {
            (Some(p), KeyKind::RawPca) => p.d_out(),
            _ => self.embedder.dim(),
        };
        Header {
            format_version: SNAPSHOT_FORMAT_VERSION,
            embedder: self.embedder.fingerprint(),
            dim,
            key_kind: self.strategy.kind.key_kind(),
            taxonomy_hash: taxonomy_hash(&self.classifier.taxonomy()),
        }
    }

    pub fn snapshot_json(&self) -> Result<String> {
        let st = self.state.read();
        let mut entries: Vec<CacheEntry> = st.entries.values().map(|e| (**e).clone()).collect();
        entries.sort_by_key(|e| e.id);
        let doc = Document {
            header: self.header(),
            pca: self.pca.as_ref().map(|p| PcaParts {
                mean: p.mean().to_vec(),
                components: p.components().to_vec(),
            }),
            next_id: st.next_id,
            entries,
        };
        serde_json::to_string(&doc).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Writes a snapshot atomically (temp file, then rename).
    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.snapshot_json()?;
        let tmp = path.with_extension("partial");
        fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Replaces the cache contents with a snapshot.
    pub fn load_snapshot(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.restore_json(&json)
    }

    pub fn restore_json(&mut self, json: &str) -> Result<()> {
        let value: serde_json::Value =
            serde_json::from_str(json).map_err(|e| Error::SnapshotCorrupt(e.to_string()))?;
        let version = value
            .get("header")
            .and_then(|h| h.get("format_version"))
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::SnapshotCorrupt("missing header.format_version".into()))?;
        if version != SNAPSHOT_FORMAT_VERSION as u64 {
            return Err(Error::IncompatibleSnapshot(format!(
                "format version {version}, expected {SNAPSHOT_FORMAT_VERSION}"
            )));
        }
        let doc: Document = serde_json::from_value(value).map_err(|e| Error::SnapshotCorrupt(e.to_string()))?;

        let pca = match doc.pca {
            Some(p) => Some(PcaModel::from_parts(p.mean, p.components).map_err(|e| Error::SnapshotCorrupt(e.to_string()))?),
            None => None,
        };
        if doc.header.key_kind == KeyKind::RawPca && pca.is_none() {
            return Err(Error::SnapshotCorrupt("PCA snapshot without a PCA model".into()));
        }
        if let Some(p) = &pca {
            if p.d_in() != self.embedder.dim() {
                return Err(Error::IncompatibleSnapshot(format!(
                    "PCA input dimension {} vs embedder {}",
                    p.d_in(),
                    self.embedder.dim()
                )));
            }
        }
        let previous = std::mem::replace(&mut self.pca, pca);
        let expected = self.header();
        if doc.header != expected {
            self.pca = previous;
            return Err(Error::IncompatibleSnapshot(describe_mismatch(&doc.header, &expected)));
        }

        let mut st = State::default();
        let mut entries = doc.entries;
        entries.sort_by_key(|e| e.id);
        for e in entries {
            if e.id >= doc.next_id {
                return Err(Error::SnapshotCorrupt(format!("entry id {} >= next_id {}", e.id, doc.next_id)));
            }
            if !st.sources.insert(e.source_request_id.clone()) {
                return Err(Error::SnapshotCorrupt(format!("request {} stored twice", e.source_request_id)));
            }
            st.index
                .insert(&e.category, e.id, e.embedding.clone())
                .map_err(|err| Error::SnapshotCorrupt(err.to_string()))?;
            st.entries.insert(e.id, Arc::new(e));
        }
        st.next_id = doc.next_id;
        *self.state.write() = st;
        Ok(())
    }
}

fn describe_mismatch(found: &Header, expected: &Header) -> String {
    if found.embedder != expected.embedder {
        format!("embedder {:?}, expected {:?}", found.embedder, expected.embedder)
    } else if found.dim != expected.dim {
        format!("dimension {}, expected {}", found.dim, expected.dim)
    } else if found.key_kind != expected.key_kind {
        format!("key kind {:?}, expected {:?}", found.key_kind, expected.key_kind)
    } else {
        format!("taxonomy {}, expected {}", found.taxonomy_hash, expected.taxonomy_hash)
    }
}
