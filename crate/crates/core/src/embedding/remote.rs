use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{require_text, Embedder, Embedding};
use crate::error::{Error, Result};
use crate::text::canonicalize;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service.
///
/// Protocol: `POST {"texts": [...]}` answered by `{"vectors": [[...], ...]}`
/// in the same order. Returned vectors are re-normalized locally.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            dim,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        for t in texts {
            require_text(t)?;
        }
        let canonical: Vec<String> = texts.iter().map(|t| canonicalize(t)).collect();
        let refs: Vec<&str> = canonical.iter().map(String::as_str).collect();
        let response = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { texts: &refs })
            .map_err(|e| Error::EmbeddingBackend(e.to_string()))?;
        let body: EmbedResponse = response
            .into_json()
            .map_err(|e| Error::EmbeddingBackend(format!("malformed response: {e}")))?;
        if body.vectors.len() != texts.len() {
            return Err(Error::EmbeddingBackend(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        body.vectors
            .iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(Error::EmbeddingBackend(format!(
                        "expected dimension {}, got {}",
                        self.dim,
                        v.len()
                    )));
                }
                Embedding::normalize(v).map_err(|e| Error::EmbeddingBackend(e.to_string()))
            })
            .collect()
    }

    fn fingerprint(&self) -> String {
        format!("remote/{}/dim={}", self.url, self.dim)
    }
}
