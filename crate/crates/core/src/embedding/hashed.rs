use super::{require_text, Embedder, Embedding, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::text::{canonicalize, fnv1a64};

const DEFAULT_SEED: u64 = 0x5eed_a6e7_2e05_e001;

/// Signed feature hashing over character n-grams.
///
/// The text is canonicalized (trim, whitespace collapse, optional case fold),
/// every character n-gram for `n` in `min_n..=max_n` is hashed into one of
/// `dim` buckets, one hash bit picks the sign, and the accumulated counts are
/// L2-normalized. Fully deterministic and language-agnostic.
#[derive(Debug, Clone)]
pub struct HashedNgramEmbedder {
    dim: usize,
    min_n: usize,
    max_n: usize,
    seed: u64,
    case_fold: bool,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            min_n: 1,
            max_n: 3,
            seed: DEFAULT_SEED,
            case_fold: false,
        }
    }
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            ..Self::default()
        })
    }

    pub fn with_ngram_range(mut self, min_n: usize, max_n: usize) -> Self {
        self.min_n = min_n.max(1);
        self.max_n = max_n.max(self.min_n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_case_fold(mut self, case_fold: bool) -> Self {
        self.case_fold = case_fold;
        self
    }

    /// Raw signed bucket counts before normalization.
    pub fn feature_counts(&self, text: &str) -> Vec<f64> {
        let mut canonical = canonicalize(text);
        if self.case_fold {
            canonical = canonical.to_lowercase();
        }
        let chars: Vec<char> = canonical.chars().collect();
        let mut counts = vec![0.0; self.dim];
        let mut gram = String::new();
        for n in self.min_n..=self.max_n {
            if n > chars.len() {
                break;
            }
            for window in chars.windows(n) {
                gram.clear();
                gram.extend(window);
                let h = fnv1a64(self.seed ^ n as u64, gram.as_bytes());
                let bucket = (h % self.dim as u64) as usize;
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                counts[bucket] += sign;
            }
        }
        counts
    }
}

impl Embedder for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        require_text(text)?;
        let counts = self.feature_counts(text);
        match Embedding::normalize(&counts) {
            Ok(e) => Ok(e),
            // Every n-gram cancelled out; fall back to a fixed direction so
            // the contract (unit norm, deterministic) still holds.
            Err(_) => Ok(Embedding::basis(self.dim, 0)),
        }
    }

    fn fingerprint(&self) -> String {
        format!(
            "hashed-ngram/dim={}/n={}-{}/seed={:#x}/fold={}",
            self.dim, self.min_n, self.max_n, self.seed, self.case_fold
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashedNgramEmbedder::default();
        let a = e.embed("abc").unwrap();
        let b = e.embed("abc").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert!((a.dot(&b) - 1.0).abs() < 1e-6);
        assert_eq!(a.dim(), 512);
    }

    #[test]
    fn whitespace_is_canonicalized() {
        let e = HashedNgramEmbedder::default();
        let a = e.embed("Book a ticket from to").unwrap();
        let b = e.embed("Book a ticket from to ").unwrap();
        let c = e.embed("  Book a  ticket\tfrom to").unwrap();
        assert!((a.dot(&b) - 1.0).abs() < 1e-6);
        assert_eq!(a, c);
    }

    #[test]
    fn empty_text_rejected() {
        let e = HashedNgramEmbedder::default();
        assert!(matches!(e.embed(""), Err(Error::InvalidInput(_))));
        assert!(matches!(e.embed("   "), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn case_folding_is_opt_in() {
        let plain = HashedNgramEmbedder::default();
        let folded = HashedNgramEmbedder::default().with_case_fold(true);
        assert!(plain.embed("Open WeChat").unwrap().dot(&plain.embed("open wechat").unwrap()) < 0.999);
        assert_eq!(folded.embed("Open WeChat").unwrap(), folded.embed("open wechat").unwrap());
        assert_ne!(plain.fingerprint(), folded.fingerprint());
    }

    #[test]
    fn different_texts_differ() {
        let e = HashedNgramEmbedder::default();
        let a = e.embed("Book a ticket from Hefei to Beijing").unwrap();
        let b = e.embed("Book a ticket from Changsha to Shanghai").unwrap();
        let s = a.dot(&b);
        assert!(s < 1.0 - 1e-6 && s > 0.0, "similarity {s}");
    }

    #[test]
    fn seed_changes_vectors() {
        let a = HashedNgramEmbedder::default().embed("play music").unwrap();
        let b = HashedNgramEmbedder::default().with_seed(1).embed("play music").unwrap();
        assert_ne!(a, b);
    }
}
