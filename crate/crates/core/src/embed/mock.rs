//! Deterministic hashed bag-of-tokens embedders.
//!
//! The mock definition doubles as a test oracle: texts are tokenized with the
//! same segmenter the token counter uses, each token is hashed to an index in
//! `[0, dim)`, and occurrences accumulate +1 at that index. The dense mock
//! sums over all tokens and L2-normalizes; the multi mock emits one one-hot
//! vector per token. Token order never matters for the dense mock, and token
//! overlap translates directly into cosine similarity.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::tokenize::{ApproxTokenizer, Tokenizer};

use super::{DenseEmbedder, DenseVector, EmbedError, MultiEmbedder, MultiVector};

/// Index a token hashes to under the mock definition (seeded FNV-1a).
pub fn mock_token_index(token: &str, dim: usize, seed: u64) -> usize {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for byte in token.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % dim as u64) as usize
}

#[derive(Debug, Clone)]
pub struct MockDenseEmbedder {
    dim: usize,
    seed: u64,
}

impl MockDenseEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::BadMockSpec);
        }
        Ok(Self { dim, seed })
    }
}

impl DenseEmbedder for MockDenseEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseVector>, EmbedError> {
        texts
            .iter()
            .map(|text| {
                let tokens = ApproxTokenizer.tokens(text);
                if tokens.is_empty() {
                    return Err(EmbedError::EmptyText);
                }
                let mut values = vec![0.0f32; self.dim];
                for token in tokens {
                    values[mock_token_index(token, self.dim, self.seed)] += 1.0;
                }
                Ok(DenseVector::new(values).normalized())
            })
            .collect()
    }
}

pub struct MockMultiEmbedder {
    dim: usize,
    seed: u64,
    max_tokens: usize,
    truncations: AtomicUsize,
}

impl MockMultiEmbedder {
    pub fn new(dim: usize, seed: u64, max_tokens: usize) -> Result<Self, EmbedError> {
        if dim == 0 || max_tokens == 0 {
            return Err(EmbedError::BadMockSpec);
        }
        Ok(Self {
            dim,
            seed,
            max_tokens,
            truncations: AtomicUsize::new(0),
        })
    }

    /// How many texts got truncated at the token cap so far; surfaced in
    /// build reports.
    pub fn truncations(&self) -> usize {
        self.truncations.load(Ordering::SeqCst)
    }
}

impl MultiEmbedder for MockMultiEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<MultiVector>, EmbedError> {
        texts
            .iter()
            .map(|text| {
                let tokens = ApproxTokenizer.tokens(text);
                if tokens.is_empty() {
                    return Err(EmbedError::EmptyText);
                }
                if tokens.len() > self.max_tokens {
                    self.truncations.fetch_add(1, Ordering::SeqCst);
                }
                let token_vectors: Vec<DenseVector> = tokens
                    .iter()
                    .take(self.max_tokens)
                    .map(|token| {
                        let mut values = vec![0.0f32; self.dim];
                        values[mock_token_index(token, self.dim, self.seed)] = 1.0;
                        DenseVector::new(values)
                    })
                    .collect();
                MultiVector::new(token_vectors)
            })
            .collect()
    }
}
