//! Embedding vectors and providers.
//!
//! Similarity is cosine implemented as inner product over pre-normalized
//! vectors, so every vector handed to the index layer must be unit length.
//! Providers come in two shapes: dense (one vector per text) and multi (one
//! vector per token, for late-interaction scoring). The mock providers are
//! fully deterministic and let the whole pipeline run with no network.

mod mock;
mod remote;
mod store;

pub use mock::{mock_token_index, MockDenseEmbedder, MockMultiEmbedder};
pub use remote::{RemoteDenseEmbedder, RemoteMultiEmbedder};
pub use store::{read_vector_store, write_vector_store, VectorRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("provider transport error: {0}")]
    Provider(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("mock embedder requires a seed and dim > 0")]
    BadMockSpec,
    #[error("remote embedder requires base_url and model")]
    BadRemoteSpec,
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
}

/// A single normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector {
    values: Vec<f32>,
}

impl DenseVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales to unit length. A zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v = (*v as f64 / norm) as f32;
            }
        }
        self
    }

    pub fn is_unit(&self, tolerance: f64) -> bool {
        (self.norm() - 1.0).abs() <= tolerance
    }
}

/// Inner product, accumulated in f64 for order-stable scoring.
pub fn dot(a: &DenseVector, b: &DenseVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum())
}

/// Per-token embeddings of one text, for late-interaction scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiVector {
    token_vectors: Vec<DenseVector>,
}

impl MultiVector {
    /// Token vectors must be non-empty and share a dimension.
    pub fn new(token_vectors: Vec<DenseVector>) -> Result<Self, EmbedError> {
        let first_dim = match token_vectors.first() {
            Some(v) => v.dim(),
            None => return Err(EmbedError::EmptyText),
        };
        for v in &token_vectors {
            if v.dim() != first_dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: first_dim,
                    got: v.dim(),
                });
            }
        }
        Ok(Self { token_vectors })
    }

    pub fn dim(&self) -> usize {
        self.token_vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.token_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn token_vectors(&self) -> &[DenseVector] {
        &self.token_vectors
    }

    pub fn into_token_vectors(self) -> Vec<DenseVector> {
        self.token_vectors
    }
}

/// Dense embedding backend. Implementations batch internally.
pub trait DenseEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<DenseVector, EmbedError> {
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut out = self.embed_batch(std::slice::from_ref(&text.to_string()))?;
        Ok(out.remove(0))
    }
}

/// Multi-vector embedding backend.
pub trait MultiEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<MultiVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<MultiVector, EmbedError> {
        if text.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut out = self.embed_batch(std::slice::from_ref(&text.to_string()))?;
        Ok(out.remove(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    RemoteDense,
    RemoteMulti,
    MockDense,
    MockMulti,
}

impl EmbedderKind {
    pub fn is_multi(&self) -> bool {
        matches!(self, Self::RemoteMulti | Self::MockMulti)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RemoteDense => "remote_dense",
            Self::RemoteMulti => "remote_multi",
            Self::MockDense => "mock_dense",
            Self::MockMulti => "mock_multi",
        }
    }
}

/// Declarative embedder configuration; [`EmbedderSpec::build_dense`] /
/// [`EmbedderSpec::build_multi`] turn it into a live provider.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dim: usize,
    /// Mock kinds are seeded and fully deterministic.
    pub seed: u64,
    /// Token cap for multi-vector embeddings.
    pub max_tokens: usize,
    pub batch_size: usize,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    /// Optional instruction prefixes, prepended to texts before embedding.
    pub query_prefix: String,
    pub doc_prefix: String,
}

impl EmbedderSpec {
    pub fn mock_dense(dim: usize, seed: u64) -> Self {
        Self {
            kind: EmbedderKind::MockDense,
            dim,
            seed,
            max_tokens: 256,
            batch_size: 32,
            base_url: None,
            model: None,
            api_key_env: None,
            query_prefix: String::new(),
            doc_prefix: String::new(),
        }
    }

    pub fn mock_multi(dim: usize, seed: u64, max_tokens: usize) -> Self {
        Self {
            kind: EmbedderKind::MockMulti,
            max_tokens,
            ..Self::mock_dense(dim, seed)
        }
    }

    pub fn build_dense(&self) -> Result<Box<dyn DenseEmbedder>, EmbedError> {
        match self.kind {
            EmbedderKind::MockDense => Ok(Box::new(MockDenseEmbedder::new(self.dim, self.seed)?)),
            EmbedderKind::RemoteDense => Ok(Box::new(RemoteDenseEmbedder::from_spec(self)?)),
            _ => Err(EmbedError::BadMockSpec),
        }
    }

    pub fn build_multi(&self) -> Result<Box<dyn MultiEmbedder>, EmbedError> {
        match self.kind {
            EmbedderKind::MockMulti => Ok(Box::new(MockMultiEmbedder::new(
                self.dim,
                self.seed,
                self.max_tokens,
            )?)),
            EmbedderKind::RemoteMulti => Ok(Box::new(RemoteMultiEmbedder::from_spec(self)?)),
            _ => Err(EmbedError::BadMockSpec),
        }
    }
}

/// Embeds one text densely per `spec`.
pub fn embed_dense(text: &str, spec: &EmbedderSpec) -> Result<DenseVector, EmbedError> {
    spec.build_dense()?.embed(text)
}

/// Embeds one text into per-token vectors per `spec`.
pub fn embed_multi(text: &str, spec: &EmbedderSpec) -> Result<MultiVector, EmbedError> {
    spec.build_multi()?.embed(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_makes_unit_vectors() {
        let v = DenseVector::new(vec![3.0, 4.0]).normalized();
        assert!(v.is_unit(1e-6));
        assert!((v.as_slice()[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_survives_normalization() {
        let v = DenseVector::new(vec![0.0, 0.0]).normalized();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn dot_checks_dims() {
        let a = DenseVector::new(vec![1.0, 0.0]);
        let b = DenseVector::new(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            dot(&a, &b),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn multivector_rejects_empty_and_mixed_dims() {
        assert!(matches!(
            MultiVector::new(vec![]),
            Err(EmbedError::EmptyText)
        ));
        let mixed = vec![
            DenseVector::new(vec![1.0]),
            DenseVector::new(vec![1.0, 0.0]),
        ];
        assert!(matches!(
            MultiVector::new(mixed),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_text_rejected() {
        let spec = EmbedderSpec::mock_dense(16, 1);
        assert!(matches!(embed_dense("", &spec), Err(EmbedError::EmptyText)));
    }
}
