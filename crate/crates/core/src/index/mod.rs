//! Vector search: exact brute force, IVF-Flat, and late-interaction MaxSim.
//!
//! All scores are inner products over pre-normalized vectors (cosine).
//! Rankings order by score descending with ties broken by ascending id, so
//! results are reproducible across runs and across the exact/approximate
//! paths.

mod io;
mod ivf;
mod maxsim;

pub use io::{load_index, save_index};
pub use ivf::{build_ivf, search_dense, DenseIndex};
pub use maxsim::{maxsim_score, search_multi, MultiIndex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{dot, DenseVector, EmbedError};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot build an index over zero vectors")]
    EmptyCorpus,
    #[error("duplicate entry id {id:?}")]
    DuplicateId { id: String },
    #[error("bad index file: {0}")]
    InvalidFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<EmbedError> for IndexError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::DimensionMismatch { expected, got } => {
                Self::DimensionMismatch { expected, got }
            }
            other => Self::InvalidFile(other.to_string()),
        }
    }
}

/// One ranked entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub id: String,
    pub score: f64,
}

/// A ranking: strictly ordered by `(score desc, id asc)`, at most `k` long.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub hits: Vec<SearchHit>,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.id.as_str()).collect()
    }

    pub fn top_ids(&self, k: usize) -> Vec<&str> {
        self.hits.iter().take(k).map(|h| h.id.as_str()).collect()
    }
}

/// Sorts scored ids under the standard tie rule and keeps the top `k`.
pub fn rank_top_k(mut scored: Vec<(String, f64)>, k: usize) -> SearchResult {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    SearchResult {
        hits: scored
            .into_iter()
            .map(|(id, score)| SearchHit { id, score })
            .collect(),
    }
}

/// Exhaustive inner-product scan, the exact reference the approximate index
/// is checked against.
pub fn brute_force_search(
    entries: &[(String, DenseVector)],
    query: &DenseVector,
    k: usize,
) -> Result<SearchResult, IndexError> {
    let mut scored = Vec::with_capacity(entries.len());
    for (id, vector) in entries {
        scored.push((id.clone(), dot(query, vector)?));
    }
    Ok(rank_top_k(scored, k))
}
