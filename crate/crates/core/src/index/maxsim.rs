//! Late-interaction MaxSim scoring over multi-vector entries.
//!
//! `maxsim(Q, D) = Σ_i max_j ⟨q_i, d_j⟩`: each query token picks its best
//! match among the document tokens, and the picks are summed. Search is an
//! exhaustive scan; at corpus sizes where compressed late-interaction
//! indexes pay off, swap the scan, not the scorer.

use crate::embed::{dot, MultiVector};

use super::{rank_top_k, IndexError, SearchResult};

/// Sum over query tokens of the maximum inner product against any document
/// token. Not symmetric: the first argument is the query.
pub fn maxsim_score(query: &MultiVector, doc: &MultiVector) -> Result<f64, IndexError> {
    if query.dim() != doc.dim() {
        return Err(IndexError::DimensionMismatch {
            expected: query.dim(),
            got: doc.dim(),
        });
    }
    let mut total = 0.0f64;
    for q in query.token_vectors() {
        let mut best = f64::NEG_INFINITY;
        for d in doc.token_vectors() {
            let score = dot(q, d)?;
            if score > best {
                best = score;
            }
        }
        total += best;
    }
    Ok(total)
}

/// Multi-vector corpus with unique ids.
#[derive(Debug, Clone)]
pub struct MultiIndex {
    entries: Vec<(String, MultiVector)>,
    dim: usize,
}

impl MultiIndex {
    pub fn build(entries: Vec<(String, MultiVector)>) -> Result<Self, IndexError> {
        if entries.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let dim = entries[0].1.dim();
        let mut seen = std::collections::HashSet::new();
        for (id, mv) in &entries {
            if mv.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    got: mv.dim(),
                });
            }
            if !seen.insert(id.as_str()) {
                return Err(IndexError::DuplicateId { id: id.clone() });
            }
        }
        Ok(Self { entries, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// MaxSim against every entry, top `k` under the standard tie rule.
    pub fn search(&self, query: &MultiVector, k: usize) -> Result<SearchResult, IndexError> {
        let mut scored = Vec::with_capacity(self.entries.len());
        for (id, doc) in &self.entries {
            scored.push((id.clone(), maxsim_score(query, doc)?));
        }
        Ok(rank_top_k(scored, k))
    }

    /// Two-stage mode, off by default in the pipeline: MaxSim re-scores only
    /// the given candidate ids (typically a dense pre-filter's top results).
    /// With the full id set as candidates this equals [`MultiIndex::search`].
    pub fn search_candidates(
        &self,
        query: &MultiVector,
        candidates: &[&str],
        k: usize,
    ) -> Result<SearchResult, IndexError> {
        let wanted: std::collections::HashSet<&str> = candidates.iter().copied().collect();
        let mut scored = Vec::with_capacity(wanted.len());
        for (id, doc) in &self.entries {
            if wanted.contains(id.as_str()) {
                scored.push((id.clone(), maxsim_score(query, doc)?));
            }
        }
        Ok(rank_top_k(scored, k))
    }
}

/// Free-function form of [`MultiIndex::search`].
pub fn search_multi(
    index: &MultiIndex,
    query: &MultiVector,
    k: usize,
) -> Result<SearchResult, IndexError> {
    index.search(query, k)
}
