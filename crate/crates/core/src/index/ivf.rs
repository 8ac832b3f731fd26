//! IVF-Flat index: seeded spherical k-means partitions the corpus into
//! `nlist` posting lists; queries probe the `nprobe` nearest centroids and
//! scan those lists exactly. With `nprobe == nlist` the search degenerates to
//! an exact scan and must match brute force result-for-result.

use crate::embed::{dot, DenseVector};
use crate::rng::SplitMix64;

use super::{rank_top_k, IndexError, SearchResult};

const KMEANS_MAX_ITERATIONS: usize = 20;

/// Inverted-file index over normalized dense vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    pub(super) dim: usize,
    pub(super) nlist: usize,
    pub(super) centroids: Vec<DenseVector>,
    pub(super) postings: Vec<Vec<(String, DenseVector)>>,
}

impl DenseIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nlist(&self) -> usize {
        self.nlist
    }

    pub fn len(&self) -> usize {
        self.postings.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posting list sizes, for partition checks and stats.
    pub fn posting_sizes(&self) -> Vec<usize> {
        self.postings.iter().map(Vec::len).collect()
    }

    /// Scans the `nprobe` nearest posting lists and returns the top `k`
    /// under the `(score desc, id asc)` rule. `nprobe` is clamped into
    /// `1..=nlist`.
    pub fn search(
        &self,
        query: &DenseVector,
        k: usize,
        nprobe: usize,
    ) -> Result<SearchResult, IndexError> {
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let nprobe = nprobe.clamp(1, self.nlist);

        let mut by_centroid: Vec<(usize, f64)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| Ok((i, dot(query, c)?)))
            .collect::<Result<_, IndexError>>()?;
        by_centroid.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut scored = Vec::new();
        for &(list, _) in by_centroid.iter().take(nprobe) {
            for (id, vector) in &self.postings[list] {
                scored.push((id.clone(), dot(query, vector)?));
            }
        }
        Ok(rank_top_k(scored, k))
    }
}

/// Convenience alias matching the index search naming used elsewhere.
pub fn search_dense(
    index: &DenseIndex,
    query: &DenseVector,
    k: usize,
    nprobe: usize,
) -> Result<SearchResult, IndexError> {
    index.search(query, k, nprobe)
}

/// Builds an IVF-Flat index with seeded k-means++ initialization and at most
/// 20 spherical Lloyd iterations. `nlist` is clamped to the corpus size.
/// Deterministic: the same vectors and seed produce an identical index.
pub fn build_ivf(
    vectors: &[(String, DenseVector)],
    nlist: usize,
    seed: u64,
) -> Result<DenseIndex, IndexError> {
    if vectors.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let dim = vectors[0].1.dim();
    let mut seen = std::collections::HashSet::new();
    for (id, vector) in vectors {
        if vector.dim() != dim {
            return Err(IndexError::DimensionMismatch {
                expected: dim,
                got: vector.dim(),
            });
        }
        if !seen.insert(id.as_str()) {
            return Err(IndexError::DuplicateId { id: id.clone() });
        }
    }

    let nlist = nlist.clamp(1, vectors.len());
    let mut centroids = init_centroids(vectors, nlist, seed)?;

    let mut assignment = vec![0usize; vectors.len()];
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut changed = false;
        for (i, (_, vector)) in vectors.iter().enumerate() {
            let best = nearest_centroid(&centroids, vector)?;
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }

        // Mean of assigned vectors, re-normalized (spherical update). A
        // cluster that lost all members keeps its previous centroid.
        let mut sums = vec![vec![0.0f64; dim]; nlist];
        let mut counts = vec![0usize; nlist];
        for (i, (_, vector)) in vectors.iter().enumerate() {
            let c = assignment[i];
            counts[c] += 1;
            for (acc, &x) in sums[c].iter_mut().zip(vector.as_slice()) {
                *acc += x as f64;
            }
        }
        for (c, sum) in sums.iter().enumerate() {
            if counts[c] == 0 {
                continue;
            }
            let mean: Vec<f32> = sum.iter().map(|&x| (x / counts[c] as f64) as f32).collect();
            let candidate = DenseVector::new(mean).normalized();
            if candidate.norm() > 0.0 {
                centroids[c] = candidate;
            }
        }
    }

    // Final assignment pass so postings match the final centroids exactly.
    let mut postings: Vec<Vec<(String, DenseVector)>> = vec![Vec::new(); nlist];
    for (id, vector) in vectors {
        let best = nearest_centroid(&centroids, vector)?;
        postings[best].push((id.clone(), vector.clone()));
    }

    Ok(DenseIndex {
        dim,
        nlist,
        centroids,
        postings,
    })
}

/// k-means++ seeding: first centroid uniform, the rest sampled proportional
/// to squared distance from the nearest chosen centroid. On normalized data
/// that distance is `2 - 2·ip`, clamped at zero.
fn init_centroids(
    vectors: &[(String, DenseVector)],
    nlist: usize,
    seed: u64,
) -> Result<Vec<DenseVector>, IndexError> {
    let mut rng = SplitMix64::new(seed);
    let mut centroids = Vec::with_capacity(nlist);
    centroids.push(vectors[rng.next_below(vectors.len())].1.clone());

    let mut weights = vec![0.0f64; vectors.len()];
    while centroids.len() < nlist {
        let newest = centroids.last().expect("at least one centroid");
        let mut total = 0.0;
        for (i, (_, vector)) in vectors.iter().enumerate() {
            let dist = (2.0 - 2.0 * dot(vector, newest)?).max(0.0);
            if centroids.len() == 1 || dist < weights[i] {
                weights[i] = dist;
            }
            total += weights[i];
        }
        let pick = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut chosen = vectors.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining vectors coincide with chosen centroids.
            rng.next_below(vectors.len())
        };
        centroids.push(vectors[pick].1.clone());
    }
    Ok(centroids)
}

fn nearest_centroid(centroids: &[DenseVector], vector: &DenseVector) -> Result<usize, IndexError> {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, centroid) in centroids.iter().enumerate() {
        let score = dot(vector, centroid)?;
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    Ok(best)
}
