//! End-to-end benchmark execution: render, embed, index, retrieve, score.

use std::collections::HashMap;

use crate::corpus::QueryRecord;
use crate::embed::{DenseVector, EmbedderSpec, MultiVector};
use crate::index::{build_ivf, MultiIndex, SearchResult};
use crate::provider::{RetryPolicy, TextGenProvider};
use crate::qgen::{render_for_embedding, AugmentedTable, RepresentationStrategy};

use super::mtr::{mtr_decompose, mtr_merge, MergeStrategy};
use super::{recall_at_k, EvalError, EvalReport, RecallMode};

/// A benchmark method: which representation the corpus is embedded under,
/// and whether queries are decomposed into sub-queries first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Method {
    pub strategy: RepresentationStrategy,
    pub decompose: bool,
}

impl Method {
    pub fn name(&self) -> String {
        match (self.decompose, self.strategy) {
            (false, strategy) => strategy.name().to_string(),
            (true, RepresentationStrategy::Pt) => "MTR".to_string(),
            (true, strategy) => format!("MTR+{}", strategy.name()),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("mtr") {
            return Ok(Self {
                strategy: RepresentationStrategy::Pt,
                decompose: true,
            });
        }
        if let Some(rest) = s.strip_prefix("MTR+").or_else(|| s.strip_prefix("mtr+")) {
            return Ok(Self {
                strategy: rest.parse()?,
                decompose: true,
            });
        }
        Ok(Self {
            strategy: s.parse()?,
            decompose: false,
        })
    }
}

/// IVF build and probe parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IndexParams {
    pub nlist: usize,
    pub nprobe: usize,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            nlist: 256,
            nprobe: 16,
            seed: 42,
        }
    }
}

/// Everything a benchmark run needs besides the corpus and queries.
pub struct BenchmarkConfig<'a> {
    pub embedder: &'a EmbedderSpec,
    pub index: IndexParams,
    pub ks: &'a [usize],
    pub recall_mode: RecallMode,
    pub merge: MergeStrategy,
    /// Corpus-side title flag for the embedded texts.
    pub include_title: bool,
    /// Generator used for query decomposition; required by MTR methods.
    pub decomposer: Option<(&'a dyn TextGenProvider, RetryPolicy)>,
}

/// The embedded corpus behind a benchmark run.
pub enum RetrieverBackend {
    Dense {
        entries: Vec<(String, DenseVector)>,
        index: crate::index::DenseIndex,
        nprobe: usize,
    },
    Multi {
        index: MultiIndex,
    },
}

impl RetrieverBackend {
    /// Embeds and indexes a rendered corpus.
    pub fn build(
        rendered: &[(String, String)],
        spec: &EmbedderSpec,
        params: IndexParams,
    ) -> Result<Self, EvalError> {
        let texts: Vec<String> = rendered
            .iter()
            .map(|(_, text)| format!("{}{}", spec.doc_prefix, text))
            .collect();
        if spec.kind.is_multi() {
            let embedder = spec.build_multi()?;
            let vectors = embedder.embed_batch(&texts)?;
            let entries: Vec<(String, MultiVector)> = rendered
                .iter()
                .map(|(id, _)| id.clone())
                .zip(vectors)
                .collect();
            Ok(Self::Multi {
                index: MultiIndex::build(entries)?,
            })
        } else {
            let embedder = spec.build_dense()?;
            let vectors = embedder.embed_batch(&texts)?;
            let entries: Vec<(String, DenseVector)> = rendered
                .iter()
                .map(|(id, _)| id.clone())
                .zip(vectors)
                .collect();
            let index = build_ivf(&entries, params.nlist, params.seed)?;
            Ok(Self::Dense {
                entries,
                index,
                nprobe: params.nprobe,
            })
        }
    }

    pub fn search_text(
        &self,
        text: &str,
        spec: &EmbedderSpec,
        k: usize,
    ) -> Result<SearchResult, EvalError> {
        let prefixed = format!("{}{}", spec.query_prefix, text);
        match self {
            Self::Dense { index, nprobe, .. } => {
                let query = spec.build_dense()?.embed(&prefixed)?;
                Ok(index.search(&query, k, *nprobe)?)
            }
            Self::Multi { index } => {
                let query = spec.build_multi()?.embed(&prefixed)?;
                Ok(index.search(&query, k)?)
            }
        }
    }
}

/// Runs one method over an augmented corpus and scores it.
///
/// The corpus must be augmented under the method's strategy; retrieval runs
/// per query (decomposed when the method asks for it), and the report labels
/// carry the method, retriever kind, and strategy.
pub fn run_benchmark(
    corpus: &[AugmentedTable],
    queries: &[QueryRecord],
    method: &Method,
    config: &BenchmarkConfig,
) -> Result<EvalReport, EvalError> {
    for at in corpus {
        if at.strategy != method.strategy {
            return Err(EvalError::StrategyMismatch {
                expected: method.strategy.name().to_string(),
                got: at.strategy.name().to_string(),
            });
        }
    }
    let max_k = config.ks.iter().copied().max().ok_or(EvalError::BadKs)?;

    let rendered: Vec<(String, String)> = corpus
        .iter()
        .map(|at| {
            (
                at.table_id().to_string(),
                render_for_embedding(at, config.include_title),
            )
        })
        .collect();
    let backend = RetrieverBackend::build(&rendered, config.embedder, config.index)?;

    let mut runs: HashMap<String, SearchResult> = HashMap::with_capacity(queries.len());
    for query in queries {
        let result = if method.decompose {
            let (provider, policy) = config.decomposer.as_ref().ok_or(EvalError::NoDecomposer)?;
            let set = mtr_decompose(&query.qid, &query.question, *provider, *policy)?;
            let per_sub: Vec<SearchResult> = set
                .sub_queries
                .iter()
                .map(|sub| backend.search_text(sub, config.embedder, max_k))
                .collect::<Result<_, _>>()?;
            mtr_merge(&per_sub, max_k, config.merge)
        } else {
            backend.search_text(&query.question, config.embedder, max_k)?
        };
        runs.insert(query.qid.clone(), result);
    }

    let mut report = recall_at_k(&runs, queries, config.ks, config.recall_mode)?;
    report.method = method.name();
    report.retriever = config.embedder.kind.name().to_string();
    report.strategy = method.strategy.name().to_string();
    Ok(report)
}
