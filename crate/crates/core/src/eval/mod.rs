//! Recall@k evaluation over retrieval runs.
//!
//! `recall@k` for one query is the fraction of its gold tables found in the
//! top-k results; the report value is the mean over queries. The multi-gold
//! definition is a flag: partial credit (default) or all-gold-hit, since
//! benchmark conventions differ.

mod benchmark;
mod mtr;

pub use benchmark::{run_benchmark, BenchmarkConfig, IndexParams, Method, RetrieverBackend};
pub use mtr::{mtr_decompose, mtr_merge, MergeStrategy, SubQuerySet, DECOMPOSE_TEMPLATE};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QueryRecord;
use crate::index::SearchResult;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no retrieval run for query {qid:?}")]
    MissingRun { qid: String },
    #[error("retrieval run for unknown query {qid:?}")]
    UnknownRun { qid: String },
    #[error("cannot evaluate zero queries")]
    NoQueries,
    #[error("ks must be non-empty and positive")]
    BadKs,
    #[error("corpus augmented under {got:?} but the method needs {expected:?}")]
    StrategyMismatch { expected: String, got: String },
    #[error("decomposition methods need a text-generation provider")]
    NoDecomposer,
    #[error(transparent)]
    Provider(#[from] crate::provider::ProviderError),
    #[error(transparent)]
    Qgen(#[from] crate::qgen::QgenError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Index(#[from] crate::index::IndexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How multi-gold queries are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    /// Fraction of gold tables retrieved (partial credit).
    #[default]
    PartialCredit,
    /// 1 only when every gold table is retrieved.
    AllGold,
}

/// Per-query evidence kept alongside the aggregate numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub qid: String,
    pub gold_ids: Vec<String>,
    /// Retrieved ids at the largest k, in rank order.
    pub retrieved: Vec<String>,
    /// Gold ids found among `retrieved`, in rank order.
    pub hits: Vec<String>,
}

/// A scored retrieval run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub retriever: String,
    pub strategy: String,
    pub recall_mode: RecallMode,
    pub ks: Vec<usize>,
    pub n_queries: usize,
    /// Mean recall per k; keys sorted, values non-decreasing in k.
    pub recall: BTreeMap<usize, f64>,
    pub per_query: Vec<QueryOutcome>,
}

impl EvalReport {
    /// Aligned plain-text summary table.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "method={} retriever={} strategy={} recall_mode={} n_queries={}\n",
            self.method,
            self.retriever,
            self.strategy,
            match self.recall_mode {
                RecallMode::PartialCredit => "partial",
                RecallMode::AllGold => "all_gold",
            },
            self.n_queries
        ));
        out.push_str(&format!("{:>6}  {:>8}\n", "k", "recall"));
        for (k, value) in &self.recall {
            out.push_str(&format!("{k:>6}  {value:>8.4}\n"));
        }
        out
    }

    /// Writes `report.json` and `summary.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(self).expect("report serializes"),
        )?;
        fs::write(dir.join("summary.txt"), self.summary_table())?;
        Ok(())
    }
}

fn per_query_recall(gold: &[String], top_k: &[&str], mode: RecallMode) -> f64 {
    let found = gold.iter().filter(|g| top_k.contains(&g.as_str())).count();
    match mode {
        RecallMode::PartialCredit => found as f64 / gold.len() as f64,
        RecallMode::AllGold => {
            if found == gold.len() {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Scores per-query runs against gold ids. Every query needs a run and every
/// run a query; `ks` must be positive.
pub fn recall_at_k(
    runs: &HashMap<String, SearchResult>,
    queries: &[QueryRecord],
    ks: &[usize],
    mode: RecallMode,
) -> Result<EvalReport, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::BadKs);
    }
    for qid in runs.keys() {
        if !queries.iter().any(|q| &q.qid == qid) {
            return Err(EvalError::UnknownRun { qid: qid.clone() });
        }
    }

    let mut ks_sorted = ks.to_vec();
    ks_sorted.sort_unstable();
    ks_sorted.dedup();
    let max_k = *ks_sorted.last().expect("non-empty ks");

    let mut totals: BTreeMap<usize, f64> = ks_sorted.iter().map(|&k| (k, 0.0)).collect();
    let mut per_query = Vec::with_capacity(queries.len());
    for query in queries {
        let run = runs.get(&query.qid).ok_or_else(|| EvalError::MissingRun {
            qid: query.qid.clone(),
        })?;
        for &k in &ks_sorted {
            let top = run.top_ids(k);
            *totals.get_mut(&k).expect("k present") +=
                per_query_recall(&query.gold_ids, &top, mode);
        }
        let retrieved: Vec<String> = run.top_ids(max_k).into_iter().map(String::from).collect();
        let hits: Vec<String> = retrieved
            .iter()
            .filter(|id| query.gold_ids.contains(id))
            .cloned()
            .collect();
        per_query.push(QueryOutcome {
            qid: query.qid.clone(),
            gold_ids: query.gold_ids.clone(),
            retrieved,
            hits,
        });
    }

    let n = queries.len() as f64;
    let recall = totals
        .into_iter()
        .map(|(k, total)| (k, total / n))
        .collect();
    Ok(EvalReport {
        method: String::new(),
        retriever: String::new(),
        strategy: String::new(),
        recall_mode: mode,
        ks: ks_sorted,
        n_queries: queries.len(),
        recall,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::SearchHit;

    fn run(ids: &[&str]) -> SearchResult {
        SearchResult {
            hits: ids
                .iter()
                .enumerate()
                .map(|(i, id)| SearchHit {
                    id: id.to_string(),
                    score: 1.0 - i as f64 * 0.1,
                })
                .collect(),
        }
    }

    fn query(qid: &str, gold: &[&str]) -> QueryRecord {
        QueryRecord {
            qid: qid.into(),
            question: String::new(),
            gold_ids: gold.iter().map(|g| g.to_string()).collect(),
        }
    }

    #[test]
    fn gold_ranked_first_scores_one() {
        let queries = [query("q", &["gold"])];
        let runs = HashMap::from([("q".to_string(), run(&["gold", "other"]))]);
        let report = recall_at_k(&runs, &queries, &[1], RecallMode::PartialCredit).unwrap();
        assert_eq!(report.recall[&1], 1.0);
    }

    #[test]
    fn two_gold_one_hit_scores_half() {
        let queries = [query("q", &["A", "B"])];
        let runs = HashMap::from([("q".to_string(), run(&["A", "C"]))]);
        let report = recall_at_k(&runs, &queries, &[2], RecallMode::PartialCredit).unwrap();
        assert_eq!(report.recall[&2], 0.5);
        let strict = recall_at_k(&runs, &queries, &[2], RecallMode::AllGold).unwrap();
        assert_eq!(strict.recall[&2], 0.0);
    }

    #[test]
    fn aggregate_is_mean() {
        let queries = [
            query("q1", &["a"]),
            query("q2", &["b", "c"]),
            query("q3", &["z"]),
        ];
        let runs = HashMap::from([
            ("q1".to_string(), run(&["a", "x"])), // 1.0
            ("q2".to_string(), run(&["b", "x"])), // 0.5
            ("q3".to_string(), run(&["x", "y"])), // 0.0
        ]);
        let report = recall_at_k(&runs, &queries, &[2], RecallMode::PartialCredit).unwrap();
        assert_eq!(report.recall[&2], 0.5);
        assert_eq!(report.n_queries, 3);
    }

    #[test]
    fn recall_monotone_in_k() {
        let queries = [query("q1", &["a", "b"]), query("q2", &["c"])];
        let runs = HashMap::from([
            ("q1".to_string(), run(&["x", "a", "y", "b"])),
            ("q2".to_string(), run(&["x", "y", "z", "c"])),
        ]);
        let report =
            recall_at_k(&runs, &queries, &[1, 2, 3, 4], RecallMode::PartialCredit).unwrap();
        let values: Vec<f64> = report.recall.values().copied().collect();
        for pair in values.windows(2) {
            assert!(pair[0] <= pair[1] + 1e-12);
        }
    }

    #[test]
    fn query_order_does_not_change_aggregates() {
        let queries = [
            query("q1", &["a"]),
            query("q2", &["b"]),
            query("q3", &["c"]),
        ];
        let mut shuffled = queries.to_vec();
        shuffled.swap(0, 2);
        let runs = HashMap::from([
            ("q1".to_string(), run(&["a"])),
            ("q2".to_string(), run(&["x"])),
            ("q3".to_string(), run(&["c"])),
        ]);
        let a = recall_at_k(&runs, &queries, &[1], RecallMode::PartialCredit).unwrap();
        let b = recall_at_k(&runs, &shuffled, &[1], RecallMode::PartialCredit).unwrap();
        assert_eq!(a.recall, b.recall);
    }

    #[test]
    fn missing_and_unknown_runs_error() {
        let queries = [query("q1", &["a"])];
        let empty = HashMap::new();
        assert!(matches!(
            recall_at_k(&empty, &queries, &[1], RecallMode::PartialCredit),
            Err(EvalError::MissingRun { .. })
        ));
        let extra = HashMap::from([
            ("q1".to_string(), run(&["a"])),
            ("ghost".to_string(), run(&["a"])),
        ]);
        assert!(matches!(
            recall_at_k(&extra, &queries, &[1], RecallMode::PartialCredit),
            Err(EvalError::UnknownRun { .. })
        ));
    }

    #[test]
    fn report_files_written() {
        let queries = [query("q", &["a"])];
        let runs = HashMap::from([("q".to_string(), run(&["a"]))]);
        let mut report = recall_at_k(&runs, &queries, &[1, 5], RecallMode::PartialCredit).unwrap();
        report.method = "pT".into();
        report.retriever = "mock_dense".into();
        report.strategy = "pT".into();
        let dir = tempfile::tempdir().unwrap();
        report.write(dir.path()).unwrap();
        let json = fs::read_to_string(dir.path().join("report.json")).unwrap();
        let parsed: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("method=pT"));
        assert!(summary.contains("recall"));
    }
}
