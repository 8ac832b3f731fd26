//! Multi-table retrieval baseline: decompose the question into single-table
//! sub-queries, retrieve per sub-query, merge the rankings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::index::{rank_top_k, SearchResult};
use crate::provider::{RetryPolicy, TextGenProvider};
use crate::qgen::extract_json;

use super::EvalError;

/// Decomposition prompt. The upstream multi-table retrieval work does not
/// publish its decomposition prompt; this one is this project's own.
pub const DECOMPOSE_TEMPLATE: &str = r#"You are an expert in question decomposition for table retrieval. Given a question that may require information from multiple tables, split it into 2 to 3 self-contained sub-queries such that each sub-query targets a single table.

Important Considerations:
- Each sub-query must be answerable from one table on its own.
- Preserve the entities and constraints of the original question.
- Do not answer the question; only decompose it.

**Output Format (Strictly JSON format)**
Only return a JSON dictionary object with the sub-queries, without any additional explanations or formatting.
{ "sub_queries": ["sub-query1", "sub-query2", "..."] }

Question:
<{question}>"#;

/// A decomposed question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQuerySet {
    pub qid: String,
    pub original: String,
    pub sub_queries: Vec<String>,
    /// Set when decomposition failed and the original question was used as a
    /// singleton fallback.
    pub fallback: bool,
}

pub fn build_decompose_prompt(question: &str) -> String {
    DECOMPOSE_TEMPLATE.replace("{question}", question)
}

fn parse_sub_queries(raw: &str) -> Option<Vec<String>> {
    let (value, _) = extract_json(raw).ok()?;
    let array = value.get("sub_queries")?.as_array()?;
    let mut out = Vec::with_capacity(array.len());
    for item in array {
        let s = item.as_str()?.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Splits a multi-table question into single-table sub-queries via the
/// provider. Malformed replies retry up to the policy budget; once the budget
/// is spent the original question is kept as a flagged singleton, so
/// retrieval still runs. Transport errors stay hard errors.
pub fn mtr_decompose(
    qid: &str,
    question: &str,
    provider: &dyn TextGenProvider,
    policy: RetryPolicy,
) -> Result<SubQuerySet, EvalError> {
    let prompt = build_decompose_prompt(question);
    for _ in 0..policy.max_attempts.max(1) {
        let raw = provider.complete(&prompt)?;
        if let Some(sub_queries) = parse_sub_queries(&raw) {
            return Ok(SubQuerySet {
                qid: qid.to_string(),
                original: question.to_string(),
                sub_queries,
                fallback: false,
            });
        }
    }
    Ok(SubQuerySet {
        qid: qid.to_string(),
        original: question.to_string(),
        sub_queries: vec![question.to_string()],
        fallback: true,
    })
}

/// How per-sub-query rankings are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MergeStrategy {
    /// Per id, the maximum score over sub-queries; then the standard rank
    /// rule.
    #[default]
    MaxScore,
    /// Interleave rankings round-robin, first appearance wins. Ranks are
    /// re-scored 1/position so the merged result keeps a strictly
    /// descending score order.
    RoundRobin,
}

/// Merges sub-query rankings into one top-k result.
pub fn mtr_merge(results: &[SearchResult], k: usize, strategy: MergeStrategy) -> SearchResult {
    match strategy {
        MergeStrategy::MaxScore => {
            let mut best: HashMap<&str, f64> = HashMap::new();
            for result in results {
                for hit in &result.hits {
                    let entry = best.entry(hit.id.as_str()).or_insert(f64::NEG_INFINITY);
                    if hit.score > *entry {
                        *entry = hit.score;
                    }
                }
            }
            let scored: Vec<(String, f64)> = best
                .into_iter()
                .map(|(id, score)| (id.to_string(), score))
                .collect();
            rank_top_k(scored, k)
        }
        MergeStrategy::RoundRobin => {
            let mut order: Vec<String> = Vec::new();
            let longest = results.iter().map(|r| r.hits.len()).max().unwrap_or(0);
            for rank in 0..longest {
                for result in results {
                    if let Some(hit) = result.hits.get(rank) {
                        if !order.contains(&hit.id) {
                            order.push(hit.id.clone());
                        }
                    }
                }
            }
            order.truncate(k);
            let scored = order
                .into_iter()
                .enumerate()
                .map(|(i, id)| (id, 1.0 / (i + 1) as f64))
                .collect();
            rank_top_k(scored, k)
        }
    }
}
