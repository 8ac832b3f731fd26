//! Corpus ingestion and reconstruction.
//!
//! Raw table collections often repeat a table name across structurally
//! different tables. [`deduplicate`] rebuilds such a corpus: tables are
//! grouped by name, one representative is kept per distinct schema signature
//! (first occurrence wins), representatives are renamed `name__1`,
//! `name__2`, ... in first-seen order, and every query's gold ids are
//! rewritten through the resulting remap.

mod files;
mod ingest;

pub use files::{read_queries, read_tables, write_corpus, write_tables, Manifest};
pub use ingest::{ingest_corpus, CorpusFormat, IngestReport};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::table::Table;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate table id {id:?}")]
    DuplicateId { id: String },
    #[error("query {qid:?} references unknown table id {gold:?}")]
    DanglingGold { qid: String, gold: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A benchmark query with its gold table ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub qid: String,
    pub question: String,
    pub gold_ids: Vec<String>,
}

/// Normalized header tuple used to tell structurally distinct tables apart.
///
/// Built from the first row only: cells are lower-cased and inner whitespace
/// collapsed. Two tables share a signature exactly when those tuples match.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaSignature {
    pub headers: Vec<String>,
    pub column_count: usize,
}

/// Computes the schema signature of an admitted table.
pub fn schema_signature(table: &Table) -> SchemaSignature {
    let headers: Vec<String> = table.rows[0]
        .cells
        .iter()
        .map(|c| {
            c.to_lowercase()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let column_count = headers.len();
    SchemaSignature {
        headers,
        column_count,
    }
}

impl SchemaSignature {
    /// Short stable digest, used in manifests.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for h in &self.headers {
            hasher.update(h.as_bytes());
            hasher.update([0x1f]);
        }
        let hex = format!("{:x}", hasher.finalize());
        hex[..16].to_string()
    }
}

/// One `(name, signature) -> new id` assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapEntry {
    pub name: String,
    pub signature_hash: String,
    pub new_id: String,
}

/// The id assignments produced by a deduplication pass, in first-seen order.
/// Injective: `__i` suffixes for a given name are contiguous from 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdRemap {
    pub entries: Vec<RemapEntry>,
}

/// Result of [`deduplicate`]: the reconstructed corpus plus its remap.
#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub tables: Vec<Table>,
    pub queries: Vec<QueryRecord>,
    pub remap: IdRemap,
}

/// Rebuilds a corpus by schema-based deduplication and rewrites query gold
/// ids accordingly. Grouping key is the table title when present, the id
/// otherwise; representatives get the group name as their title so a second
/// pass reproduces the same ids (the operation is idempotent).
pub fn deduplicate(
    tables: Vec<Table>,
    queries: &[QueryRecord],
) -> Result<DedupOutcome, CorpusError> {
    let mut assigned: HashMap<(String, SchemaSignature), String> = HashMap::new();
    let mut counters: HashMap<String, usize> = HashMap::new();
    let mut old_to_new: HashMap<String, String> = HashMap::new();
    let mut kept: Vec<Table> = Vec::new();
    let mut entries: Vec<RemapEntry> = Vec::new();

    for mut table in tables {
        let name = table
            .title
            .clone()
            .unwrap_or_else(|| base_name(&table.id).to_string());
        let signature = schema_signature(&table);
        let key = (name.clone(), signature.clone());
        match assigned.get(&key) {
            Some(new_id) => {
                old_to_new.insert(table.id.clone(), new_id.clone());
            }
            None => {
                let counter = counters.entry(name.clone()).or_insert(0);
                *counter += 1;
                let new_id = format!("{name}__{counter}");
                if assigned.values().any(|id| *id == new_id) {
                    return Err(CorpusError::DuplicateId { id: new_id });
                }
                assigned.insert(key, new_id.clone());
                entries.push(RemapEntry {
                    name: name.clone(),
                    signature_hash: signature.digest(),
                    new_id: new_id.clone(),
                });
                old_to_new.insert(table.id.clone(), new_id.clone());
                table.id = new_id;
                table.title = Some(name);
                kept.push(table);
            }
        }
    }

    let mut rewritten = Vec::with_capacity(queries.len());
    for query in queries {
        let mut gold_ids = Vec::with_capacity(query.gold_ids.len());
        for gold in &query.gold_ids {
            let new_id = old_to_new
                .get(gold)
                .ok_or_else(|| CorpusError::DanglingGold {
                    qid: query.qid.clone(),
                    gold: gold.clone(),
                })?;
            if !gold_ids.contains(new_id) {
                gold_ids.push(new_id.clone());
            }
        }
        rewritten.push(QueryRecord {
            qid: query.qid.clone(),
            question: query.question.clone(),
            gold_ids,
        });
    }

    Ok(DedupOutcome {
        tables: kept,
        queries: rewritten,
        remap: IdRemap { entries },
    })
}

/// Grouping name for a table without a title. Ids produced by an earlier
/// deduplication pass carry a `__i` suffix that must not stack, so it is
/// stripped here.
fn base_name(id: &str) -> &str {
    if let Some((stem, suffix)) = id.rsplit_once("__") {
        if !stem.is_empty() && !suffix.is_empty() && suffix.chars().all(|c| c.is_ascii_digit()) {
            return stem;
        }
    }
    id
}
