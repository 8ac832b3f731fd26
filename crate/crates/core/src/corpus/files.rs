//! Corpus file formats: table records, query records, manifest.
//!
//! A corpus directory holds `tables.jsonl` (one table record per line),
//! `queries.jsonl`, `manifest.json`, and `remap.jsonl` (one remap entry per
//! line). Table records round-trip losslessly through ingestion.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::table::{Provenance, Row, Table};

use super::ingest::RecordIssue;
use super::{CorpusError, IdRemap, QueryRecord};

#[derive(Debug, Serialize, Deserialize)]
struct TableRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sheet: Option<String>,
    rows: Vec<Vec<String>>,
}

/// Corpus bookkeeping written next to the reconstructed files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub n_tables: usize,
    pub n_queries: usize,
    pub skipped: usize,
    pub remap: Vec<super::RemapEntry>,
}

pub(super) fn parse_table_record(line: &str, provenance: Provenance) -> Result<Table, RecordIssue> {
    let record: TableRecord =
        serde_json::from_str(line).map_err(|e| RecordIssue::Malformed(e.to_string()))?;
    let rows = record.rows.into_iter().map(Row::new).collect();
    Table::new(
        record.id.clone(),
        record.title,
        record.sheet,
        rows,
        provenance,
    )
    .map_err(|_| RecordIssue::EmptyTable { id: record.id })
}

fn table_record_line(table: &Table) -> String {
    let record = TableRecord {
        id: table.id.clone(),
        title: table.title.clone(),
        sheet: table.sheet_name.clone(),
        rows: table.rows.iter().map(|r| r.cells.clone()).collect(),
    };
    serde_json::to_string(&record).expect("table record serializes")
}

/// Writes `tables.jsonl` under `dir`.
pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(fs::File::create(dir.join("tables.jsonl"))?);
    for table in tables {
        writeln!(out, "{}", table_record_line(table))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `tables.jsonl` written by [`write_tables`].
pub fn read_tables(path: &Path) -> Result<Vec<Table>, CorpusError> {
    let (tables, _) = super::ingest_corpus(path, super::CorpusFormat::Records)?;
    Ok(tables)
}

/// Reads query records from a JSONL file. Gold ids are deduplicated
/// preserving order; a query without gold ids is malformed.
pub fn read_queries(path: &Path) -> Result<Vec<QueryRecord>, CorpusError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path)?;
    let mut queries = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut record: QueryRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                path: display.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        let mut seen = Vec::new();
        for gold in record.gold_ids.drain(..) {
            if !seen.contains(&gold) {
                seen.push(gold);
            }
        }
        record.gold_ids = seen;
        if record.gold_ids.is_empty() {
            return Err(CorpusError::Parse {
                path: display,
                line: i + 1,
                message: format!("query {:?} has no gold ids", record.qid),
            });
        }
        queries.push(record);
    }
    Ok(queries)
}

fn write_queries(dir: &Path, queries: &[QueryRecord]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(fs::File::create(dir.join("queries.jsonl"))?);
    for query in queries {
        writeln!(
            out,
            "{}",
            serde_json::to_string(query).expect("query serializes")
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a reconstructed corpus (tables, queries, remap, manifest) under
/// `dir` and returns the manifest. `skipped` carries the ingestion skip
/// count forward.
pub fn write_corpus(
    tables: &[Table],
    queries: &[QueryRecord],
    remap: &IdRemap,
    skipped: usize,
    dir: &Path,
) -> Result<Manifest, CorpusError> {
    fs::create_dir_all(dir)?;
    write_tables(dir, tables)?;
    write_queries(dir, queries)?;

    let mut out = BufWriter::new(fs::File::create(dir.join("remap.jsonl"))?);
    for entry in &remap.entries {
        writeln!(
            out,
            "{}",
            serde_json::to_string(entry).expect("remap entry serializes")
        )?;
    }
    out.flush()?;

    let manifest = Manifest {
        n_tables: tables.len(),
        n_queries: queries.len(),
        skipped,
        remap: remap.entries.clone(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}
