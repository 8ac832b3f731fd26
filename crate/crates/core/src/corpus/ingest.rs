//! Reading raw table corpora from disk.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::table::{Provenance, Row, SourceFormat, Table};

use super::files::parse_table_record;
use super::CorpusError;

/// Supported on-disk corpus layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Directory of `.csv` files, one table per file.
    CsvDir,
    /// Directory of `.tsv` files, one table per file.
    TsvDir,
    /// Line-delimited records file, one table per line.
    Records,
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv-dir" => Ok(Self::CsvDir),
            "tsv-dir" => Ok(Self::TsvDir),
            "records" => Ok(Self::Records),
            other => Err(format!(
                "unknown corpus format {other:?} (csv-dir, tsv-dir, records)"
            )),
        }
    }
}

/// Bookkeeping from an ingestion pass.
#[derive(Debug, Clone, Default, serde::Serialize, Deserialize)]
pub struct IngestReport {
    pub n_tables: usize,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Reads a corpus into admitted tables. Empty tables are skipped with a
/// warning and counted, never admitted.
pub fn ingest_corpus(
    path: &Path,
    format: CorpusFormat,
) -> Result<(Vec<Table>, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let tables = match format {
        CorpusFormat::CsvDir => ingest_delimited_dir(path, b',', "csv", &mut report)?,
        CorpusFormat::TsvDir => ingest_delimited_dir(path, b'\t', "tsv", &mut report)?,
        CorpusFormat::Records => ingest_records(path, &mut report)?,
    };
    report.n_tables = tables.len();
    Ok((tables, report))
}

fn normalize_newlines(cell: &str) -> String {
    cell.replace("\r\n", "\n").replace('\r', "\n")
}

fn ingest_delimited_dir(
    dir: &Path,
    delimiter: u8,
    extension: &str,
    report: &mut IngestReport,
) -> Result<Vec<Table>, CorpusError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case(extension))
        })
        .collect();
    paths.sort();

    let format = if delimiter == b'\t' {
        SourceFormat::TsvDir
    } else {
        SourceFormat::CsvDir
    };
    let mut seen = HashSet::new();
    let mut tables = Vec::new();
    for path in paths {
        let display = path.display().to_string();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::Parse {
                path: display.clone(),
                line: 0,
                message: "file has no usable name".into(),
            })?;
        if !seen.insert(stem.clone()) {
            return Err(CorpusError::DuplicateId { id: stem });
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .delimiter(delimiter)
            .from_path(&path)
            .map_err(|e| CorpusError::Parse {
                path: display.clone(),
                line: 0,
                message: e.to_string(),
            })?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CorpusError::Parse {
                path: display.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            let cells: Vec<String> = record.iter().map(normalize_newlines).collect();
            rows.push(Row::new(cells));
        }

        let provenance = Provenance {
            source: display,
            format,
        };
        match Table::new(stem.clone(), Some(stem), None, rows, provenance) {
            Ok(table) => tables.push(table),
            Err(_) => {
                report.skipped += 1;
                report
                    .warnings
                    .push(format!("skipped empty table in {}", path.display()));
            }
        }
    }
    Ok(tables)
}

fn ingest_records(path: &Path, report: &mut IngestReport) -> Result<Vec<Table>, CorpusError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path)?;
    let mut seen = HashSet::new();
    let mut tables = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let provenance = Provenance {
            source: display.clone(),
            format: SourceFormat::Records,
        };
        match parse_table_record(line, provenance) {
            Ok(table) => {
                if !seen.insert(table.id.clone()) {
                    return Err(CorpusError::DuplicateId { id: table.id });
                }
                tables.push(table);
            }
            Err(RecordIssue::EmptyTable { id }) => {
                seen.insert(id.clone());
                report.skipped += 1;
                report
                    .warnings
                    .push(format!("skipped empty table {id:?} at {display}:{}", i + 1));
            }
            Err(RecordIssue::Malformed(message)) => {
                return Err(CorpusError::Parse {
                    path: display,
                    line: i + 1,
                    message,
                });
            }
        }
    }
    Ok(tables)
}

/// Why a records line did not produce an admitted table.
pub(super) enum RecordIssue {
    EmptyTable { id: String },
    Malformed(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        f.write_all(content.as_bytes()).unwrap();
    }

    #[test]
    fn csv_dir_one_table_per_file() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "gamma.csv", "p,q\n5,6\n");
        write_file(dir.path(), "beta.csv", "x,y\n3,4\n");
        write_file(dir.path(), "alpha.csv", "a,b\n1,2\n");
        write_file(dir.path(), "notes.txt", "ignored");
        let (tables, report) = ingest_corpus(dir.path(), CorpusFormat::CsvDir).unwrap();
        assert_eq!(report.n_tables, 3);
        assert_eq!(report.skipped, 0);
        // Sorted by filename for stable ids.
        let ids: Vec<&str> = tables.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "beta", "gamma"]);
        assert_eq!(tables[0].title.as_deref(), Some("alpha"));
        assert_eq!(tables[0].rows[1].cells, vec!["1", "2"]);
    }

    #[test]
    fn tsv_dir_uses_tabs() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "t.tsv", "a\tb\n1\t2,5\n");
        let (tables, _) = ingest_corpus(dir.path(), CorpusFormat::TsvDir).unwrap();
        assert_eq!(tables[0].rows[1].cells, vec!["1", "2,5"]);
    }

    #[test]
    fn csv_ragged_rows_kept() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "r.csv", "a,b,c\n1\n");
        let (tables, _) = ingest_corpus(dir.path(), CorpusFormat::CsvDir).unwrap();
        assert_eq!(tables[0].rows[0].cells.len(), 3);
        assert_eq!(tables[0].rows[1].cells.len(), 1);
    }

    #[test]
    fn records_skip_empty_tables() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "corpus.jsonl",
            concat!(
                r#"{"id":"a","title":"a","rows":[["x"],["1"]]}"#,
                "\n",
                r#"{"id":"empty","rows":[]}"#,
                "\n",
            ),
        );
        let (tables, report) =
            ingest_corpus(&dir.path().join("corpus.jsonl"), CorpusFormat::Records).unwrap();
        assert_eq!(tables.len(), 1);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn records_allow_repeated_titles() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "corpus.jsonl",
            concat!(
                r#"{"id":"dept#0","title":"department","rows":[["id","name"]]}"#,
                "\n",
                r#"{"id":"dept#1","title":"department","rows":[["id","name","budget"]]}"#,
                "\n",
            ),
        );
        let (tables, _) =
            ingest_corpus(&dir.path().join("corpus.jsonl"), CorpusFormat::Records).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].title, tables[1].title);
    }

    #[test]
    fn records_reject_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "corpus.jsonl",
            concat!(
                r#"{"id":"same","rows":[["a"]]}"#,
                "\n",
                r#"{"id":"same","rows":[["b"]]}"#,
                "\n",
            ),
        );
        let err =
            ingest_corpus(&dir.path().join("corpus.jsonl"), CorpusFormat::Records).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { id } if id == "same"));
    }

    #[test]
    fn records_parse_error_has_locus() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            dir.path(),
            "corpus.jsonl",
            "{\"id\":\"a\",\"rows\":[[\"x\"]]}\nnot json\n",
        );
        let err =
            ingest_corpus(&dir.path().join("corpus.jsonl"), CorpusFormat::Records).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn cell_newlines_normalized() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "n.csv", "a,\"line1\r\nline2\"\n");
        let (tables, _) = ingest_corpus(dir.path(), CorpusFormat::CsvDir).unwrap();
        assert_eq!(tables[0].rows[0].cells[1], "line1\nline2");
    }
}
