//! Table model, partial-table selection, and markdown serialization.
//!
//! A [`Table`] is an ordered grid of verbatim cell values; rows may be ragged.
//! Retrieval never embeds whole tables: [`select_top_rows`] or
//! [`truncate_by_tokens`] cuts a [`PartialTable`] prefix, and [`to_markdown`]
//! turns it into the pipe-delimited text fed to generation and embedding.
//!
//! Markdown dialect: the first row doubles as the header row, a `---`
//! separator row follows it, ragged rows are padded with empty cells to the
//! widest row, and cell bytes are emitted verbatim (no escaping; `|` inside
//! a cell stays `|`). When a title is rendered it is the first line, as
//! `title / sheet` when a sheet name is present.

use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::{ApproxTokenizer, Tokenizer};

pub use crate::tokenize::count_tokens;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table {id:?} has no rows")]
    EmptyTable { id: String },
    #[error("token budget {budget} too small: first row alone serializes to {needed} tokens")]
    BudgetTooSmall { budget: usize, needed: usize },
}

/// Where a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    CsvDir,
    TsvDir,
    Records,
    /// Built in memory (tests, synthetic corpora).
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub format: SourceFormat,
}

impl Provenance {
    pub fn inline() -> Self {
        Self {
            source: String::from("<inline>"),
            format: SourceFormat::Inline,
        }
    }
}

/// One table row; cell values are stored verbatim apart from newline
/// normalization at ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Row {
    pub cells: Vec<String>,
}

impl Row {
    pub fn new(cells: Vec<String>) -> Self {
        Self { cells }
    }

    pub fn from_strs(cells: &[&str]) -> Self {
        Self {
            cells: cells.iter().map(|c| c.to_string()).collect(),
        }
    }
}

/// A source table admitted to a corpus: non-empty, rows possibly ragged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub title: Option<String>,
    pub sheet_name: Option<String>,
    pub rows: Vec<Row>,
    pub provenance: Provenance,
}

impl Table {
    /// Admits a table, rejecting empty ones. Rows without cells are dropped
    /// first; a table whose rows all vanish is empty.
    pub fn new(
        id: impl Into<String>,
        title: Option<String>,
        sheet_name: Option<String>,
        rows: Vec<Row>,
        provenance: Provenance,
    ) -> Result<Self, TableError> {
        let id = id.into();
        let rows: Vec<Row> = rows.into_iter().filter(|r| !r.cells.is_empty()).collect();
        if rows.is_empty() {
            return Err(TableError::EmptyTable { id });
        }
        Ok(Self {
            id,
            title,
            sheet_name,
            rows,
            provenance,
        })
    }

    /// Content equality, ignoring provenance. Used for round-trip checks:
    /// corpus files do not store provenance.
    pub fn content_eq(&self, other: &Table) -> bool {
        self.id == other.id
            && self.title == other.title
            && self.sheet_name == other.sheet_name
            && self.rows == other.rows
    }
}

/// How a partial table was cut from its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    TopKRows(usize),
    TokenBudget(usize),
}

/// A row prefix of a source table, the unit that gets augmented and embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialTable {
    pub source_id: String,
    pub title: Option<String>,
    pub sheet_name: Option<String>,
    pub rows: Vec<Row>,
    pub strategy: SelectionStrategy,
}

/// Takes the first `min(k, |rows|)` rows of `table`, in order.
pub fn select_top_rows(table: &Table, k: NonZeroUsize) -> PartialTable {
    let take = k.get().min(table.rows.len());
    PartialTable {
        source_id: table.id.clone(),
        title: table.title.clone(),
        sheet_name: table.sheet_name.clone(),
        rows: table.rows[..take].to_vec(),
        strategy: SelectionStrategy::TopKRows(k.get()),
    }
}

/// Greedy whole-row prefix packing: keeps rows `1..m` where `m` is maximal
/// such that the serialized markdown fits `budget` tokens under the reference
/// tokenizer. Errors when even the first row exceeds the budget.
pub fn truncate_by_tokens(
    table: &Table,
    budget: NonZeroUsize,
    include_title: bool,
) -> Result<PartialTable, TableError> {
    truncate_by_tokens_with(&ApproxTokenizer, table, budget, include_title)
}

/// [`truncate_by_tokens`] with a caller-supplied tokenizer.
pub fn truncate_by_tokens_with(
    tokenizer: &dyn Tokenizer,
    table: &Table,
    budget: NonZeroUsize,
    include_title: bool,
) -> Result<PartialTable, TableError> {
    let budget = budget.get();
    let mut pt = PartialTable {
        source_id: table.id.clone(),
        title: table.title.clone(),
        sheet_name: table.sheet_name.clone(),
        rows: Vec::new(),
        strategy: SelectionStrategy::TokenBudget(budget),
    };
    let mut kept = 0;
    // Adding a row only ever adds tokens (its own cells plus any padding it
    // forces on earlier rows), so the first prefix that overflows ends the
    // scan.
    for m in 1..=table.rows.len() {
        pt.rows = table.rows[..m].to_vec();
        let used = tokenizer.count(&to_markdown(&pt, include_title));
        if used <= budget {
            kept = m;
        } else {
            break;
        }
    }
    if kept == 0 {
        pt.rows = table.rows[..1].to_vec();
        let needed = tokenizer.count(&to_markdown(&pt, include_title));
        return Err(TableError::BudgetTooSmall { budget, needed });
    }
    pt.rows = table.rows[..kept].to_vec();
    Ok(pt)
}

/// Title line rendered ahead of the grid (and ahead of grid-less
/// representations): the title alone, or `title / sheet`.
pub fn title_line(title: &str, sheet_name: Option<&str>) -> String {
    match sheet_name {
        Some(sheet) => format!("{title} / {sheet}"),
        None => title.to_string(),
    }
}

/// Serializes a partial table to pipe-delimited markdown. Pure and
/// byte-stable: identical inputs produce identical output.
pub fn to_markdown(pt: &PartialTable, include_title: bool) -> String {
    let width = pt.rows.iter().map(|r| r.cells.len()).max().unwrap_or(0);
    let mut lines = Vec::with_capacity(pt.rows.len() + 2);
    if include_title {
        if let Some(title) = &pt.title {
            lines.push(title_line(title, pt.sheet_name.as_deref()));
        }
    }
    for (i, row) in pt.rows.iter().enumerate() {
        let mut cells: Vec<&str> = row.cells.iter().map(String::as_str).collect();
        cells.resize(width, "");
        lines.push(format!("| {} |", cells.join(" | ")));
        if i == 0 {
            lines.push(format!("| {} |", vec!["---"; width].join(" | ")));
        }
    }
    lines.join("\n")
}
