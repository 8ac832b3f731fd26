//! Vector store file: line-delimited records, dense or multi.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qgen::RepresentationStrategy;

use super::{DenseVector, EmbedError, MultiVector};

/// One embedded corpus entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorRecord {
    Dense {
        table_id: String,
        strategy: RepresentationStrategy,
        dim: usize,
        values: Vec<f32>,
    },
    Multi {
        table_id: String,
        strategy: RepresentationStrategy,
        dim: usize,
        token_values: Vec<Vec<f32>>,
    },
}

impl VectorRecord {
    pub fn dense(table_id: String, strategy: RepresentationStrategy, vector: &DenseVector) -> Self {
        Self::Dense {
            table_id,
            strategy,
            dim: vector.dim(),
            values: vector.as_slice().to_vec(),
        }
    }

    pub fn multi(table_id: String, strategy: RepresentationStrategy, vector: &MultiVector) -> Self {
        Self::Multi {
            table_id,
            strategy,
            dim: vector.dim(),
            token_values: vector
                .token_vectors()
                .iter()
                .map(|v| v.as_slice().to_vec())
                .collect(),
        }
    }

    pub fn table_id(&self) -> &str {
        match self {
            Self::Dense { table_id, .. } | Self::Multi { table_id, .. } => table_id,
        }
    }

    pub fn into_dense(self) -> Option<(String, DenseVector)> {
        match self {
            Self::Dense {
                table_id, values, ..
            } => Some((table_id, DenseVector::new(values))),
            Self::Multi { .. } => None,
        }
    }

    pub fn into_multi(self) -> Option<(String, MultiVector)> {
        match self {
            Self::Multi {
                table_id,
                token_values,
                ..
            } => {
                let vectors = token_values.into_iter().map(DenseVector::new).collect();
                MultiVector::new(vectors).ok().map(|mv| (table_id, mv))
            }
            Self::Dense { .. } => None,
        }
    }
}

pub fn write_vector_store(path: &Path, records: &[VectorRecord]) -> Result<(), EmbedError> {
    let file = fs::File::create(path).map_err(|e| EmbedError::Provider(e.to_string()))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("vector record serializes");
        writeln!(out, "{line}").map_err(|e| EmbedError::Provider(e.to_string()))?;
    }
    out.flush().map_err(|e| EmbedError::Provider(e.to_string()))
}

pub fn read_vector_store(path: &Path) -> Result<Vec<VectorRecord>, EmbedError> {
    let content = fs::read_to_string(path).map_err(|e| EmbedError::Provider(e.to_string()))?;
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| serde_json::from_str(line).map_err(|e| EmbedError::Provider(e.to_string())))
        .collect()
}
