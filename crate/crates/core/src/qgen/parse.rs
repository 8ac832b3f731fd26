//! Strict JSON extraction from model replies.
//!
//! Providers are instructed to return bare JSON but routinely wrap it in
//! prose or code fences. Extraction tries, in order: the whole reply, the
//! first fenced code block, then the first balanced-brace substring that
//! parses. The extracted object is then validated against the expected
//! payload shape; any failure records the stage it happened at.

use serde_json::Value;

use super::prompt::GenMode;
use super::{GenResult, QgenError};

/// Where in the reply the JSON payload was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionStage {
    Whole,
    FencedBlock,
    BalancedBraces,
}

impl std::fmt::Display for ExtractionStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Whole => "whole-string",
            Self::FencedBlock => "fenced-block",
            Self::BalancedBraces => "balanced-braces",
        };
        f.write_str(name)
    }
}

/// Pulls the first JSON value out of a raw reply.
pub fn extract_json(raw: &str) -> Result<(Value, ExtractionStage), QgenError> {
    let trimmed = raw.trim();
    if let Ok(value) = serde_json::from_str::<Value>(trimmed) {
        return Ok((value, ExtractionStage::Whole));
    }
    if let Some(block) = first_fenced_block(raw) {
        if let Ok(value) = serde_json::from_str::<Value>(block.trim()) {
            return Ok((value, ExtractionStage::FencedBlock));
        }
    }
    if let Some(value) = first_parsable_object(raw) {
        return Ok((value, ExtractionStage::BalancedBraces));
    }
    Err(QgenError::ParseFailure {
        stage: "extraction".into(),
        message: "no JSON value found in reply".into(),
    })
}

fn first_fenced_block(raw: &str) -> Option<&str> {
    let open = raw.find("```")?;
    let after_fence = &raw[open + 3..];
    // Skip an optional language tag on the opening fence line.
    let body_start = after_fence.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after_fence[body_start..];
    let close = body.find("```")?;
    Some(&body[..close])
}

/// First balanced `{...}` substring (string-aware brace matching) that
/// parses as JSON. Candidate starts are scanned left to right.
fn first_parsable_object(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    let mut search_from = 0;
    while let Some(offset) = raw[search_from..].find('{') {
        let start = search_from + offset;
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(value) = serde_json::from_str::<Value>(&raw[start..end]) {
                return Some(value);
            }
        }
        search_from = start + 1;
    }
    None
}

fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn string_list(
    value: &Value,
    field: &str,
    stage: ExtractionStage,
) -> Result<Vec<String>, QgenError> {
    let array =
        value
            .get(field)
            .and_then(Value::as_array)
            .ok_or_else(|| QgenError::ParseFailure {
                stage: stage.to_string(),
                message: format!("field {field:?} missing or not a list"),
            })?;
    let mut out = Vec::with_capacity(array.len());
    for item in array {
        let s = item.as_str().ok_or_else(|| QgenError::ParseFailure {
            stage: stage.to_string(),
            message: format!("field {field:?} contains a non-string element"),
        })?;
        let s = s.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    }
    Ok(out)
}

fn dedup_preserving_order(items: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(items.len());
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// Parses a generation reply into headers and questions, enforcing the
/// payload shape for `mode`. Questions are deduplicated preserving order and
/// must be non-empty; full-pipeline replies must also carry headers.
pub fn parse_json_strict(raw: &str, mode: GenMode) -> Result<GenResult, QgenError> {
    let (value, stage) = extract_json(raw)?;
    if !value.is_object() {
        return Err(QgenError::ParseFailure {
            stage: stage.to_string(),
            message: "reply JSON is not an object".into(),
        });
    }

    let questions = dedup_preserving_order(string_list(&value, "questions", stage)?);
    if questions.is_empty() {
        return Err(QgenError::ParseFailure {
            stage: stage.to_string(),
            message: "no usable questions in reply".into(),
        });
    }

    let headers = match mode {
        GenMode::FullPipeline => {
            let headers = string_list(&value, "headers", stage)?;
            if headers.is_empty() {
                return Err(QgenError::ParseFailure {
                    stage: stage.to_string(),
                    message: "no usable headers in reply".into(),
                });
            }
            headers
        }
        GenMode::QuestionsOnly => match value.get("headers") {
            Some(_) => string_list(&value, "headers", stage)?,
            None => Vec::new(),
        },
    };

    Ok(GenResult {
        headers,
        questions,
        raw: raw.to_string(),
        model_id: String::new(),
        attempts: 0,
        under_provisioned: false,
    })
}

/// Parses a description reply: a single non-empty `description` string.
pub fn parse_description_strict(raw: &str) -> Result<String, QgenError> {
    let (value, stage) = extract_json(raw)?;
    let description = value
        .get("description")
        .and_then(Value::as_str)
        .map(str::trim)
        .ok_or_else(|| QgenError::ParseFailure {
            stage: stage.to_string(),
            message: "field \"description\" missing or not a string".into(),
        })?;
    if description.is_empty() {
        return Err(QgenError::ParseFailure {
            stage: stage.to_string(),
            message: "empty description".into(),
        });
    }
    Ok(description.to_string())
}
