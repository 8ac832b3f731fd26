//! Synthetic question generation and table augmentation.
//!
//! The offline stage turns each partial table into an augmented table: the
//! markdown snippet joined with generated questions (and optionally extracted
//! headers or a generated description). Generation enforces the question
//! count rule (at least ⌈H/2⌉ questions for H extracted headers) and
//! retries malformed replies before accepting.

mod generate;
mod parse;
mod prompt;

pub use generate::{
    generate, generate_batch, generate_description, generate_description_batch, GenOptions,
};
pub use parse::{extract_json, parse_description_strict, parse_json_strict, ExtractionStage};
pub use prompt::{
    build_description_prompt, build_prompt, GenMode, DESCRIPTION_TEMPLATE, FULL_PIPELINE_TEMPLATE,
    QUESTIONS_ONLY_TEMPLATE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;
use crate::table::{title_line, to_markdown, PartialTable};

#[derive(Debug, Error)]
pub enum QgenError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("could not parse reply ({stage}): {message}")]
    ParseFailure { stage: String, message: String },
    #[error("no usable reply after {attempts} attempts; last reply: {last_raw:?}")]
    ExhaustedRetries { attempts: u32, last_raw: String },
    #[error("strategy {strategy} requires {missing}")]
    StrategyMismatch {
        strategy: RepresentationStrategy,
        missing: &'static str,
    },
}

/// How a table is represented in the embedding corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepresentationStrategy {
    /// Partial table markdown only.
    Pt,
    /// Extracted headers only.
    HeaderOnly,
    /// Generated description only.
    DescOnly,
    /// Generated questions only.
    QgOnly,
    /// Partial table plus headers.
    PtPlusHeader,
    /// Partial table plus description.
    PtPlusDesc,
    /// Partial table plus generated questions.
    Qgpt,
}

impl RepresentationStrategy {
    pub const ALL: [RepresentationStrategy; 7] = [
        Self::Pt,
        Self::HeaderOnly,
        Self::DescOnly,
        Self::QgOnly,
        Self::PtPlusHeader,
        Self::PtPlusDesc,
        Self::Qgpt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pt => "pT",
            Self::HeaderOnly => "header-only",
            Self::DescOnly => "desc-only",
            Self::QgOnly => "QG-only",
            Self::PtPlusHeader => "pT+header",
            Self::PtPlusDesc => "pT+desc",
            Self::Qgpt => "QGpT",
        }
    }

    /// Whether building this representation calls the question generator.
    pub fn needs_questions(&self) -> bool {
        matches!(self, Self::QgOnly | Self::Qgpt)
    }

    pub fn needs_headers(&self) -> bool {
        matches!(self, Self::HeaderOnly | Self::PtPlusHeader)
    }

    pub fn needs_description(&self) -> bool {
        matches!(self, Self::DescOnly | Self::PtPlusDesc)
    }
}

impl std::fmt::Display for RepresentationStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RepresentationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.to_lowercase();
        match folded.as_str() {
            "pt" => Ok(Self::Pt),
            "header-only" | "header_only" => Ok(Self::HeaderOnly),
            "desc-only" | "desc_only" => Ok(Self::DescOnly),
            "qg-only" | "qg_only" => Ok(Self::QgOnly),
            "pt+header" | "pt_plus_header" => Ok(Self::PtPlusHeader),
            "pt+desc" | "pt_plus_desc" => Ok(Self::PtPlusDesc),
            "qgpt" => Ok(Self::Qgpt),
            _ => Err(format!("unknown representation strategy {s:?}")),
        }
    }
}

impl Serialize for RepresentationStrategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RepresentationStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A validated generation reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResult {
    /// Extracted headers; empty in questions-only mode.
    pub headers: Vec<String>,
    /// Generated questions, deduplicated preserving order.
    pub questions: Vec<String>,
    /// The original model reply the payload was extracted from.
    pub raw: String,
    pub model_id: String,
    /// Provider calls spent on this result; 0 when served from cache.
    pub attempts: u32,
    /// Set when the count rule still failed after the last retry and the
    /// parseable result was accepted anyway.
    pub under_provisioned: bool,
}

/// Minimum questions required for a given header count: ⌈headers / 2⌉.
pub fn required_questions(headers_count: usize) -> usize {
    headers_count.div_ceil(2)
}

/// The question-count rule. With no known headers any non-empty question
/// list is accepted; an empty list never is.
pub fn validate_count(headers_count: usize, questions: &[String]) -> bool {
    !questions.is_empty() && questions.len() >= required_questions(headers_count)
}

/// Generated parts available for assembling an augmented table.
#[derive(Debug, Clone, Default)]
pub struct GenParts {
    pub questions: Vec<String>,
    pub headers: Vec<String>,
    pub description: Option<String>,
    pub under_provisioned: bool,
}

impl From<GenResult> for GenParts {
    fn from(result: GenResult) -> Self {
        Self {
            questions: result.questions,
            headers: result.headers,
            description: None,
            under_provisioned: result.under_provisioned,
        }
    }
}

/// A partial table joined with its generated enrichments: the unit that
/// gets rendered and embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedTable {
    pub partial: PartialTable,
    pub strategy: RepresentationStrategy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub questions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub under_provisioned: bool,
}

impl AugmentedTable {
    pub fn table_id(&self) -> &str {
        &self.partial.source_id
    }
}

/// Assembles an augmented table from generated parts. The partial table is
/// never modified; only the parts the strategy uses are attached. Errors when
/// a part the strategy requires is missing.
pub fn augment(
    pt: PartialTable,
    parts: GenParts,
    strategy: RepresentationStrategy,
) -> Result<AugmentedTable, QgenError> {
    let mut at = AugmentedTable {
        partial: pt,
        strategy,
        questions: Vec::new(),
        headers: None,
        description: None,
        under_provisioned: false,
    };
    if strategy.needs_questions() {
        let questions = dedup_questions(parts.questions);
        if questions.is_empty() {
            return Err(QgenError::StrategyMismatch {
                strategy,
                missing: "questions",
            });
        }
        at.questions = questions;
        at.under_provisioned = parts.under_provisioned;
        if !parts.headers.is_empty() {
            at.headers = Some(parts.headers);
        }
    } else if strategy.needs_headers() {
        if parts.headers.is_empty() {
            return Err(QgenError::StrategyMismatch {
                strategy,
                missing: "headers",
            });
        }
        at.headers = Some(parts.headers);
    } else if strategy.needs_description() {
        match parts.description {
            Some(d) if !d.trim().is_empty() => at.description = Some(d),
            _ => {
                return Err(QgenError::StrategyMismatch {
                    strategy,
                    missing: "a description",
                })
            }
        }
    }
    Ok(at)
}

fn dedup_questions(questions: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(questions.len());
    for q in questions {
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

/// Deterministic composition of an augmented table into the single text an
/// embedder sees. Grid strategies emit markdown (title controlled by the
/// flag), enrichments follow after a blank line; grid-less strategies emit
/// the optional title line and then one item per line.
pub fn render_for_embedding(at: &AugmentedTable, include_title: bool) -> String {
    let markdown = || to_markdown(&at.partial, include_title);
    let lead = |items: &[String]| -> String {
        let mut lines = Vec::with_capacity(items.len() + 1);
        if include_title {
            if let Some(title) = &at.partial.title {
                lines.push(title_line(title, at.partial.sheet_name.as_deref()));
            }
        }
        lines.extend(items.iter().cloned());
        lines.join("\n")
    };

    match at.strategy {
        RepresentationStrategy::Pt => markdown(),
        RepresentationStrategy::Qgpt => {
            format!("{}\n\n{}", markdown(), at.questions.join("\n"))
        }
        RepresentationStrategy::QgOnly => lead(&at.questions),
        RepresentationStrategy::HeaderOnly => lead(at.headers.as_deref().unwrap_or(&[])),
        RepresentationStrategy::DescOnly => lead(std::slice::from_ref(
            at.description.as_ref().expect("desc-only has description"),
        )),
        RepresentationStrategy::PtPlusHeader => {
            format!(
                "{}\n\n{}",
                markdown(),
                at.headers.as_deref().unwrap_or(&[]).join("\n")
            )
        }
        RepresentationStrategy::PtPlusDesc => {
            format!(
                "{}\n\n{}",
                markdown(),
                at.description.as_deref().expect("pT+desc has description")
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::table::{select_top_rows, Provenance, Row, Table};
    use std::num::NonZeroUsize;

    fn fixture_pt() -> PartialTable {
        let t = Table::new(
            "t1",
            Some("dept".into()),
            None,
            vec![
                Row::from_strs(&["id", "name"]),
                Row::from_strs(&["1", "sales"]),
            ],
            Provenance::inline(),
        )
        .unwrap();
        select_top_rows(&t, NonZeroUsize::new(10).unwrap())
    }

    fn qs(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn count_rule_boundaries() {
        assert!(validate_count(5, &qs(&["a", "b", "c"])));
        assert!(!validate_count(5, &qs(&["a", "b"])));
        assert!(validate_count(0, &qs(&["a"])));
        assert!(!validate_count(0, &qs(&[])));
        assert!(validate_count(4, &qs(&["a", "b"])));
    }

    #[test]
    fn count_rule_matches_formula_for_random_inputs() {
        let mut rng = SplitMix64::new(99);
        for headers in 0..=50usize {
            for _ in 0..8 {
                let n = 1 + rng.next_below(40);
                let questions: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
                assert_eq!(
                    validate_count(headers, &questions),
                    n >= headers.div_ceil(2),
                    "headers={headers} questions={n}"
                );
            }
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for strategy in RepresentationStrategy::ALL {
            let parsed: RepresentationStrategy = strategy.name().parse().unwrap();
            assert_eq!(parsed, strategy);
        }
        assert_eq!(
            "QGpT".parse::<RepresentationStrategy>().unwrap(),
            RepresentationStrategy::Qgpt
        );
        assert!("full-table".parse::<RepresentationStrategy>().is_err());
    }

    #[test]
    fn augment_pt_is_identity() {
        let at = augment(
            fixture_pt(),
            GenParts::default(),
            RepresentationStrategy::Pt,
        )
        .unwrap();
        assert!(at.questions.is_empty());
        assert!(at.headers.is_none());
        assert!(at.description.is_none());
        assert_eq!(at.partial, fixture_pt());
    }

    #[test]
    fn augment_attaches_questions_in_order() {
        let parts = GenParts {
            questions: qs(&["q1", "q2", "q3"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::Qgpt).unwrap();
        assert_eq!(at.questions, qs(&["q1", "q2", "q3"]));
    }

    #[test]
    fn augment_dedupes_questions() {
        let parts = GenParts {
            questions: qs(&["q1", "q1", "q2"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::Qgpt).unwrap();
        assert_eq!(at.questions, qs(&["q1", "q2"]));
    }

    #[test]
    fn augment_rejects_missing_parts() {
        let err = augment(
            fixture_pt(),
            GenParts::default(),
            RepresentationStrategy::Qgpt,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            QgenError::StrategyMismatch {
                missing: "questions",
                ..
            }
        ));
        let err = augment(
            fixture_pt(),
            GenParts::default(),
            RepresentationStrategy::HeaderOnly,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            QgenError::StrategyMismatch {
                missing: "headers",
                ..
            }
        ));
        let err = augment(
            fixture_pt(),
            GenParts::default(),
            RepresentationStrategy::DescOnly,
        )
        .unwrap_err();
        assert!(matches!(err, QgenError::StrategyMismatch { .. }));
    }

    #[test]
    fn render_pt_equals_markdown() {
        let at = augment(
            fixture_pt(),
            GenParts::default(),
            RepresentationStrategy::Pt,
        )
        .unwrap();
        assert_eq!(
            render_for_embedding(&at, false),
            to_markdown(&fixture_pt(), false)
        );
        assert_eq!(
            render_for_embedding(&at, true),
            to_markdown(&fixture_pt(), true)
        );
    }

    #[test]
    fn render_qgpt_golden() {
        let parts = GenParts {
            questions: qs(&["q1", "q2"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::Qgpt).unwrap();
        assert_eq!(
            render_for_embedding(&at, false),
            "| id | name |\n| --- | --- |\n| 1 | sales |\n\nq1\nq2"
        );
    }

    #[test]
    fn render_qgpt_starts_with_partial_markdown() {
        let parts = GenParts {
            questions: qs(&["q1"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::Qgpt).unwrap();
        for flag in [false, true] {
            let rendered = render_for_embedding(&at, flag);
            assert!(rendered.starts_with(&to_markdown(&fixture_pt(), flag)));
        }
    }

    #[test]
    fn render_qg_only_golden() {
        let parts = GenParts {
            questions: qs(&["q1", "q2"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::QgOnly).unwrap();
        assert_eq!(render_for_embedding(&at, true), "dept\nq1\nq2");
        assert_eq!(render_for_embedding(&at, false), "q1\nq2");
    }

    #[test]
    fn render_header_and_desc_variants() {
        let parts = GenParts {
            headers: qs(&["id", "name"]),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::HeaderOnly).unwrap();
        assert_eq!(render_for_embedding(&at, true), "dept\nid\nname");

        let parts = GenParts {
            description: Some("Staff by department.".into()),
            ..Default::default()
        };
        let at = augment(fixture_pt(), parts, RepresentationStrategy::PtPlusDesc).unwrap();
        let rendered = render_for_embedding(&at, false);
        assert!(rendered.ends_with("\n\nStaff by department."));
    }
}
