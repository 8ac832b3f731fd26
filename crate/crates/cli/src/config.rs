//! Declarative pipeline configuration.
//!
//! One JSON document drives every stage; unknown keys are rejected so typos
//! fail loudly. Every field has a command-line flag equivalent and flags win
//! over file values. Secrets never appear here; remote providers name the
//! environment variable that holds their key.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use tabret::corpus::CorpusFormat;
use tabret::embed::{EmbedderKind, EmbedderSpec};
use tabret::eval::{IndexParams, MergeStrategy, Method, RecallMode};
use tabret::provider::RetryPolicy;
use tabret::qgen::{GenMode, RepresentationStrategy};

use crate::error::CliError;

fn default_strategy() -> String {
    "QGpT".to_string()
}

fn default_ks() -> Vec<usize> {
    vec![1, 3, 5, 10]
}

fn default_true() -> bool {
    true
}

fn default_temperature() -> f32 {
    0.2
}

fn default_max_attempts() -> u32 {
    3
}

fn default_dim() -> usize {
    384
}

fn default_max_tokens() -> usize {
    256
}

fn default_batch_size() -> usize {
    32
}

fn default_nlist() -> usize {
    256
}

fn default_nprobe() -> usize {
    16
}

fn default_seed() -> u64 {
    42
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    pub format: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub top_k_rows: Option<usize>,
    pub token_budget: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: String,
    pub base_url: Option<String>,
    pub model: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f32,
    pub api_key_env: Option<String>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            kind: "mock".into(),
            base_url: None,
            model: None,
            temperature: default_temperature(),
            api_key_env: None,
            max_attempts: default_max_attempts(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSection {
    pub kind: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub query_prefix: String,
    #[serde(default)]
    pub doc_prefix: String,
}

impl Default for EmbedderSection {
    fn default() -> Self {
        Self {
            kind: "mock_dense".into(),
            dim: default_dim(),
            seed: 0,
            max_tokens: default_max_tokens(),
            batch_size: default_batch_size(),
            base_url: None,
            model: None,
            api_key_env: None,
            query_prefix: String::new(),
            doc_prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    #[serde(default = "default_nlist")]
    pub nlist: usize,
    #[serde(default = "default_nprobe")]
    pub nprobe: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            nlist: default_nlist(),
            nprobe: default_nprobe(),
            seed: default_seed(),
        }
    }
}

/// The raw config file, exactly as written on disk.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub run_dir: PathBuf,
    pub corpus: CorpusSection,
    pub queries: Option<PathBuf>,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    pub method: Option<String>,
    #[serde(default)]
    pub generation_mode: Option<String>,
    #[serde(default = "default_true")]
    pub include_title_embedding: bool,
    #[serde(default = "default_true")]
    pub include_title_generation: bool,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub embedder: EmbedderSection,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub recall_mode: Option<String>,
    #[serde(default)]
    pub merge: Option<String>,
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Command-line overrides; every config field that steers a run has one.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long, global = true, help = "Run directory for artifacts")]
    pub run_dir: Option<PathBuf>,
    #[arg(long, global = true, help = "Corpus path (file or directory)")]
    pub corpus_path: Option<PathBuf>,
    #[arg(long, global = true, help = "Corpus format: csv-dir, tsv-dir, records")]
    pub corpus_format: Option<String>,
    #[arg(long, global = true, help = "Query records file (JSONL)")]
    pub queries: Option<PathBuf>,
    #[arg(long, global = true, help = "Representation strategy (pT, QGpT, ...)")]
    pub strategy: Option<String>,
    #[arg(
        long,
        global = true,
        help = "Benchmark method (pT, QGpT, MTR, MTR+QGpT, ...)"
    )]
    pub method: Option<String>,
    #[arg(long, global = true, help = "Generation mode: full or questions_only")]
    pub generation_mode: Option<String>,
    #[arg(long, global = true, help = "Partial table row prefix length")]
    pub top_k_rows: Option<usize>,
    #[arg(
        long,
        global = true,
        help = "Partial table token budget (alternative to rows)"
    )]
    pub token_budget: Option<usize>,
    #[arg(long, global = true, help = "Embed table titles (corpus side)")]
    pub include_title_embedding: Option<bool>,
    #[arg(long, global = true, help = "Show table titles to the generator")]
    pub include_title_generation: Option<bool>,
    #[arg(long, global = true, help = "IVF posting lists")]
    pub nlist: Option<usize>,
    #[arg(long, global = true, help = "IVF lists probed per search")]
    pub nprobe: Option<usize>,
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        help = "Recall cutoffs, comma separated"
    )]
    pub ks: Option<Vec<usize>>,
    #[arg(long, global = true, help = "Global seed (index k-means)")]
    pub seed: Option<u64>,
    #[arg(long, global = true, help = "Generation cache directory")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true, help = "Worker pool size for generation")]
    pub concurrency: Option<usize>,
    #[arg(long, global = true, help = "Recall definition: partial or all_gold")]
    pub recall_mode: Option<String>,
    #[arg(
        long,
        global = true,
        help = "Sub-query merge: max_score or round_robin"
    )]
    pub merge: Option<String>,
    #[arg(long, global = true, help = "Generator kind: mock or http")]
    pub generator_kind: Option<String>,
    #[arg(
        long,
        global = true,
        help = "Embedder kind: mock_dense, mock_multi, remote_dense, remote_multi"
    )]
    pub embedder_kind: Option<String>,
    #[arg(long, global = true, help = "Embedding dimension")]
    pub embedder_dim: Option<usize>,
    #[arg(long, global = true, help = "Mock embedder seed")]
    pub embedder_seed: Option<u64>,
}

/// Row selection for partial tables.
#[derive(Debug, Clone, Copy)]
pub enum Selection {
    TopKRows(NonZeroUsize),
    TokenBudget(NonZeroUsize),
}

/// Generator backend choice.
#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Mock,
    Http {
        base_url: String,
        model: String,
        temperature: f32,
        api_key_env: String,
    },
}

/// A validated, fully-typed pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub run_dir: PathBuf,
    pub corpus_path: PathBuf,
    pub corpus_format: CorpusFormat,
    pub queries: Option<PathBuf>,
    pub selection: Selection,
    pub strategy: RepresentationStrategy,
    pub method: Method,
    pub generation_mode: GenMode,
    pub include_title_embedding: bool,
    pub include_title_generation: bool,
    pub generator: GeneratorKind,
    pub retry: RetryPolicy,
    pub embedder: EmbedderSpec,
    pub index: IndexParams,
    pub ks: Vec<usize>,
    pub recall_mode: RecallMode,
    pub merge: MergeStrategy,
    pub cache_dir: Option<PathBuf>,
    pub concurrency: usize,
}

fn bad_config(message: impl Into<String>) -> CliError {
    CliError::new("config", message)
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| bad_config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&content).map_err(|e| bad_config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(v) = &overrides.run_dir {
            self.run_dir = v.clone();
        }
        if let Some(v) = &overrides.corpus_path {
            self.corpus.path = v.clone();
        }
        if let Some(v) = &overrides.corpus_format {
            self.corpus.format = v.clone();
        }
        if let Some(v) = &overrides.queries {
            self.queries = Some(v.clone());
        }
        if let Some(v) = &overrides.strategy {
            self.strategy = v.clone();
        }
        if let Some(v) = &overrides.method {
            self.method = Some(v.clone());
        }
        if let Some(v) = &overrides.generation_mode {
            self.generation_mode = Some(v.clone());
        }
        if let Some(v) = overrides.top_k_rows {
            self.selection.top_k_rows = Some(v);
            self.selection.token_budget = None;
        }
        if let Some(v) = overrides.token_budget {
            self.selection.token_budget = Some(v);
            self.selection.top_k_rows = None;
        }
        if let Some(v) = overrides.include_title_embedding {
            self.include_title_embedding = v;
        }
        if let Some(v) = overrides.include_title_generation {
            self.include_title_generation = v;
        }
        if let Some(v) = overrides.nlist {
            self.index.nlist = v;
        }
        if let Some(v) = overrides.nprobe {
            self.index.nprobe = v;
        }
        if let Some(v) = &overrides.ks {
            self.ks = v.clone();
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
            self.index.seed = v;
        }
        if let Some(v) = &overrides.cache_dir {
            self.cache_dir = Some(v.clone());
        }
        if let Some(v) = overrides.concurrency {
            self.concurrency = v;
        }
        if let Some(v) = &overrides.recall_mode {
            self.recall_mode = Some(v.clone());
        }
        if let Some(v) = &overrides.merge {
            self.merge = Some(v.clone());
        }
        if let Some(v) = &overrides.generator_kind {
            self.generator.kind = v.clone();
        }
        if let Some(v) = &overrides.embedder_kind {
            self.embedder.kind = v.clone();
        }
        if let Some(v) = overrides.embedder_dim {
            self.embedder.dim = v;
        }
        if let Some(v) = overrides.embedder_seed {
            self.embedder.seed = v;
        }
    }

    /// Validates and types every field.
    pub fn resolve(self) -> Result<PipelineConfig, CliError> {
        let corpus_format: CorpusFormat = self.corpus.format.parse().map_err(bad_config)?;

        let selection = match (self.selection.top_k_rows, self.selection.token_budget) {
            (Some(_), Some(_)) => {
                return Err(bad_config(
                    "selection: set top_k_rows or token_budget, not both",
                ))
            }
            (None, Some(budget)) => Selection::TokenBudget(
                NonZeroUsize::new(budget).ok_or_else(|| bad_config("token_budget must be >= 1"))?,
            ),
            (rows, None) => Selection::TopKRows(
                NonZeroUsize::new(rows.unwrap_or(10))
                    .ok_or_else(|| bad_config("top_k_rows must be >= 1"))?,
            ),
        };

        let strategy: RepresentationStrategy = self.strategy.parse().map_err(bad_config)?;
        let method: Method = match &self.method {
            Some(m) => m.parse().map_err(bad_config)?,
            None => Method {
                strategy,
                decompose: false,
            },
        };
        if method.strategy != strategy {
            return Err(bad_config(format!(
                "method {} needs a corpus built under strategy {}, but strategy is {}",
                method.name(),
                method.strategy.name(),
                strategy.name()
            )));
        }

        let generation_mode = match self.generation_mode.as_deref() {
            None | Some("full") | Some("full_pipeline") => GenMode::FullPipeline,
            Some("questions_only") | Some("questions-only") => GenMode::QuestionsOnly,
            Some(other) => return Err(bad_config(format!("unknown generation_mode {other:?}"))),
        };

        let generator = match self.generator.kind.as_str() {
            "mock" => GeneratorKind::Mock,
            "http" => GeneratorKind::Http {
                base_url: self
                    .generator
                    .base_url
                    .clone()
                    .ok_or_else(|| bad_config("generator.base_url required for kind http"))?,
                model: self
                    .generator
                    .model
                    .clone()
                    .ok_or_else(|| bad_config("generator.model required for kind http"))?,
                temperature: self.generator.temperature,
                api_key_env: self
                    .generator
                    .api_key_env
                    .clone()
                    .unwrap_or_else(|| "OPENAI_API_KEY".to_string()),
            },
            other => return Err(bad_config(format!("unknown generator kind {other:?}"))),
        };

        let embedder_kind = match self.embedder.kind.as_str() {
            "mock_dense" => EmbedderKind::MockDense,
            "mock_multi" => EmbedderKind::MockMulti,
            "remote_dense" => EmbedderKind::RemoteDense,
            "remote_multi" => EmbedderKind::RemoteMulti,
            other => return Err(bad_config(format!("unknown embedder kind {other:?}"))),
        };
        if matches!(
            embedder_kind,
            EmbedderKind::RemoteDense | EmbedderKind::RemoteMulti
        ) && (self.embedder.base_url.is_none() || self.embedder.model.is_none())
        {
            return Err(bad_config(
                "remote embedders need embedder.base_url and embedder.model",
            ));
        }
        let embedder = EmbedderSpec {
            kind: embedder_kind,
            dim: self.embedder.dim,
            seed: self.embedder.seed,
            max_tokens: self.embedder.max_tokens,
            batch_size: self.embedder.batch_size,
            base_url: self.embedder.base_url,
            model: self.embedder.model,
            api_key_env: self.embedder.api_key_env,
            query_prefix: self.embedder.query_prefix,
            doc_prefix: self.embedder.doc_prefix,
        };
        if embedder.dim == 0 {
            return Err(bad_config("embedder.dim must be >= 1"));
        }

        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(bad_config("ks must be non-empty and positive"));
        }
        if self.index.nlist == 0 || self.index.nprobe == 0 {
            return Err(bad_config("index.nlist and index.nprobe must be >= 1"));
        }

        let recall_mode = match self.recall_mode.as_deref() {
            None | Some("partial") | Some("partial_credit") => RecallMode::PartialCredit,
            Some("all_gold") => RecallMode::AllGold,
            Some(other) => return Err(bad_config(format!("unknown recall_mode {other:?}"))),
        };
        let merge = match self.merge.as_deref() {
            None | Some("max_score") => MergeStrategy::MaxScore,
            Some("round_robin") => MergeStrategy::RoundRobin,
            Some(other) => return Err(bad_config(format!("unknown merge {other:?}"))),
        };

        Ok(PipelineConfig {
            run_dir: self.run_dir,
            corpus_path: self.corpus.path,
            corpus_format,
            queries: self.queries,
            selection,
            strategy,
            method,
            generation_mode,
            include_title_embedding: self.include_title_embedding,
            include_title_generation: self.include_title_generation,
            generator,
            retry: RetryPolicy {
                max_attempts: self.generator.max_attempts,
            },
            embedder,
            index: IndexParams {
                nlist: self.index.nlist,
                nprobe: self.index.nprobe,
                seed: self.index.seed,
            },
            ks: self.ks,
            recall_mode,
            merge,
            cache_dir: self.cache_dir,
            concurrency: self.concurrency.max(1),
        })
    }
}
