//! Pipeline stage implementations.
//!
//! Every stage reads persisted artifacts from the run directory and writes
//! its own, so any stage can be re-run without recomputing the ones before
//! it. Structured logs go to stderr (one `stage=... k=v ...` line per
//! stage); command output proper goes to stdout.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use tabret::cache::GenerationCache;
use tabret::corpus::{
    deduplicate, ingest_corpus, read_queries, read_tables, write_corpus, write_tables,
};
use tabret::embed::{read_vector_store, write_vector_store, DenseVector, VectorRecord};
use tabret::eval::{mtr_decompose, mtr_merge, recall_at_k};
use tabret::index::{build_ivf, load_index, save_index, MultiIndex, SearchResult};
use tabret::provider::{ChatCompletionClient, MockTextGen, ProviderError, TextGenProvider};
use tabret::qgen::{
    augment, generate_batch, generate_description_batch, render_for_embedding, AugmentedTable,
    GenMode, GenOptions, GenParts,
};
use tabret::table::{select_top_rows, truncate_by_tokens, PartialTable, Table};

use crate::config::{GeneratorKind, PipelineConfig, Selection};
use crate::error::CliError;

fn raw_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.run_dir.join("raw")
}

fn corpus_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.run_dir.join("corpus")
}

fn augmented_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.run_dir.join("augmented.jsonl")
}

fn vectors_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.run_dir.join("vectors.jsonl")
}

fn index_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.run_dir.join("index.bin")
}

fn log_stage(stage: &str, started: Instant, fields: &[(&str, String)]) {
    let mut line = format!("stage={stage}");
    for (key, value) in fields {
        line.push_str(&format!(" {key}={value}"));
    }
    line.push_str(&format!(" elapsed_ms={}", started.elapsed().as_millis()));
    eprintln!("{line}");
}

/// Records stage outputs in `run_manifest.json`; no timestamps, so repeated
/// identical runs leave identical bytes.
fn update_manifest(run_dir: &Path, stage: &str, entry: serde_json::Value) -> Result<(), CliError> {
    let path = run_dir.join("run_manifest.json");
    let mut manifest: BTreeMap<String, serde_json::Value> = match fs::read_to_string(&path) {
        Ok(content) => serde_json::from_str(&content)
            .map_err(|e| CliError::new("io", format!("corrupt run manifest: {e}")))?,
        Err(_) => BTreeMap::new(),
    };
    manifest.insert(stage.to_string(), entry);
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

/// Counts provider calls so cache behavior shows up in the logs.
struct CountingProvider<'a> {
    inner: &'a dyn TextGenProvider,
    calls: AtomicU64,
}

impl<'a> CountingProvider<'a> {
    fn new(inner: &'a dyn TextGenProvider) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextGenProvider for CountingProvider<'_> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }
}

fn build_generator(cfg: &PipelineConfig) -> Result<Box<dyn TextGenProvider>, CliError> {
    match &cfg.generator {
        GeneratorKind::Mock => Ok(Box::new(MockTextGen::new())),
        GeneratorKind::Http {
            base_url,
            model,
            temperature,
            api_key_env,
        } => Ok(Box::new(ChatCompletionClient::new(
            base_url.clone(),
            model.clone(),
            *temperature,
            api_key_env,
        )?)),
    }
}

fn open_cache(cfg: &PipelineConfig) -> Result<Option<GenerationCache>, CliError> {
    match &cfg.cache_dir {
        Some(dir) => Ok(Some(GenerationCache::new(dir)?)),
        None => Ok(None),
    }
}

fn select_partial(cfg: &PipelineConfig, table: &Table) -> Result<PartialTable, CliError> {
    match cfg.selection {
        Selection::TopKRows(k) => Ok(select_top_rows(table, k)),
        Selection::TokenBudget(budget) => Ok(truncate_by_tokens(
            table,
            budget,
            cfg.include_title_embedding,
        )?),
    }
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let (tables, report) = ingest_corpus(&cfg.corpus_path, cfg.corpus_format)?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    fs::create_dir_all(cfg.run_dir.as_path())?;
    write_tables(&raw_dir(cfg), &tables)?;
    fs::write(
        raw_dir(cfg).join("ingest_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    update_manifest(
        &cfg.run_dir,
        "ingest",
        serde_json::json!({"n_tables": report.n_tables, "skipped": report.skipped, "artifact": "raw/tables.jsonl"}),
    )?;
    log_stage(
        "ingest",
        started,
        &[
            ("n_tables", report.n_tables.to_string()),
            ("skipped", report.skipped.to_string()),
        ],
    );
    Ok(())
}

pub fn cmd_dedup(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let tables = read_tables(&raw_dir(cfg).join("tables.jsonl"))?;
    let n_raw = tables.len();
    let queries = match &cfg.queries {
        Some(path) => read_queries(path)?,
        None => Vec::new(),
    };
    let skipped = read_ingest_skipped(cfg);
    let outcome = deduplicate(tables, &queries)?;
    let manifest = write_corpus(
        &outcome.tables,
        &outcome.queries,
        &outcome.remap,
        skipped,
        &corpus_dir(cfg),
    )?;
    update_manifest(
        &cfg.run_dir,
        "dedup",
        serde_json::json!({
            "n_raw": n_raw,
            "n_tables": manifest.n_tables,
            "n_queries": manifest.n_queries,
            "artifact": "corpus/",
        }),
    )?;
    log_stage(
        "dedup",
        started,
        &[
            ("n_raw", n_raw.to_string()),
            ("n_tables", manifest.n_tables.to_string()),
            ("n_queries", manifest.n_queries.to_string()),
        ],
    );
    Ok(())
}

fn read_ingest_skipped(cfg: &PipelineConfig) -> usize {
    fs::read_to_string(raw_dir(cfg).join("ingest_report.json"))
        .ok()
        .and_then(|content| serde_json::from_str::<serde_json::Value>(&content).ok())
        .and_then(|v| v["skipped"].as_u64())
        .unwrap_or(0) as usize
}

pub fn cmd_augment(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let tables = read_tables(&corpus_dir(cfg).join("tables.jsonl"))?;
    let partials: Vec<PartialTable> = tables
        .iter()
        .map(|t| select_partial(cfg, t))
        .collect::<Result<_, _>>()?;

    let strategy = cfg.strategy;
    let cache = open_cache(cfg)?;
    let mut provider_calls = 0u64;

    let parts: Vec<GenParts> = if strategy.needs_questions() || strategy.needs_headers() {
        // Header strategies need the extraction arm of the full pipeline.
        let mode = if strategy.needs_headers() {
            GenMode::FullPipeline
        } else {
            cfg.generation_mode
        };
        let opts = GenOptions {
            mode,
            include_title: cfg.include_title_generation,
            policy: cfg.retry,
        };
        let generator = build_generator(cfg)?;
        let counting = CountingProvider::new(generator.as_ref());
        let results = generate_batch(&partials, &counting, &opts, cache.as_ref(), cfg.concurrency)?;
        provider_calls = counting.calls();
        results.into_iter().map(GenParts::from).collect()
    } else if strategy.needs_description() {
        let opts = GenOptions {
            mode: GenMode::FullPipeline,
            include_title: cfg.include_title_generation,
            policy: cfg.retry,
        };
        let generator = build_generator(cfg)?;
        let counting = CountingProvider::new(generator.as_ref());
        let descriptions = generate_description_batch(
            &partials,
            &counting,
            &opts,
            cache.as_ref(),
            cfg.concurrency,
        )?;
        provider_calls = counting.calls();
        descriptions
            .into_iter()
            .map(|d| GenParts {
                description: Some(d),
                ..Default::default()
            })
            .collect()
    } else {
        partials.iter().map(|_| GenParts::default()).collect()
    };

    let mut under_provisioned = 0usize;
    let file = fs::File::create(augmented_path(cfg))?;
    let mut out = BufWriter::new(file);
    let n_tables = partials.len();
    for (pt, parts) in partials.into_iter().zip(parts) {
        let at = augment(pt, parts, strategy)?;
        if at.under_provisioned {
            under_provisioned += 1;
        }
        writeln!(
            out,
            "{}",
            serde_json::to_string(&at).expect("augmented table serializes")
        )?;
    }
    out.flush()?;

    update_manifest(
        &cfg.run_dir,
        "augment",
        serde_json::json!({
            "n_tables": n_tables,
            "strategy": strategy.name(),
            "under_provisioned": under_provisioned,
            "artifact": "augmented.jsonl",
        }),
    )?;
    log_stage(
        "augment",
        started,
        &[
            ("n_tables", n_tables.to_string()),
            ("strategy", strategy.name().to_string()),
            ("provider_calls", provider_calls.to_string()),
            ("under_provisioned", under_provisioned.to_string()),
        ],
    );
    Ok(())
}

fn read_augmented(cfg: &PipelineConfig) -> Result<Vec<AugmentedTable>, CliError> {
    let path = augmented_path(cfg);
    let content = fs::read_to_string(&path)
        .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))?;
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            serde_json::from_str(line)
                .map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn cmd_embed(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let augmented = read_augmented(cfg)?;
    let texts: Vec<String> = augmented
        .iter()
        .map(|at| {
            format!(
                "{}{}",
                cfg.embedder.doc_prefix,
                render_for_embedding(at, cfg.include_title_embedding)
            )
        })
        .collect();

    let records: Vec<VectorRecord> = if cfg.embedder.kind.is_multi() {
        let embedder = cfg.embedder.build_multi()?;
        let vectors = embedder.embed_batch(&texts)?;
        augmented
            .iter()
            .zip(&vectors)
            .map(|(at, v)| VectorRecord::multi(at.table_id().to_string(), at.strategy, v))
            .collect()
    } else {
        let embedder = cfg.embedder.build_dense()?;
        let vectors = embedder.embed_batch(&texts)?;
        augmented
            .iter()
            .zip(&vectors)
            .map(|(at, v)| VectorRecord::dense(at.table_id().to_string(), at.strategy, v))
            .collect()
    };
    write_vector_store(&vectors_path(cfg), &records)?;

    update_manifest(
        &cfg.run_dir,
        "embed",
        serde_json::json!({
            "n_vectors": records.len(),
            "kind": cfg.embedder.kind.name(),
            "dim": cfg.embedder.dim,
            "artifact": "vectors.jsonl",
        }),
    )?;
    log_stage(
        "embed",
        started,
        &[
            ("n_vectors", records.len().to_string()),
            ("kind", cfg.embedder.kind.name().to_string()),
            ("dim", cfg.embedder.dim.to_string()),
        ],
    );
    Ok(())
}

fn dense_entries(records: Vec<VectorRecord>) -> Result<Vec<(String, DenseVector)>, CliError> {
    records
        .into_iter()
        .map(|r| {
            r.into_dense().ok_or_else(|| {
                CliError::new(
                    "index",
                    "vector store holds multi-vector records; dense expected",
                )
            })
        })
        .collect()
}

pub fn cmd_index(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    if cfg.embedder.kind.is_multi() {
        // Late-interaction search scans the vector store directly.
        update_manifest(
            &cfg.run_dir,
            "index",
            serde_json::json!({"skipped": "multi-vector search is exhaustive"}),
        )?;
        log_stage("index", started, &[("skipped", "multi".to_string())]);
        return Ok(());
    }
    let entries = dense_entries(read_vector_store(&vectors_path(cfg))?)?;
    let index = build_ivf(&entries, cfg.index.nlist, cfg.index.seed)?;
    save_index(&index, &index_path(cfg))?;
    update_manifest(
        &cfg.run_dir,
        "index",
        serde_json::json!({
            "n_vectors": index.len(),
            "nlist": index.nlist(),
            "artifact": "index.bin",
        }),
    )?;
    log_stage(
        "index",
        started,
        &[
            ("n_vectors", index.len().to_string()),
            ("nlist", index.nlist().to_string()),
        ],
    );
    Ok(())
}

/// Retrieval over the persisted artifacts, shared by search and eval.
enum SearchBackend {
    Dense(tabret::index::DenseIndex),
    Multi(MultiIndex),
}

impl SearchBackend {
    fn open(cfg: &PipelineConfig) -> Result<Self, CliError> {
        if cfg.embedder.kind.is_multi() {
            let records = read_vector_store(&vectors_path(cfg))?;
            let entries = records
                .into_iter()
                .map(|r| {
                    r.into_multi().ok_or_else(|| {
                        CliError::new("index", "vector store holds dense records; multi expected")
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Self::Multi(MultiIndex::build(entries)?))
        } else {
            let path = index_path(cfg);
            let index = if path.exists() {
                load_index(&path)?
            } else {
                build_ivf(
                    &dense_entries(read_vector_store(&vectors_path(cfg))?)?,
                    cfg.index.nlist,
                    cfg.index.seed,
                )?
            };
            Ok(Self::Dense(index))
        }
    }

    fn search(&self, cfg: &PipelineConfig, text: &str, k: usize) -> Result<SearchResult, CliError> {
        let prefixed = format!("{}{}", cfg.embedder.query_prefix, text);
        match self {
            Self::Dense(index) => {
                let query = cfg.embedder.build_dense()?.embed(&prefixed)?;
                Ok(index.search(&query, k, cfg.index.nprobe)?)
            }
            Self::Multi(index) => {
                let query = cfg.embedder.build_multi()?.embed(&prefixed)?;
                Ok(index.search(&query, k)?)
            }
        }
    }
}

pub fn cmd_search(cfg: &PipelineConfig, query: &str, k: usize) -> Result<(), CliError> {
    let started = Instant::now();
    let backend = SearchBackend::open(cfg)?;
    let result = backend.search(cfg, query, k)?;
    for (rank, hit) in result.hits.iter().enumerate() {
        println!("{} {} {:.6}", rank + 1, hit.id, hit.score);
    }
    log_stage(
        "search",
        started,
        &[
            ("k", k.to_string()),
            ("hits", result.hits.len().to_string()),
        ],
    );
    Ok(())
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let queries_path = cfg
        .queries
        .as_ref()
        .map(|_| corpus_dir(cfg).join("queries.jsonl"))
        .ok_or_else(|| CliError::new("config", "eval needs a queries file in the config"))?;
    let queries = read_queries(&queries_path)?;
    let backend = SearchBackend::open(cfg)?;
    let max_k = cfg.ks.iter().copied().max().expect("validated ks");

    let generator;
    let counting;
    let decomposer: Option<&CountingProvider> = if cfg.method.decompose {
        generator = build_generator(cfg)?;
        counting = CountingProvider::new(generator.as_ref());
        Some(&counting)
    } else {
        None
    };

    let mut runs = std::collections::HashMap::with_capacity(queries.len());
    for query in &queries {
        let result = match decomposer {
            Some(provider) => {
                let set = mtr_decompose(&query.qid, &query.question, provider, cfg.retry)?;
                let per_sub: Vec<SearchResult> = set
                    .sub_queries
                    .iter()
                    .map(|sub| backend.search(cfg, sub, max_k))
                    .collect::<Result<_, _>>()?;
                mtr_merge(&per_sub, max_k, cfg.merge)
            }
            None => backend.search(cfg, &query.question, max_k)?,
        };
        runs.insert(query.qid.clone(), result);
    }

    let mut report = recall_at_k(&runs, &queries, &cfg.ks, cfg.recall_mode)?;
    report.method = cfg.method.name();
    report.retriever = cfg.embedder.kind.name().to_string();
    report.strategy = cfg.method.strategy.name().to_string();
    report.write(&cfg.run_dir)?;
    print!("{}", report.summary_table());

    let mut fields = vec![
        ("method", report.method.clone()),
        ("n_queries", report.n_queries.to_string()),
    ];
    for (k, value) in &report.recall {
        fields.push(("recall", format!("{k}:{value:.4}")));
    }
    if let Some(provider) = decomposer {
        fields.push(("decompose_calls", provider.calls().to_string()));
    }
    update_manifest(
        &cfg.run_dir,
        "eval",
        serde_json::json!({
            "method": report.method,
            "n_queries": report.n_queries,
            "artifact": "report.json",
        }),
    )?;
    log_stage("eval", started, &fields);
    Ok(())
}

pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<(), CliError> {
    cmd_ingest(cfg)?;
    cmd_dedup(cfg)?;
    cmd_augment(cfg)?;
    cmd_embed(cfg)?;
    cmd_index(cfg)?;
    if cfg.queries.is_some() {
        cmd_eval(cfg)?;
    }
    Ok(())
}
