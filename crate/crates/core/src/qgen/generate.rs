//! Generation driver: prompt, call, parse, validate, retry, cache.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::cache::GenerationCache;
use crate::provider::{RetryPolicy, TextGenProvider};
use crate::table::PartialTable;

use super::parse::{parse_description_strict, parse_json_strict};
use super::prompt::{build_description_prompt, build_prompt, GenMode};
use super::{validate_count, GenResult, QgenError};

/// Settings shared by every generation call of a corpus build.
#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub mode: GenMode,
    /// Whether the prompt's table serialization carries the title line.
    pub include_title: bool,
    pub policy: RetryPolicy,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            mode: GenMode::FullPipeline,
            include_title: true,
            policy: RetryPolicy::default(),
        }
    }
}

/// Generates questions (and headers, in full-pipeline mode) for one partial
/// table.
///
/// The reply must parse strictly and satisfy the count rule; failures retry
/// with the same prompt up to the policy budget. A reply that parses but
/// stays under the count after the last retry is accepted and flagged
/// under-provisioned instead of dropped, so the corpus never loses a table
/// to a weak generation. Parse-successful raw replies are persisted
/// to the cache, so identical `(prompt, model)` pairs never re-call the
/// provider.
pub fn generate(
    pt: &PartialTable,
    provider: &dyn TextGenProvider,
    opts: &GenOptions,
    cache: Option<&GenerationCache>,
) -> Result<GenResult, QgenError> {
    let prompt = build_prompt(pt, opts.mode, opts.include_title);
    run_attempts(provider, opts, cache, &prompt, |raw| {
        let mut result = parse_json_strict(raw, opts.mode)?;
        let accepted = match opts.mode {
            GenMode::FullPipeline => validate_count(result.headers.len(), &result.questions),
            // Header extraction was skipped, so the count rule has no header
            // count to work with; parsing already required >= 1 question.
            GenMode::QuestionsOnly => true,
        };
        result.under_provisioned = !accepted;
        let fallback = !accepted;
        Ok((result, fallback))
    })
    .map(|(mut result, attempts)| {
        result.model_id = provider.model_id().to_string();
        result.attempts = attempts;
        result
    })
}

/// Generates a natural-language description for one partial table.
pub fn generate_description(
    pt: &PartialTable,
    provider: &dyn TextGenProvider,
    opts: &GenOptions,
    cache: Option<&GenerationCache>,
) -> Result<String, QgenError> {
    let prompt = build_description_prompt(pt, opts.include_title);
    run_attempts(provider, opts, cache, &prompt, |raw| {
        parse_description_strict(raw).map(|text| (text, false))
    })
    .map(|(text, _)| text)
}

/// Shared retry loop. Consults the cache first (a hit costs zero provider
/// calls), then calls the provider until `parse` yields a non-fallback
/// result or the budget runs out; the last fallback seen is accepted then.
/// `parse` marks results that only qualify as fallbacks with `true`.
fn run_attempts<T>(
    provider: &dyn TextGenProvider,
    opts: &GenOptions,
    cache: Option<&GenerationCache>,
    prompt: &str,
    parse: impl Fn(&str) -> Result<(T, bool), QgenError>,
) -> Result<(T, u32), QgenError> {
    let model_id = provider.model_id();
    if let Some(cache) = cache {
        if let Some(raw) = cache.get(model_id, prompt) {
            if let Ok((result, _)) = parse(&raw) {
                return Ok((result, 0));
            }
            // Corrupt or stale entry: fall through to the provider.
        }
    }

    let max_attempts = opts.policy.max_attempts.max(1);
    let mut last_raw = String::new();
    let mut fallback: Option<T> = None;
    for attempt in 1..=max_attempts {
        let raw = provider.complete(prompt)?;
        last_raw = raw.clone();
        match parse(&raw) {
            Ok((result, false)) => {
                store(cache, model_id, prompt, &raw);
                return Ok((result, attempt));
            }
            Ok((result, true)) => {
                store(cache, model_id, prompt, &raw);
                fallback = Some(result);
            }
            Err(_) => {}
        }
    }
    match fallback {
        Some(result) => Ok((result, max_attempts)),
        None => Err(QgenError::ExhaustedRetries {
            attempts: max_attempts,
            last_raw,
        }),
    }
}

fn store(cache: Option<&GenerationCache>, model_id: &str, prompt: &str, raw: &str) {
    if let Some(cache) = cache {
        // Cache misses are recoverable; the result is already in hand.
        let _ = cache.put(model_id, prompt, raw);
    }
}

/// Fans [`generate`] out over a corpus with a bounded worker pool. Results
/// come back in input order.
pub fn generate_batch(
    partials: &[PartialTable],
    provider: &dyn TextGenProvider,
    opts: &GenOptions,
    cache: Option<&GenerationCache>,
    concurrency: usize,
) -> Result<Vec<GenResult>, QgenError> {
    fan_out(partials, concurrency, |pt| {
        generate(pt, provider, opts, cache)
    })
}

/// [`generate_description`] over a corpus with a bounded worker pool.
pub fn generate_description_batch(
    partials: &[PartialTable],
    provider: &dyn TextGenProvider,
    opts: &GenOptions,
    cache: Option<&GenerationCache>,
    concurrency: usize,
) -> Result<Vec<String>, QgenError> {
    fan_out(partials, concurrency, |pt| {
        generate_description(pt, provider, opts, cache)
    })
}

fn fan_out<T: Sync, R: Send>(
    items: &[T],
    concurrency: usize,
    work: impl Fn(&T) -> Result<R, QgenError> + Sync,
) -> Result<Vec<R>, QgenError> {
    let workers = concurrency.max(1).min(items.len().max(1));
    let cursor = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R, QgenError>>>> =
        (0..items.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = work(&items[i]);
                *slots[i].lock().expect("result slot") = Some(result);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot")
                .expect("worker filled slot")
        })
        .collect()
}
