//! Text-generation providers.
//!
//! Generation goes through [`TextGenProvider`] so the pipeline can talk to
//! any chat-completion-style HTTP endpoint, or run fully offline against the
//! deterministic [`MockTextGen`]. Test doubles ([`ReplayProvider`],
//! [`FnProvider`]) are exported so downstream suites can script replies.

use std::env;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider returned unusable response: {0}")]
    BadResponse(String),
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("no scripted reply left")]
    Exhausted,
}

/// Retry budget for generation calls whose replies fail parsing or
/// validation.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3 }
    }
}

/// A text-completion backend: one prompt in, one reply out.
pub trait TextGenProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

/// OpenAI-compatible chat-completion client. Sends the prompt as a single
/// user message; the API key is read from an environment variable at
/// construction so secrets never live in config files.
pub struct ChatCompletionClient {
    base_url: String,
    model: String,
    temperature: f32,
    api_key: String,
    agent: ureq::Agent,
}

impl ChatCompletionClient {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        temperature: f32,
        api_key_env: &str,
    ) -> Result<Self, ProviderError> {
        let api_key =
            env::var(api_key_env).map_err(|_| ProviderError::MissingApiKey(api_key_env.into()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            temperature,
            api_key,
            agent: ureq::AgentBuilder::new().build(),
        })
    }
}

impl TextGenProvider for ChatCompletionClient {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let response = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let value: serde_json::Value = response
            .into_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| ProviderError::BadResponse("no choices[0].message.content".into()))
    }
}

/// Deterministic offline generator. Reads the table block out of the prompt
/// and answers with a well-formed payload: headers from the first grid row,
/// template questions over those headers and the first data row, single-field
/// descriptions, and `" and "`-split sub-queries. Keeps a call counter so
/// cache behavior is observable.
pub struct MockTextGen {
    calls: AtomicU64,
}

impl Default for MockTextGen {
    fn default() -> Self {
        Self::new()
    }
}

impl MockTextGen {
    pub fn new() -> Self {
        Self {
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn table_block(prompt: &str) -> Option<&str> {
        let start = prompt.find("Input Table:\n<")? + "Input Table:\n<".len();
        let rest = &prompt[start..];
        let end = rest.rfind('>')?;
        Some(&rest[..end])
    }

    fn grid_headers(block: &str) -> Vec<String> {
        for line in block.lines() {
            if line.starts_with("| ") {
                return line
                    .trim_matches('|')
                    .split('|')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty() && c != "nan" && !c.starts_with("Unnamed:"))
                    .collect();
            }
        }
        Vec::new()
    }

    fn first_data_row(block: &str) -> Vec<String> {
        block
            .lines()
            .filter(|l| l.starts_with("| "))
            .nth(2)
            .map(|line| {
                line.trim_matches('|')
                    .split('|')
                    .map(|c| c.trim().to_string())
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl TextGenProvider for MockTextGen {
    fn model_id(&self) -> &str {
        "mock-textgen"
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);

        if prompt.contains("\"sub_queries\"") {
            let question = prompt
                .rfind("Question:\n<")
                .map(|i| {
                    let rest = &prompt[i + "Question:\n<".len()..];
                    rest.rfind('>').map(|e| &rest[..e]).unwrap_or(rest)
                })
                .unwrap_or("");
            let parts: Vec<&str> = question
                .split(" and ")
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .take(3)
                .collect();
            let subs: Vec<String> = if parts.len() < 2 {
                vec![question.to_string()]
            } else {
                parts.iter().map(|p| p.to_string()).collect()
            };
            return Ok(json!({ "sub_queries": subs }).to_string());
        }

        let block = Self::table_block(prompt).unwrap_or("");
        let headers = Self::grid_headers(block);

        if prompt.contains("\"description\"") {
            let description = if headers.is_empty() {
                "A small data table.".to_string()
            } else {
                format!(
                    "A table listing {}. Each row records one entry with its {}.",
                    headers.join(", "),
                    headers.last().expect("non-empty headers"),
                )
            };
            return Ok(json!({ "description": description }).to_string());
        }

        let row = Self::first_data_row(block);
        let n_questions = headers.len().div_ceil(2);
        let mut questions = Vec::new();
        for i in 0..n_questions.max(1) {
            let header = headers
                .get(i * 2)
                .cloned()
                .unwrap_or_else(|| "value".into());
            let question = match (headers.get(i * 2 + 1), row.get(i * 2)) {
                (Some(other), Some(value)) if !value.is_empty() => {
                    format!("What is the '{other}' where '{header}' is {value}?")
                }
                (Some(other), _) => format!("How does '{header}' relate to '{other}'?"),
                (None, Some(value)) if !value.is_empty() => {
                    format!("Which rows have '{header}' equal to {value}?")
                }
                (None, _) => format!("What values does '{header}' take?"),
            };
            questions.push(question);
        }

        if prompt.contains("\"headers\"") {
            Ok(json!({ "headers": headers, "questions": questions }).to_string())
        } else {
            Ok(json!({ "questions": questions }).to_string())
        }
    }
}

/// Replays a fixed list of replies in order; errors once exhausted.
pub struct ReplayProvider {
    model: String,
    replies: Mutex<std::collections::VecDeque<String>>,
    calls: AtomicU64,
}

impl ReplayProvider {
    pub fn new(model: impl Into<String>, replies: Vec<String>) -> Self {
        Self {
            model: model.into(),
            replies: Mutex::new(replies.into()),
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextGenProvider for ReplayProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, _prompt: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.replies
            .lock()
            .expect("replay lock")
            .pop_front()
            .ok_or(ProviderError::Exhausted)
    }
}

/// Wraps a closure as a provider, for scripted corpora in tests.
pub struct FnProvider<F> {
    model: String,
    f: F,
    calls: AtomicU64,
}

impl<F> FnProvider<F>
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(model: impl Into<String>, f: F) -> Self {
        Self {
            model: model.into(),
            f,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> TextGenProvider for FnProvider<F>
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_reads_grid_headers() {
        let prompt = "task with \"headers\" payload\nInput Table:\n<| id | name |\n| --- | --- |\n| 1 | ada |>";
        let mock = MockTextGen::new();
        let reply = mock.complete(prompt).unwrap();
        let value: serde_json::Value = serde_json::from_str(&reply).unwrap();
        assert_eq!(value["headers"][0], "id");
        assert_eq!(value["headers"][1], "name");
        assert!(!value["questions"].as_array().unwrap().is_empty());
        assert_eq!(mock.calls(), 1);
    }

    #[test]
    fn mock_is_deterministic() {
        let prompt =
            "\"headers\"\nInput Table:\n<| a | b | c |\n| --- | --- | --- |\n| 1 | 2 | 3 |>";
        let mock = MockTextGen::new();
        assert_eq!(
            mock.complete(prompt).unwrap(),
            mock.complete(prompt).unwrap()
        );
    }

    #[test]
    fn mock_splits_subqueries() {
        let mock = MockTextGen::new();
        let reply = mock
            .complete("return \"sub_queries\"\nQuestion:\n<total sales and average price>")
            .unwrap();
        let value: serde_json::Value = serde_json::from_str(&reply).unwrap();
        assert_eq!(value["sub_queries"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn replay_provider_exhausts() {
        let provider = ReplayProvider::new("replay", vec!["one".into()]);
        assert_eq!(provider.complete("x").unwrap(), "one");
        assert!(matches!(
            provider.complete("x"),
            Err(ProviderError::Exhausted)
        ));
        assert_eq!(provider.calls(), 2);
    }
}
