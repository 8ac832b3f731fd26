//! HTTP embedding providers.
//!
//! Dense: OpenAI-style `POST {base}/embeddings` with `{model, input: [...]}`
//! and `data[i].embedding` in the response. Multi: same endpoint shape with
//! `data[i].vectors` holding one vector per token. Responses are normalized
//! client-side and dimension-checked against the spec.

use std::env;

use serde_json::json;

use super::{DenseEmbedder, DenseVector, EmbedError, EmbedderSpec, MultiEmbedder, MultiVector};

struct RemoteConfig {
    base_url: String,
    model: String,
    api_key: String,
    expected_dim: usize,
    batch_size: usize,
    agent: ureq::Agent,
}

impl RemoteConfig {
    fn from_spec(spec: &EmbedderSpec) -> Result<Self, EmbedError> {
        let base_url = spec.base_url.clone().ok_or(EmbedError::BadRemoteSpec)?;
        let model = spec.model.clone().ok_or(EmbedError::BadRemoteSpec)?;
        let api_key = match &spec.api_key_env {
            Some(var) => env::var(var).map_err(|_| EmbedError::MissingApiKey(var.clone()))?,
            None => String::new(),
        };
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model,
            api_key,
            expected_dim: spec.dim,
            batch_size: spec.batch_size.max(1),
            agent: ureq::AgentBuilder::new().build(),
        })
    }

    /// One request; a transient transport failure is retried once.
    fn post(&self, input: &[String]) -> Result<serde_json::Value, EmbedError> {
        let url = format!("{}/embeddings", self.base_url);
        let send = || {
            let mut request = self.agent.post(&url);
            if !self.api_key.is_empty() {
                request = request.set("Authorization", &format!("Bearer {}", self.api_key));
            }
            request
                .send_json(json!({ "model": self.model, "input": input }))
                .map_err(|e| EmbedError::Provider(e.to_string()))
        };
        let response = match send() {
            Ok(r) => r,
            Err(_) => send()?,
        };
        response
            .into_json()
            .map_err(|e| EmbedError::Provider(e.to_string()))
    }

    fn check_dim(&self, got: usize) -> Result<(), EmbedError> {
        if self.expected_dim != 0 && got != self.expected_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.expected_dim,
                got,
            });
        }
        Ok(())
    }
}

fn values_from(value: &serde_json::Value) -> Result<Vec<f32>, EmbedError> {
    value
        .as_array()
        .ok_or_else(|| EmbedError::Provider("embedding is not an array".into()))?
        .iter()
        .map(|x| {
            x.as_f64()
                .map(|f| f as f32)
                .ok_or_else(|| EmbedError::Provider("non-numeric embedding entry".into()))
        })
        .collect()
}

pub struct RemoteDenseEmbedder {
    config: RemoteConfig,
}

impl RemoteDenseEmbedder {
    pub fn from_spec(spec: &EmbedderSpec) -> Result<Self, EmbedError> {
        Ok(Self {
            config: RemoteConfig::from_spec(spec)?,
        })
    }
}

impl DenseEmbedder for RemoteDenseEmbedder {
    fn dim(&self) -> usize {
        self.config.expected_dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size) {
            let value = self.config.post(chunk)?;
            let data = value["data"]
                .as_array()
                .ok_or_else(|| EmbedError::Provider("response has no data array".into()))?;
            if data.len() != chunk.len() {
                return Err(EmbedError::Provider(format!(
                    "asked for {} embeddings, got {}",
                    chunk.len(),
                    data.len()
                )));
            }
            for item in data {
                let values = values_from(&item["embedding"])?;
                self.config.check_dim(values.len())?;
                out.push(DenseVector::new(values).normalized());
            }
        }
        Ok(out)
    }
}

pub struct RemoteMultiEmbedder {
    config: RemoteConfig,
    max_tokens: usize,
}

impl RemoteMultiEmbedder {
    pub fn from_spec(spec: &EmbedderSpec) -> Result<Self, EmbedError> {
        Ok(Self {
            config: RemoteConfig::from_spec(spec)?,
            max_tokens: spec.max_tokens.max(1),
        })
    }
}

impl MultiEmbedder for RemoteMultiEmbedder {
    fn dim(&self) -> usize {
        self.config.expected_dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<MultiVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size) {
            let value = self.config.post(chunk)?;
            let data = value["data"]
                .as_array()
                .ok_or_else(|| EmbedError::Provider("response has no data array".into()))?;
            if data.len() != chunk.len() {
                return Err(EmbedError::Provider(format!(
                    "asked for {} embeddings, got {}",
                    chunk.len(),
                    data.len()
                )));
            }
            for item in data {
                let rows = item["vectors"]
                    .as_array()
                    .ok_or_else(|| EmbedError::Provider("response item has no vectors".into()))?;
                let token_vectors: Vec<DenseVector> = rows
                    .iter()
                    .take(self.max_tokens)
                    .map(|row| {
                        let values = values_from(row)?;
                        self.config.check_dim(values.len())?;
                        Ok(DenseVector::new(values).normalized())
                    })
                    .collect::<Result<_, EmbedError>>()?;
                out.push(MultiVector::new(token_vectors)?);
            }
        }
        Ok(out)
    }
}
