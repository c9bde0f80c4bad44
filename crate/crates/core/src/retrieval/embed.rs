use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::util::{fnv1a64, tokenize};

/// An L2-normalized vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalize `raw`. Returns `None` for a zero vector.
    pub fn from_raw(mut raw: Vec<f64>) -> Option<Self> {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        raw.iter_mut().for_each(|x| *x /= norm);
        Some(Embedding(raw))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        debug_assert_eq!(self.dimension(), other.dimension());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedder unavailable: {0}")]
    Unavailable(String),
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Feature-hashed bag of words: each token adds 1 to bucket
/// `fnv1a64(token) % dim`, then the vector is L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        HashedBowEmbedder { dim }
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        HashedBowEmbedder::new(Self::DEFAULT_DIM)
    }
}

impl Embedder for HashedBowEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut v = vec![0.0; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            // Punctuation-only text still gets a stable, non-zero vector.
            let t = text.trim();
            if t.is_empty() {
                return Err(EmbedError::EmptyText);
            }
            v[(fnv1a64(t.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        for t in tokens {
            v[(fnv1a64(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        Ok(Embedding::from_raw(v).expect("non-empty bag of words"))
    }
}

/// OpenAI-compatible `/embeddings` provider.
pub struct HttpEmbedder {
    base_url: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, dim: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpEmbedder {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dim,
            agent,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let unavailable = |m: String| EmbedError::Unavailable(m);
        let mut req = self.agent.post(&format!("{}/embeddings", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(json!({"model": self.model, "input": text}))
            .map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("HTTP {}", resp.status())));
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| unavailable(e.to_string()))?;
        let raw: Vec<f64> = v
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| unavailable("response has no embedding".into()))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        if raw.len() != self.dim {
            return Err(unavailable(format!(
                "expected {} dimensions, got {}",
                self.dim,
                raw.len()
            )));
        }
        Embedding::from_raw(raw).ok_or_else(|| unavailable("zero embedding".into()))
    }
}
