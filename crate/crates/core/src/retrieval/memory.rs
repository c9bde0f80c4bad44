use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::{EmbedError, Embedder, Embedding};
use super::tfidf::{tfidf_score, CorpusStats};
use crate::script::RoleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryDocument {
    pub id: u64,
    pub owner: RoleId,
    /// Original text; the retrieval index.
    pub content: String,
    /// First-person rendering surfaced to the actor.
    pub monologue: String,
    /// Embedding of `content`, never of `monologue`.
    pub embedding: Embedding,
    pub created_tick: u64,
}

impl MemoryDocument {
    /// Text handed to prompts: the monologue, or the raw content when
    /// monologues are switched off.
    pub fn surfaced(&self, monologue_enabled: bool) -> &str {
        if monologue_enabled {
            &self.monologue
        } else {
            &self.content
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScore {
    pub embedding_sim: f64,
    pub tfidf_score: f64,
    pub recency: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub embedding_weight: f64,
    pub tfidf_weight: f64,
    pub recency_weight: f64,
    /// Per-tick decay base: recency = decay^(now - created).
    pub recency_decay: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            embedding_weight: 1.0,
            tfidf_weight: 1.0,
            recency_weight: 1.0,
            recency_decay: 0.995,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("memory {field} must not be empty")]
    EmptyField { field: &'static str },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("memory file {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Min-max normalize into [0, 1]; a constant column maps to 0.5.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// One character's memory database.
#[derive(Clone)]
pub struct MemoryStore {
    owner: RoleId,
    embedder: Arc<dyn Embedder>,
    config: RetrievalConfig,
    docs: Vec<MemoryDocument>,
    next_id: u64,
    sink: Option<PathBuf>,
}

impl fmt::Debug for MemoryStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MemoryStore")
            .field("owner", &self.owner)
            .field("docs", &self.docs.len())
            .finish()
    }
}

impl MemoryStore {
    pub fn new(owner: RoleId, embedder: Arc<dyn Embedder>, config: RetrievalConfig) -> Self {
        MemoryStore {
            owner,
            embedder,
            config,
            docs: Vec::new(),
            next_id: 0,
            sink: None,
        }
    }

    pub fn owner(&self) -> &RoleId {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[MemoryDocument] {
        &self.docs
    }

    pub fn config(&self) -> &RetrievalConfig {
        &self.config
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// Append new documents to `path` as JSON lines from now on.
    pub fn persist_to(&mut self, path: impl Into<PathBuf>) {
        self.sink = Some(path.into());
    }

    /// Rebuild a store from a file written by [`persist_to`](Self::persist_to).
    /// The store keeps appending to the same file.
    pub fn load(
        path: &Path,
        owner: RoleId,
        embedder: Arc<dyn Embedder>,
        config: RetrievalConfig,
    ) -> Result<Self, StoreError> {
        let io = |e: &dyn fmt::Display| StoreError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut store = MemoryStore::new(owner, embedder, config);
        let f = std::fs::File::open(path).map_err(|e| io(&e))?;
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| io(&e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: MemoryDocument = serde_json::from_str(&line).map_err(|e| io(&e))?;
            store.next_id = store.next_id.max(doc.id + 1);
            store.docs.push(doc);
        }
        store.sink = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn add_memory(&mut self, content: &str, monologue: &str, tick: u64) -> Result<MemoryDocument, StoreError> {
        if content.trim().is_empty() {
            return Err(StoreError::EmptyField { field: "content" });
        }
        if monologue.trim().is_empty() {
            return Err(StoreError::EmptyField { field: "monologue" });
        }
        let doc = MemoryDocument {
            id: self.next_id,
            owner: self.owner.clone(),
            content: content.to_string(),
            monologue: monologue.to_string(),
            embedding: self.embedder.embed(content)?,
            created_tick: tick,
        };
        if let Some(path) = &self.sink {
            let write = || -> std::io::Result<()> {
                let mut f = OpenOptions::new().create(true).append(true).open(path)?;
                serde_json::to_writer(&mut f, &doc)?;
                f.write_all(b"\n")
            };
            write().map_err(|e| StoreError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        self.next_id += 1;
        self.docs.push(doc.clone());
        Ok(doc)
    }

    /// Score every document against `query` at `now_tick`, unsorted.
    pub fn score_all(&self, query: &str, now_tick: u64) -> Vec<RetrievalScore> {
        if self.docs.is_empty() {
            return Vec::new();
        }
        let q = self.embedder.embed(query).ok();
        let stats = CorpusStats::from_documents(self.docs.iter().map(|d| d.content.as_str()));
        let sims: Vec<f64> = self
            .docs
            .iter()
            .map(|d| q.as_ref().map_or(0.0, |q| q.cosine(&d.embedding)))
            .collect();
        let tfidf: Vec<f64> = self
            .docs
            .iter()
            .map(|d| tfidf_score(query, &d.content, &stats))
            .collect();
        let recency: Vec<f64> = self
            .docs
            .iter()
            .map(|d| {
                let age = now_tick.saturating_sub(d.created_tick);
                self.config.recency_decay.powf(age as f64)
            })
            .collect();
        let (ns, nt, nr) = (min_max(&sims), min_max(&tfidf), min_max(&recency));
        let w = &self.config;
        (0..self.docs.len())
            .map(|i| RetrievalScore {
                embedding_sim: sims[i],
                tfidf_score: tfidf[i],
                recency: recency[i],
                combined: w.embedding_weight * ns[i] + w.tfidf_weight * nt[i] + w.recency_weight * nr[i],
            })
            .collect()
    }

    /// Top `k` documents by combined score; ties go to the newer document,
    /// then the lower id.
    pub fn retrieve(&self, query: &str, now_tick: u64, k: usize) -> Vec<(MemoryDocument, RetrievalScore)> {
        let scores = self.score_all(query, now_tick);
        let mut ranked: Vec<(&MemoryDocument, RetrievalScore)> = self.docs.iter().zip(scores).collect();
        ranked.sort_by(|(da, sa), (db, sb)| {
            sb.combined
                .total_cmp(&sa.combined)
                .then(db.created_tick.cmp(&da.created_tick))
                .then(da.id.cmp(&db.id))
        });
        ranked.into_iter().take(k).map(|(d, s)| (d.clone(), s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::embed::HashedBowEmbedder;

    fn store() -> MemoryStore {
        MemoryStore::new(
            RoleId::new("Mara"),
            Arc::new(HashedBowEmbedder::default()),
            RetrievalConfig::default(),
        )
    }

    #[test]
    fn empty_store_retrieves_nothing() {
        assert!(store().retrieve("anything", 5, 3).is_empty());
    }

    #[test]
    fn exact_content_ranks_first() {
        let mut s = store();
        s.add_memory("the storm broke the pier", "I saw the pier break.", 1)
            .unwrap();
        s.add_memory("a quiet breakfast with Tobias", "Tobias made coffee.", 2)
            .unwrap();
        s.add_memory("the flare pistol in the drawer", "I kept the flare pistol close.", 3)
            .unwrap();
        let top = s.retrieve("the storm broke the pier", 3, 1);
        assert_eq!(top[0].0.content, "the storm broke the pier");
    }

    #[test]
    fn empty_monologue_rejected() {
        assert!(matches!(
            store().add_memory("content", " ", 0),
            Err(StoreError::EmptyField { field: "monologue" })
        ));
    }

    #[test]
    fn ids_unique_and_count() {
        let mut s = store();
        for i in 0..10 {
            s.add_memory(&format!("memory {i}"), &format!("I recall {i}"), i)
                .unwrap();
        }
        assert_eq!(s.len(), 10);
        let ids: std::collections::BTreeSet<u64> = s.documents().iter().map(|d| d.id).collect();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn newer_identical_document_wins() {
        let mut s = store();
        s.add_memory("the lantern went out", "It went dark.", 1).unwrap();
        s.add_memory("the lantern went out", "It went dark.", 5).unwrap();
        let top = s.retrieve("lantern", 6, 2);
        assert_eq!(top[0].0.created_tick, 5);
    }

    #[test]
    fn min_max_tie_is_half() {
        assert_eq!(min_max(&[2.0, 2.0]), [0.5, 0.5]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), [0.0, 1.0, 0.5]);
    }

    #[test]
    fn persist_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mara.jsonl");
        let mut s = store();
        s.persist_to(&path);
        s.add_memory("one", "first", 1).unwrap();
        s.add_memory("two", "second", 2).unwrap();
        let mut back = MemoryStore::load(
            &path,
            RoleId::new("Mara"),
            Arc::new(HashedBowEmbedder::default()),
            RetrievalConfig::default(),
        )
        .unwrap();
        assert_eq!(back.documents(), s.documents());
        let d = back.add_memory("three", "third", 3).unwrap();
        assert_eq!(d.id, 2);
        let again = MemoryStore::load(
            &path,
            RoleId::new("Mara"),
            Arc::new(HashedBowEmbedder::default()),
            RetrievalConfig::default(),
        )
        .unwrap();
        assert_eq!(again.len(), 3);
    }
}
