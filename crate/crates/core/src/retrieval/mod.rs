//! Actor-side memory: a memory database scored by embedding similarity,
//! TF-IDF and recency, and a character database triggered by name.

pub mod character;
pub mod embed;
pub mod memory;
pub mod tfidf;

pub use character::{mentions, CharacterDocument, CharacterStore};
pub use embed::{EmbedError, Embedder, Embedding, HashedBowEmbedder, HttpEmbedder};
pub use memory::{MemoryDocument, MemoryStore, RetrievalConfig, RetrievalScore, StoreError};
pub use tfidf::{tfidf_score, CorpusStats};
