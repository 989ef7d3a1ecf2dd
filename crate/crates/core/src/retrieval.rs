//! Vector index over regulation chunks with threshold-filtered retrieval.
//!
//! Scores are cosine distances, `1 - cos(query, chunk)`, so lower is more
//! similar and a larger threshold admits more chunks. With the lexical
//! TF-IDF embedder all weights are non-negative and scores stay in `[0, 1]`;
//! other embedders may produce scores up to 2.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::regulation::ArticleChunk;

/// Distances closer to zero than this are reported as exactly zero.
pub const SCORE_EPSILON: f64 = 1e-12;

pub const TFIDF_BACKEND: &str = "tfidf";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("cannot build an index from zero chunks")]
    EmptyCorpus,
    #[error("unknown embedding backend `{0}`")]
    UnknownBackend(String),
    #[error("threshold must be a finite non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("top_k must be at least 1")]
    InvalidTopK,
}

/// Sparse representation of a fixed-dimension vector; entries are sorted by
/// dimension and non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl EmbeddingVector {
    pub fn zero(dim: usize) -> Self {
        EmbeddingVector {
            dim,
            entries: Vec::new(),
        }
    }

    /// L2-normalizes the given weights; drops zero weights.
    pub fn normalized(dim: usize, weights: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut entries: Vec<(u32, f64)> = weights.into_iter().filter(|(_, w)| *w != 0.0).collect();
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        EmbeddingVector { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            v[i as usize] = w;
        }
        v
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, wa) = self.entries[i];
            let (b, wb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Turns text into vectors. Implementations must be deterministic.
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// TF-IDF over the indexed corpus: raw term counts times
/// `ln((1 + N) / (1 + df)) + 1`, L2-normalized. Unknown terms are ignored.
#[derive(Debug, Clone)]
pub struct TfIdfEmbedder {
    vocabulary: BTreeMap<String, u32>,
    idf: Vec<f64>,
}

impl TfIdfEmbedder {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0usize;
        for text in texts {
            n_docs += 1;
            let terms: BTreeSet<String> = tokenize(text).into_iter().collect();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = n_docs as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocabulary.insert(term, i as u32);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        TfIdfEmbedder { vocabulary, idf }
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u32> {
        &self.vocabulary
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i as usize])
    }
}

impl Embedder for TfIdfEmbedder {
    fn id(&self) -> &str {
        TFIDF_BACKEND
    }

    fn dim(&self) -> usize {
        self.idf.len()
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for token in tokenize(text) {
            if let Some(&i) = self.vocabulary.get(&token) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        EmbeddingVector::normalized(
            self.dim(),
            tf.into_iter().map(|(i, c)| (i, c * self.idf[i as usize])),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverConfig {
    pub threshold: f64,
    pub top_k: Option<usize>,
    pub backend: String,
}

impl RetrieverConfig {
    pub fn new(threshold: f64) -> Result<Self, RetrievalError> {
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(RetrievalError::InvalidThreshold(threshold));
        }
        Ok(RetrieverConfig {
            threshold,
            top_k: None,
            backend: TFIDF_BACKEND.to_string(),
        })
    }

    pub fn with_top_k(mut self, k: usize) -> Result<Self, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidTopK);
        }
        self.top_k = Some(k);
        Ok(self)
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, RetrievalError> {
        let mut c = RetrieverConfig::new(threshold)?;
        c.top_k = self.top_k;
        c.backend = self.backend.clone();
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct ChunkRecord {
    pub chunk: ArticleChunk,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub chunk_id: String,
    pub article_number: u32,
    pub score: f64,
}

/// Cosine distance between two unit (or zero) vectors, clamped to `[0, 2]`.
/// `None` when either side is the zero vector.
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Option<f64> {
    if a.is_zero() || b.is_zero() {
        return None;
    }
    let d = (1.0 - a.dot(b)).clamp(0.0, 2.0);
    Some(if d < SCORE_EPSILON { 0.0 } else { d })
}

/// An immutable, thread-safe chunk index.
pub struct Index {
    records: Vec<ChunkRecord>,
    embedder: Box<dyn Embedder>,
}

impl std::fmt::Debug for Index {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Index")
            .field("backend", &self.embedder.id())
            .field("chunks", &self.records.len())
            .finish()
    }
}

/// Builds an index with the embedder named by `config.backend`.
pub fn build_index(chunks: &[ArticleChunk], config: &RetrieverConfig) -> Result<Index, RetrievalError> {
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    match config.backend.as_str() {
        TFIDF_BACKEND => {
            let embedder = TfIdfEmbedder::fit(chunks.iter().map(|c| c.text.as_str()));
            Index::build_with(chunks, Box::new(embedder))
        }
        other => Err(RetrievalError::UnknownBackend(other.to_string())),
    }
}

impl Index {
    pub fn build_with(chunks: &[ArticleChunk], embedder: Box<dyn Embedder>) -> Result<Index, RetrievalError> {
        if chunks.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let records = chunks
            .iter()
            .map(|c| ChunkRecord {
                vector: embedder.embed(&c.text),
                chunk: c.clone(),
            })
            .collect();
        Ok(Index { records, embedder })
    }

    pub fn records(&self) -> &[ChunkRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        self.embedder.embed(text)
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&ArticleChunk> {
        self.records
            .iter()
            .map(|r| &r.chunk)
            .find(|c| c.chunk_id == chunk_id)
    }

    /// Chunks within `config.threshold` of the query, sorted by
    /// `(score, article_number, chunk_id)`. A query with no known terms
    /// has no direction and matches nothing.
    pub fn retrieve(&self, query: &str, config: &RetrieverConfig) -> Vec<RetrievalHit> {
        let q = self.embed(query);
        let mut hits: Vec<RetrievalHit> = self
            .records
            .iter()
            .filter_map(|r| {
                let score = cosine_distance(&q, &r.vector)?;
                (score <= config.threshold).then(|| RetrievalHit {
                    chunk_id: r.chunk.chunk_id.clone(),
                    article_number: r.chunk.article_number,
                    score,
                })
            })
            .collect();
        hits.sort_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.article_number.cmp(&b.article_number))
                .then_with(|| a.chunk_id.cmp(&b.chunk_id))
        });
        if let Some(k) = config.top_k {
            hits.truncate(k);
        }
        hits
    }

    /// Debug dump: one line per chunk with its sparse vector. Not a stable
    /// format.
    pub fn dump(&self) -> String {
        let mut out = format!("# backend {} dim {}\n", self.embedder.id(), self.embedder.dim());
        for r in &self.records {
            let _ = write!(out, "{}\t{}\t", r.chunk.chunk_id, r.chunk.article_number);
            let entries: Vec<String> = r
                .vector
                .entries()
                .iter()
                .map(|(i, w)| format!("{i}:{w:.6}"))
                .collect();
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Best (minimum) score per article.
pub fn aggregate_articles(hits: &[RetrievalHit]) -> BTreeMap<u32, f64> {
    let mut out: BTreeMap<u32, f64> = BTreeMap::new();
    for h in hits {
        out.entry(h.article_number)
            .and_modify(|s| *s = s.min(h.score))
            .or_insert(h.score);
    }
    out
}
