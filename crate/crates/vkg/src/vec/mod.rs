//! Vector space: a vocabulary-keyed embedding table with exact top-k cosine
//! search and analogy arithmetic.
//!
//! Search is a full scan with heap selection; results are contractually
//! identical to a naive sort-everything oracle, including tie order (higher
//! similarity first, ties broken by ascending token).

mod format;

pub use format::{load_vectors, save_vectors};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VecError {
    #[error("UnknownToken: `{token}` is not in the vocabulary")]
    UnknownToken { token: String },
    #[error("ZeroVector: {context}")]
    ZeroVector { context: String },
    #[error("DimensionMismatch: expected {expected}, got {got}{context}")]
    DimensionMismatch { expected: usize, got: usize, context: String },
    #[error("DuplicateToken: `{token}`")]
    DuplicateToken { token: String },
    #[error("MalformedLine: line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("NonFinite: token `{token}` has a non-finite component")]
    NonFinite { token: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One vocabulary entry: a token and its dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub token: String,
    pub values: Vec<f64>,
}

/// Immutable embedding table. Tokens are held in sorted order so that
/// serialization and iteration are canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSpace {
    dimension: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

/// Ranked search output plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub results: Vec<(String, f64)>,
    /// Candidates skipped because their vector has zero norm.
    pub zero_norm_skipped: usize,
}

pub struct VectorSpaceBuilder {
    dimension: usize,
    entries: Vec<(String, Vec<f64>)>,
    seen: HashMap<String, ()>,
}

impl VectorSpaceBuilder {
    pub fn insert(&mut self, token: &str, values: Vec<f64>) -> Result<(), VecError> {
        if values.len() != self.dimension {
            return Err(VecError::DimensionMismatch {
                expected: self.dimension,
                got: values.len(),
                context: format!(" for token `{token}`"),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VecError::NonFinite { token: token.to_string() });
        }
        if token.is_empty() || token.chars().any(|c| c.is_whitespace()) {
            return Err(VecError::MalformedLine {
                line: 0,
                reason: format!("token `{token}` is empty or contains whitespace"),
            });
        }
        if self.seen.insert(token.to_string(), ()).is_some() {
            return Err(VecError::DuplicateToken { token: token.to_string() });
        }
        self.entries.push((token.to_string(), values));
        Ok(())
    }

    pub fn build(mut self) -> VectorSpace {
        self.entries.sort_by(|a, b| a.0.cmp(&b.0));
        let dimension = self.dimension;
        let mut tokens = Vec::with_capacity(self.entries.len());
        let mut data = Vec::with_capacity(self.entries.len() * dimension);
        let mut norms = Vec::with_capacity(self.entries.len());
        let mut index = HashMap::with_capacity(self.entries.len());
        for (i, (token, values)) in self.entries.into_iter().enumerate() {
            norms.push(values.iter().map(|v| v * v).sum::<f64>().sqrt());
            data.extend_from_slice(&values);
            index.insert(token.clone(), i);
            tokens.push(token);
        }
        VectorSpace { dimension, tokens, index, data, norms }
    }
}

impl VectorSpace {
    pub fn builder(dimension: usize) -> VectorSpaceBuilder {
        assert!(dimension >= 1, "vector dimension must be >= 1");
        VectorSpaceBuilder { dimension, entries: Vec::new(), seen: HashMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in canonical (lexicographic) order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.as_str())
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn entry(&self, token: &str) -> Option<EmbeddingVector> {
        self.vector(token)
            .map(|v| EmbeddingVector { token: token.to_string(), values: v.to_vec() })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    fn require(&self, token: &str) -> Result<usize, VecError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| VecError::UnknownToken { token: token.to_string() })
    }

    /// Cosine similarity between two in-vocabulary tokens.
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64, VecError> {
        let (ia, ib) = (self.require(a)?, self.require(b)?);
        if self.norms[ia] == 0.0 {
            return Err(VecError::ZeroVector { context: format!("token `{a}`") });
        }
        if self.norms[ib] == 0.0 {
            return Err(VecError::ZeroVector { context: format!("token `{b}`") });
        }
        Ok(cosine_against(self.row(ia), self.norms[ia], self.row(ib), self.norms[ib]))
    }

    /// Exact top-k around an in-vocabulary token.
    pub fn top_k(&self, token: &str, k: usize, exclude_self: bool) -> Result<TopK, VecError> {
        let i = self.require(token)?;
        if self.norms[i] == 0.0 {
            return Err(VecError::ZeroVector { context: format!("query token `{token}`") });
        }
        let query = self.row(i).to_vec();
        self.top_k_where(&query, k, |candidate| !(exclude_self && candidate == token))
    }

    /// Exact top-k around an arbitrary query vector.
    pub fn top_k_vector(&self, query: &[f64], k: usize) -> Result<TopK, VecError> {
        self.top_k_where(query, k, |_| true)
    }

    /// Exact top-k over the candidate tokens accepted by `keep`. Results are
    /// sorted by similarity descending, ties by ascending token; at most
    /// `min(k, eligible)` entries are returned.
    pub fn top_k_where(
        &self,
        query: &[f64],
        k: usize,
        keep: impl Fn(&str) -> bool,
    ) -> Result<TopK, VecError> {
        if query.len() != self.dimension {
            return Err(VecError::DimensionMismatch {
                expected: self.dimension,
                got: query.len(),
                context: " for query vector".to_string(),
            });
        }
        let query_norm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
        if query_norm == 0.0 {
            return Err(VecError::ZeroVector { context: "query vector".to_string() });
        }

        // Min-heap of the current top k under (similarity desc, token asc):
        // the root is the worst kept candidate.
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        let mut zero_norm_skipped = 0usize;
        for (i, token) in self.tokens.iter().enumerate() {
            if !keep(token) {
                continue;
            }
            if self.norms[i] == 0.0 {
                zero_norm_skipped += 1;
                continue;
            }
            let sim = cosine_against(query, query_norm, self.row(i), self.norms[i]);
            if k == 0 {
                continue;
            }
            if heap.len() < k {
                heap.push(HeapEntry { sim, token_idx: i });
            } else if let Some(worst) = heap.peek() {
                let candidate = HeapEntry { sim, token_idx: i };
                if rank_order(
                    (candidate.sim, &self.tokens[candidate.token_idx]),
                    (worst.sim, &self.tokens[worst.token_idx]),
                ) == Ordering::Less
                {
                    heap.pop();
                    heap.push(candidate);
                }
            }
        }
        let mut results: Vec<(String, f64)> =
            heap.into_iter().map(|e| (self.tokens[e.token_idx].clone(), e.sim)).collect();
        results.sort_by(|a, b| rank_order((a.1, &a.0), (b.1, &b.0)));
        Ok(TopK { results, zero_norm_skipped })
    }

    /// Rank tokens nearest to `vector(b) - vector(a) + vector(c)`, with a, b,
    /// and c excluded from the results.
    pub fn analogy(&self, a: &str, b: &str, c: &str, k: usize) -> Result<TopK, VecError> {
        let (ia, ib, ic) = (self.require(a)?, self.require(b)?, self.require(c)?);
        let query: Vec<f64> = (0..self.dimension)
            .map(|d| self.row(ib)[d] - self.row(ia)[d] + self.row(ic)[d])
            .collect();
        self.top_k_where(&query, k, |t| t != a && t != b && t != c)
    }
}

fn cosine_against(query: &[f64], query_norm: f64, candidate: &[f64], candidate_norm: f64) -> f64 {
    let dot: f64 = query.iter().zip(candidate).map(|(x, y)| x * y).sum();
    (dot / (query_norm * candidate_norm)).clamp(-1.0, 1.0)
}

/// Ranking order: similarity descending, then token ascending. `Less` means
/// "ranks earlier".
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    match b.0.partial_cmp(&a.0).expect("similarities are finite") {
        Ordering::Equal => a.1.cmp(b.1),
        other => other,
    }
}

struct HeapEntry {
    sim: f64,
    token_idx: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.sim == other.sim && self.token_idx == other.token_idx
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; "greater" here means "worse ranked" so
        // the heap root is the candidate to evict. token_idx order matches
        // token order because rows are sorted at build time.
        match self.sim.partial_cmp(&other.sim).expect("similarities are finite") {
            Ordering::Equal => self.token_idx.cmp(&other.token_idx),
            Ordering::Less => Ordering::Greater,
            Ordering::Greater => Ordering::Less,
        }
    }
}
