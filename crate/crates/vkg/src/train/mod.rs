//! Embedding training from scratch: CBOW and skip-gram with negative
//! sampling, plus the graph-augmented CBOW variant where an entity's
//! graph-walk vector joins the averaged context.
//!
//! Training is single-threaded and fully seeded: the same (seed, corpus,
//! config) always yields bit-identical vectors.

mod walks;

pub use walks::{generate_walks, rdf2vec, walk_token, WalkCorpus};

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numeric::{sigmoid, softplus};
use crate::vec::VectorSpace;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("EmptyCorpus: no tokens to train on")]
    EmptyCorpus,
    #[error("EmptyVocab: no token passes the frequency cutoff")]
    EmptyVocab,
    #[error("DimensionMismatch: graph vector for `{token}` has {got} components, expected {expected}")]
    DimensionMismatch { token: String, expected: usize, got: usize },
    #[error("InvalidConfig: {reason}")]
    InvalidConfig { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainerMode {
    Cbow,
    SkipGram,
    GraphAugmentedCbow,
}

impl TrainerMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainerMode::Cbow => "cbow",
            TrainerMode::SkipGram => "skipgram",
            TrainerMode::GraphAugmentedCbow => "graph_augmented_cbow",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "cbow" => Some(TrainerMode::Cbow),
            "skipgram" | "skip-gram" => Some(TrainerMode::SkipGram),
            "graph_augmented_cbow" | "graph-augmented-cbow" => Some(TrainerMode::GraphAugmentedCbow),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub mode: TrainerMode,
    pub context_window: usize,
    pub dimension: usize,
    pub min_term_frequency: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            mode: TrainerMode::Cbow,
            context_window: 7,
            dimension: 64,
            min_term_frequency: 1,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.05,
            seed: 42,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.context_window < 1 {
            return Err(TrainError::InvalidConfig { reason: "context_window must be >= 1".into() });
        }
        if self.dimension < 1 {
            return Err(TrainError::InvalidConfig { reason: "dimension must be >= 1".into() });
        }
        if self.negatives < 1 {
            return Err(TrainError::InvalidConfig { reason: "negatives must be >= 1".into() });
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig { reason: "learning_rate must be > 0".into() });
        }
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig { reason: "epochs must be >= 1".into() });
        }
        Ok(())
    }
}

/// Vocabulary with counts, ordered by frequency descending then token
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequencies[id]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.as_str())
    }
}

/// Count tokens and keep those with frequency >= cutoff.
pub fn build_vocab(corpus: &[Vec<String>], cutoff: u64) -> Result<Vocabulary, TrainError> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0usize;
    for sentence in corpus {
        for token in sentence {
            *counts.entry(token.as_str()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    let mut kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= cutoff)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens = Vec::with_capacity(kept.len());
    let mut frequencies = Vec::with_capacity(kept.len());
    let mut index = HashMap::with_capacity(kept.len());
    for (i, (t, c)) in kept.into_iter().enumerate() {
        index.insert(t.clone(), i);
        tokens.push(t);
        frequencies.push(c);
    }
    Ok(Vocabulary { tokens, frequencies, index })
}

/// A trained embedding table plus its per-epoch mean loss.
#[derive(Debug, Clone)]
pub struct TrainingSnapshot {
    pub space: VectorSpace,
    pub loss_curve: Vec<f64>,
    /// Single-threaded runs are bit-reproducible for a fixed seed.
    pub deterministic: bool,
}

/// Unigram^0.75 noise distribution for negative sampling.
struct NegativeSampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeSampler {
    fn new(vocab: &Vocabulary) -> Self {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut total = 0.0;
        for id in 0..vocab.len() {
            total += (vocab.frequency(id) as f64).powf(0.75);
            cumulative.push(total);
        }
        Self { cumulative, total }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = (rng.next_u64() as f64 / u64::MAX as f64) * self.total;
        match self.cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => (i + 1).min(self.cumulative.len() - 1),
            Err(i) => i.min(self.cumulative.len() - 1),
        }
    }

    /// Draw a negative different from `target`; falls back to the next token
    /// over if the distribution is too concentrated to avoid it by sampling.
    fn draw_excluding(&self, rng: &mut ChaCha8Rng, target: usize, vocab_len: usize) -> Option<usize> {
        if vocab_len <= 1 {
            return None;
        }
        for _ in 0..64 {
            let n = self.draw(rng);
            if n != target {
                return Some(n);
            }
        }
        Some((target + 1) % vocab_len)
    }
}

struct Matrices {
    dimension: usize,
    input: Vec<f64>,  // vocab x dim, the embeddings
    output: Vec<f64>, // vocab x dim, negative-sampling weights
}

impl Matrices {
    fn init(vocab_len: usize, dimension: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut input = vec![0.0; vocab_len * dimension];
        for v in input.iter_mut() {
            *v = (rng.next_u64() as f64 / u64::MAX as f64 - 0.5) / dimension as f64;
        }
        Self { dimension, input, output: vec![0.0; vocab_len * dimension] }
    }

    fn input_row(&self, id: usize) -> &[f64] {
        &self.input[id * self.dimension..(id + 1) * self.dimension]
    }
}

/// One prediction event: average the input rows (plus an optional fixed
/// graph vector), score the target against drawn negatives.
struct Event {
    input_rows: Vec<usize>,
    graph_vector: Option<Vec<f64>>,
    target: usize,
}

fn sentence_events(
    sentence: &[usize],
    config: &TrainerConfig,
    vocab: &Vocabulary,
    graph_vectors: Option<&HashMap<String, Vec<f64>>>,
) -> Result<Vec<Event>, TrainError> {
    let mut events = Vec::new();
    let window = config.context_window;
    for (t, &center) in sentence.iter().enumerate() {
        let lo = t.saturating_sub(window);
        let hi = (t + window + 1).min(sentence.len());
        let context: Vec<usize> =
            (lo..hi).filter(|&i| i != t).map(|i| sentence[i]).collect();
        if context.is_empty() {
            continue;
        }
        match config.mode {
            TrainerMode::Cbow | TrainerMode::GraphAugmentedCbow => {
                let graph_vector = if config.mode == TrainerMode::GraphAugmentedCbow {
                    lookup_graph_vector(vocab.token(center), config.dimension, graph_vectors)?
                } else {
                    None
                };
                events.push(Event { input_rows: context, graph_vector, target: center });
            }
            TrainerMode::SkipGram => {
                for c in context {
                    events.push(Event { input_rows: vec![center], graph_vector: None, target: c });
                }
            }
        }
    }
    Ok(events)
}

/// A graph vector joins the context average only when it is present and
/// nonzero; all-zero vectors contribute nothing, so graph-augmented training
/// with zero vectors is identical to plain CBOW step for step.
fn lookup_graph_vector(
    token: &str,
    dimension: usize,
    graph_vectors: Option<&HashMap<String, Vec<f64>>>,
) -> Result<Option<Vec<f64>>, TrainError> {
    let Some(map) = graph_vectors else { return Ok(None) };
    let Some(v) = map.get(token) else { return Ok(None) };
    if v.len() != dimension {
        return Err(TrainError::DimensionMismatch {
            token: token.to_string(),
            expected: dimension,
            got: v.len(),
        });
    }
    if v.iter().all(|x| *x == 0.0) {
        return Ok(None);
    }
    Ok(Some(v.clone()))
}

/// Train embeddings over whitespace-tokenized sentences. Graph vectors are
/// required exactly when the mode is graph-augmented CBOW.
pub fn train(
    config: &TrainerConfig,
    corpus: &[Vec<String>],
    graph_vectors: Option<&HashMap<String, Vec<f64>>>,
) -> Result<TrainingSnapshot, TrainError> {
    config.validate()?;
    if config.mode == TrainerMode::GraphAugmentedCbow && graph_vectors.is_none() {
        return Err(TrainError::InvalidConfig {
            reason: "graph_augmented_cbow requires graph vectors".into(),
        });
    }
    let vocab = build_vocab(corpus, config.min_term_frequency)?;
    if vocab.is_empty() {
        return Err(TrainError::EmptyVocab);
    }
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut matrices = Matrices::init(vocab.len(), config.dimension, &mut rng);
    let sampler = NegativeSampler::new(&vocab);

    // Event count for the learning-rate schedule.
    let mut events_per_epoch = 0usize;
    for s in &sentences {
        events_per_epoch += sentence_events(s, config, &vocab, graph_vectors)?.len();
    }
    let total_events = (events_per_epoch * config.epochs).max(1);

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut done = 0usize;
    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_events = 0usize;
        for sentence in &sentences {
            for event in sentence_events(sentence, config, &vocab, graph_vectors)? {
                let lr = config.learning_rate
                    * (1.0 - done as f64 / total_events as f64).max(1e-4);
                epoch_loss += train_event(&mut matrices, &sampler, &event, config, &mut rng, lr, vocab.len());
                epoch_events += 1;
                done += 1;
            }
        }
        loss_curve.push(if epoch_events == 0 { 0.0 } else { epoch_loss / epoch_events as f64 });
    }

    let mut builder = VectorSpace::builder(config.dimension);
    for id in 0..vocab.len() {
        builder
            .insert(vocab.token(id), matrices.input_row(id).to_vec())
            .expect("vocabulary tokens are unique and finite");
    }
    Ok(TrainingSnapshot { space: builder.build(), loss_curve, deterministic: true })
}

/// One negative-sampling SGD step; returns the event loss.
fn train_event(
    matrices: &mut Matrices,
    sampler: &NegativeSampler,
    event: &Event,
    config: &TrainerConfig,
    rng: &mut ChaCha8Rng,
    lr: f64,
    vocab_len: usize,
) -> f64 {
    let dim = matrices.dimension;
    let slots = event.input_rows.len() + event.graph_vector.iter().len();
    let mut hidden = vec![0.0; dim];
    for &row in &event.input_rows {
        for d in 0..dim {
            hidden[d] += matrices.input[row * dim + d];
        }
    }
    if let Some(g) = &event.graph_vector {
        for d in 0..dim {
            hidden[d] += g[d];
        }
    }
    for h in hidden.iter_mut() {
        *h /= slots as f64;
    }

    let mut error = vec![0.0; dim];
    let mut loss = 0.0;
    let mut step = |matrices: &mut Matrices, output_row: usize, label: f64, error: &mut [f64]| {
        let base = output_row * dim;
        let score: f64 = (0..dim).map(|d| hidden[d] * matrices.output[base + d]).sum();
        loss += if label == 1.0 { softplus(-score) } else { softplus(score) };
        let coeff = sigmoid(score) - label;
        for d in 0..dim {
            error[d] += coeff * matrices.output[base + d];
            matrices.output[base + d] -= lr * coeff * hidden[d];
        }
    };

    step(matrices, event.target, 1.0, &mut error);
    for _ in 0..config.negatives {
        if let Some(negative) = sampler.draw_excluding(rng, event.target, vocab_len) {
            step(matrices, negative, 0.0, &mut error);
        }
    }

    for &row in &event.input_rows {
        for d in 0..dim {
            matrices.input[row * dim + d] -= lr * error[d] / slots as f64;
        }
    }
    loss
}

/// Compare the analytic gradient of the negative-sampling loss against
/// central finite differences (step 1e-4) on the given corpus. Parameters
/// are randomly initialized and negatives are drawn once and frozen; the
/// returned value is the largest relative disagreement over all parameters.
/// Intended for tiny instances (vocabulary <= 10, dimension <= 8).
pub fn gradient_check(
    config: &TrainerConfig,
    corpus: &[Vec<String>],
    graph_vectors: Option<&HashMap<String, Vec<f64>>>,
) -> Result<f64, TrainError> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_term_frequency)?;
    if vocab.is_empty() {
        return Err(TrainError::EmptyVocab);
    }
    let dim = config.dimension;
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sampler = NegativeSampler::new(&vocab);
    let mut events = Vec::new();
    for s in &sentences {
        for event in sentence_events(s, config, &vocab, graph_vectors)? {
            let negatives: Vec<usize> = (0..config.negatives)
                .filter_map(|_| sampler.draw_excluding(&mut rng, event.target, vocab.len()))
                .collect();
            events.push((event, negatives));
        }
    }

    // Flat parameter vector: [input | output], both randomized.
    let n = vocab.len() * dim;
    let mut params = vec![0.0; 2 * n];
    for p in params.iter_mut() {
        *p = rng.next_u64() as f64 / u64::MAX as f64 - 0.5;
    }

    let loss_fn = |params: &[f64]| -> f64 {
        let (input, output) = params.split_at(n);
        let mut total = 0.0;
        for (event, negatives) in &events {
            let slots = event.input_rows.len() + event.graph_vector.iter().len();
            let mut hidden = vec![0.0; dim];
            for &row in &event.input_rows {
                for d in 0..dim {
                    hidden[d] += input[row * dim + d];
                }
            }
            if let Some(g) = &event.graph_vector {
                for d in 0..dim {
                    hidden[d] += g[d];
                }
            }
            for h in hidden.iter_mut() {
                *h /= slots as f64;
            }
            let score = |row: usize| -> f64 {
                (0..dim).map(|d| hidden[d] * output[row * dim + d]).sum()
            };
            total += softplus(-score(event.target));
            for &neg in negatives {
                total += softplus(score(neg));
            }
        }
        total
    };

    // Analytic gradient accumulated over all events.
    let mut analytic = vec![0.0; 2 * n];
    {
        let (input, output) = params.split_at(n);
        for (event, negatives) in &events {
            let slots = event.input_rows.len() + event.graph_vector.iter().len();
            let mut hidden = vec![0.0; dim];
            for &row in &event.input_rows {
                for d in 0..dim {
                    hidden[d] += input[row * dim + d];
                }
            }
            if let Some(g) = &event.graph_vector {
                for d in 0..dim {
                    hidden[d] += g[d];
                }
            }
            for h in hidden.iter_mut() {
                *h /= slots as f64;
            }
            let mut error = vec![0.0; dim];
            let mut accumulate = |row: usize, label: f64, error: &mut [f64]| {
                let base = row * dim;
                let score: f64 = (0..dim).map(|d| hidden[d] * output[base + d]).sum();
                let coeff = sigmoid(score) - label;
                for d in 0..dim {
                    error[d] += coeff * output[base + d];
                    analytic[n + base + d] += coeff * hidden[d];
                }
            };
            accumulate(event.target, 1.0, &mut error);
            for &neg in negatives {
                accumulate(neg, 0.0, &mut error);
            }
            for &row in &event.input_rows {
                for d in 0..dim {
                    analytic[row * dim + d] += error[d] / slots as f64;
                }
            }
        }
    }

    let numeric = crate::numeric::central_difference_gradient(loss_fn, &params, 1e-4);
    Ok(crate::numeric::max_relative_error(&analytic, &numeric))
}
