//! Relation prediction: a feedforward classifier mapping a pair of entity
//! vectors to a relation from the ontology's relation set, used to propose
//! new triples.
//!
//! The network is concatenation -> dense tanh hidden layer -> softmax over
//! the relation set, trained with seeded minibatch SGD. Cross-entropy is the
//! default loss; squared error on the softmax output is available as a
//! config option.

use std::collections::BTreeSet;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{terms, Iri, Object, Triple};
use crate::numeric::{central_difference_gradient, max_relative_error};
use crate::store::VkgStore;

#[derive(Debug, Error)]
pub enum RelPredError {
    #[error("TooFewExamples: {got} examples for {relations} relations")]
    TooFewExamples { got: usize, relations: usize },
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("EmptyRelationSet")]
    EmptyRelationSet,
    #[error("MalformedModel: {reason}")]
    MalformedModel { reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered, duplicate-free relation list; the order fixes output indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    relations: Vec<Iri>,
}

impl RelationSet {
    pub fn new(relations: Vec<Iri>) -> Result<Self, RelPredError> {
        if relations.is_empty() {
            return Err(RelPredError::EmptyRelationSet);
        }
        let unique: BTreeSet<&Iri> = relations.iter().collect();
        if unique.len() != relations.len() {
            return Err(RelPredError::MalformedModel {
                reason: "relation set contains duplicates".into(),
            });
        }
        Ok(Self { relations })
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Iri> {
        self.relations.iter()
    }

    pub fn get(&self, index: usize) -> &Iri {
        &self.relations[index]
    }

    pub fn index_of(&self, relation: &Iri) -> Option<usize> {
        self.relations.iter().position(|r| r == relation)
    }
}

/// One training example: a pair of entity vectors and the relation between
/// them.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub vector_dimension: usize,
    pub examples: Vec<TrainingExample>,
    pub relation_set: RelationSet,
    pub report: TrainingSetReport,
}

/// Why candidate triples were kept or skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSetReport {
    pub eligible: usize,
    pub skipped_unlinked: usize,
    pub skipped_untyped: usize,
    pub skipped_shared_class: usize,
    pub skipped_literal_object: usize,
}

/// One example per graph triple whose predicate is in the relation set and
/// whose endpoints are linked, typed, and of disjoint direct classes.
pub fn build_training_set(store: &VkgStore, relation_set: &RelationSet) -> TrainingSet {
    let mut report = TrainingSetReport::default();
    let mut examples = Vec::new();
    let dim = store.space().dimension();
    for triple in store.graph().triples() {
        let Some(label) = relation_set.index_of(&triple.predicate) else { continue };
        let object = match &triple.object {
            Object::Iri(o) => o,
            Object::Literal(_) => {
                report.skipped_literal_object += 1;
                continue;
            }
        };
        let (Some(lt), Some(rt)) = (store.link_token(&triple.subject), store.link_token(object))
        else {
            report.skipped_unlinked += 1;
            continue;
        };
        let left_classes = store.graph().direct_classes(&triple.subject);
        let right_classes = store.graph().direct_classes(object);
        if left_classes.is_empty() || right_classes.is_empty() {
            report.skipped_untyped += 1;
            continue;
        }
        if left_classes.intersection(&right_classes).next().is_some() {
            report.skipped_shared_class += 1;
            continue;
        }
        report.eligible += 1;
        examples.push(TrainingExample {
            left: store.space().vector(lt).expect("linked token").to_vec(),
            right: store.space().vector(rt).expect("linked token").to_vec(),
            label,
        });
    }
    TrainingSet { vector_dimension: dim, examples, relation_set: relation_set.clone(), report }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    CrossEntropy,
    /// Squared error between the softmax output and the one-hot target.
    MeanSquaredError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 60,
            learning_rate: 0.1,
            batch: 16,
            seed: 42,
            loss: LossKind::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    /// Accuracy on the held-out third; absent when the set is too small to
    /// split.
    pub held_out_accuracy: Option<f64>,
    pub train_examples: usize,
    pub test_examples: usize,
}

/// Trained relation classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationModel {
    pub relations: Vec<String>,
    pub input_dimension: usize, // 2 x vector dimension
    pub hidden: usize,
    pub w1: Vec<f64>, // hidden x input
    pub b1: Vec<f64>,
    pub w2: Vec<f64>, // outputs x hidden
    pub b2: Vec<f64>,
    pub meta: TrainMeta,
}

/// Train with default hyperparameters; see [`train_model_with`].
pub fn train_model(
    ts: &TrainingSet,
    epochs: usize,
    seed: u64,
) -> Result<RelationModel, RelPredError> {
    train_model_with(ts, &ModelConfig { epochs, seed, ..ModelConfig::default() })
}

/// Deterministic under the seed: shuffle, hold out a third, minibatch SGD.
pub fn train_model_with(ts: &TrainingSet, config: &ModelConfig) -> Result<RelationModel, RelPredError> {
    let outputs = ts.relation_set.len();
    if ts.examples.len() < outputs {
        return Err(RelPredError::TooFewExamples { got: ts.examples.len(), relations: outputs });
    }
    let input_dim = 2 * ts.vector_dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut order: Vec<usize> = (0..ts.examples.len()).collect();
    shuffle(&mut order, &mut rng);
    let test_len = ts.examples.len() / 3;
    let (test_idx, train_idx) = order.split_at(test_len);

    let mut params = Params::init(input_dim, config.hidden, outputs, &mut rng);
    let mut train_order: Vec<usize> = train_idx.to_vec();
    let mut final_loss = 0.0;
    for _ in 0..config.epochs {
        shuffle(&mut train_order, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_order.chunks(config.batch.max(1)) {
            let mut grad = Params::zeros(input_dim, config.hidden, outputs);
            for &i in batch {
                let example = &ts.examples[i];
                let x = concat(&example.left, &example.right);
                epoch_loss += params.backward(&x, example.label, config.loss, &mut grad);
            }
            params.apply(&grad, config.learning_rate / batch.len() as f64);
        }
        final_loss =
            if train_order.is_empty() { 0.0 } else { epoch_loss / train_order.len() as f64 };
    }

    let held_out_accuracy = if test_idx.is_empty() {
        None
    } else {
        let mut correct = 0usize;
        for &i in test_idx {
            let example = &ts.examples[i];
            let x = concat(&example.left, &example.right);
            let (predicted, _) = argmax(&params.forward(&x).probabilities);
            if predicted == example.label {
                correct += 1;
            }
        }
        Some(correct as f64 / test_idx.len() as f64)
    };

    Ok(RelationModel {
        relations: ts.relation_set.iter().map(|r| r.to_string()).collect(),
        input_dimension: input_dim,
        hidden: config.hidden,
        w1: params.w1,
        b1: params.b1,
        w2: params.w2,
        b2: params.b2,
        meta: TrainMeta {
            seed: config.seed,
            epochs: config.epochs,
            final_loss,
            held_out_accuracy,
            train_examples: train_idx.len(),
            test_examples: test_idx.len(),
        },
    })
}

/// Prediction: the argmax relation, its probability, and the full softmax
/// distribution in relation-set order.
pub fn predict_relation(
    model: &RelationModel,
    left: &[f64],
    right: &[f64],
) -> Result<(Iri, f64, Vec<(Iri, f64)>), RelPredError> {
    if 2 * left.len() != model.input_dimension || left.len() != right.len() {
        return Err(RelPredError::DimensionMismatch {
            expected: model.input_dimension,
            got: left.len() + right.len(),
        });
    }
    let params = Params {
        input: model.input_dimension,
        hidden: model.hidden,
        outputs: model.relations.len(),
        w1: model.w1.clone(),
        b1: model.b1.clone(),
        w2: model.w2.clone(),
        b2: model.b2.clone(),
    };
    let x = concat(left, right);
    let probs = params.forward(&x).probabilities;
    let (best, confidence) = argmax(&probs);
    let relations: Vec<Iri> = model
        .relations
        .iter()
        .map(|r| Iri::parse(r).map_err(|e| RelPredError::MalformedModel { reason: e.to_string() }))
        .collect::<Result<_, _>>()?;
    let distribution: Vec<(Iri, f64)> =
        relations.iter().cloned().zip(probs.iter().copied()).collect();
    Ok((relations[best].clone(), confidence, distribution))
}

/// A machine-proposed triple, kept apart from asserted knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub triple: Triple,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProposeReport {
    pub proposals: Vec<Proposal>,
    pub skipped_unlinked: usize,
    pub skipped_shared_class: usize,
    pub skipped_already_asserted: usize,
    pub skipped_below_threshold: usize,
}

/// Predict a relation for each candidate pair and keep predictions at or
/// above the confidence threshold. Pairs must be linked entities of
/// differing classes; already-asserted triples are never re-proposed.
pub fn propose_triples(
    model: &RelationModel,
    store: &VkgStore,
    pairs: &[(Iri, Iri)],
    threshold: f64,
) -> Result<ProposeReport, RelPredError> {
    let mut report = ProposeReport::default();
    for (a, b) in pairs {
        let (Some(ta), Some(tb)) = (store.link_token(a), store.link_token(b)) else {
            report.skipped_unlinked += 1;
            continue;
        };
        let ca = store.graph().direct_classes(a);
        let cb = store.graph().direct_classes(b);
        if ca.is_empty() || cb.is_empty() || ca.intersection(&cb).next().is_some() {
            report.skipped_shared_class += 1;
            continue;
        }
        let va = store.space().vector(ta).expect("linked token");
        let vb = store.space().vector(tb).expect("linked token");
        let (relation, confidence, _) = predict_relation(model, va, vb)?;
        if confidence < threshold {
            report.skipped_below_threshold += 1;
            continue;
        }
        let triple = Triple::with_iri_object(a.clone(), relation, b.clone());
        if store.graph().contains(&triple) {
            report.skipped_already_asserted += 1;
            continue;
        }
        report.proposals.push(Proposal { triple, confidence });
    }
    Ok(report)
}

/// Export proposals as Turtle proposal nodes so they are never silently
/// merged with asserted triples.
pub fn proposals_to_turtle(proposals: &[Proposal]) -> String {
    let mut g = crate::kg::KnowledgeGraph::new();
    for (i, p) in proposals.iter().enumerate() {
        let node = Iri::entity(&format!("proposal_{i:04}")).expect("generated name");
        g.assert_triple(Triple::with_iri_object(
            node.clone(),
            terms::rdf_type(),
            terms::proposed_triple(),
        ))
        .expect("proposal node");
        g.assert_triple(Triple::with_iri_object(
            node.clone(),
            Iri::new("vkg", "subject").expect("vkg prefix"),
            p.triple.subject.clone(),
        ))
        .expect("proposal subject");
        g.assert_triple(Triple::with_iri_object(
            node.clone(),
            Iri::new("vkg", "predicate").expect("vkg prefix"),
            p.triple.predicate.clone(),
        ))
        .expect("proposal predicate");
        g.assert_triple(Triple::new(
            node.clone(),
            Iri::new("vkg", "object").expect("vkg prefix"),
            p.triple.object.clone(),
        ))
        .expect("proposal object");
        g.assert_triple(Triple::with_literal(
            node,
            Iri::new("vkg", "confidence").expect("vkg prefix"),
            &format!("{:.6}", p.confidence),
        ))
        .expect("proposal confidence");
    }
    g.to_turtle()
}

pub fn save_model(model: &RelationModel, path: &std::path::Path) -> Result<(), RelPredError> {
    let mut text = serde_json::to_string_pretty(model)
        .map_err(|e| RelPredError::MalformedModel { reason: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &std::path::Path) -> Result<RelationModel, RelPredError> {
    let text = std::fs::read_to_string(path)?;
    let model: RelationModel = serde_json::from_str(&text)
        .map_err(|e| RelPredError::MalformedModel { reason: e.to_string() })?;
    let expected_w1 = model.hidden * model.input_dimension;
    let expected_w2 = model.relations.len() * model.hidden;
    if model.w1.len() != expected_w1
        || model.b1.len() != model.hidden
        || model.w2.len() != expected_w2
        || model.b2.len() != model.relations.len()
        || model.w1.iter().chain(&model.w2).chain(&model.b1).chain(&model.b2).any(|v| !v.is_finite())
    {
        return Err(RelPredError::MalformedModel {
            reason: "parameter array sizes do not match layer dimensions or are non-finite".into(),
        });
    }
    Ok(model)
}

/// Reorder the output classes of a trained model; predictions permute with
/// the relation list, nothing else changes.
pub fn permute_relations(model: &RelationModel, permutation: &[usize]) -> RelationModel {
    assert_eq!(permutation.len(), model.relations.len());
    let hidden = model.hidden;
    let mut out = model.clone();
    for (new_idx, &old_idx) in permutation.iter().enumerate() {
        out.relations[new_idx] = model.relations[old_idx].clone();
        out.b2[new_idx] = model.b2[old_idx];
        out.w2[new_idx * hidden..(new_idx + 1) * hidden]
            .copy_from_slice(&model.w2[old_idx * hidden..(old_idx + 1) * hidden]);
    }
    out
}

struct Forward {
    hidden_activation: Vec<f64>,
    probabilities: Vec<f64>,
}

struct Params {
    input: usize,
    hidden: usize,
    outputs: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Params {
    fn init(input: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut draw = |scale: f64| (rng.next_u64() as f64 / u64::MAX as f64 - 0.5) * 2.0 * scale;
        let s1 = (1.0 / input as f64).sqrt();
        let s2 = (1.0 / hidden as f64).sqrt();
        let w1 = (0..hidden * input).map(|_| draw(s1)).collect();
        let w2 = (0..outputs * hidden).map(|_| draw(s2)).collect();
        Self { input, hidden, outputs, w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; outputs] }
    }

    fn zeros(input: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            input,
            hidden,
            outputs,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let mut hidden_activation = vec![0.0; self.hidden];
        for h in 0..self.hidden {
            let mut z = self.b1[h];
            for i in 0..self.input {
                z += self.w1[h * self.input + i] * x[i];
            }
            hidden_activation[h] = z.tanh();
        }
        let mut logits = vec![0.0; self.outputs];
        for o in 0..self.outputs {
            let mut z = self.b2[o];
            for h in 0..self.hidden {
                z += self.w2[o * self.hidden + h] * hidden_activation[h];
            }
            logits[o] = z;
        }
        Forward { hidden_activation, probabilities: softmax(&logits) }
    }

    /// Accumulate gradients for one example; returns its loss.
    fn backward(&self, x: &[f64], label: usize, loss: LossKind, grad: &mut Params) -> f64 {
        let fwd = self.forward(x);
        let p = &fwd.probabilities;
        let loss_value = match loss {
            LossKind::CrossEntropy => -p[label].max(1e-300).ln(),
            LossKind::MeanSquaredError => {
                let mut s = 0.0;
                for (o, &prob) in p.iter().enumerate() {
                    let target = if o == label { 1.0 } else { 0.0 };
                    s += (prob - target) * (prob - target);
                }
                s
            }
        };

        // dL/dlogits
        let mut dlogits = vec![0.0; self.outputs];
        match loss {
            LossKind::CrossEntropy => {
                for (o, d) in dlogits.iter_mut().enumerate() {
                    *d = p[o] - if o == label { 1.0 } else { 0.0 };
                }
            }
            LossKind::MeanSquaredError => {
                // dL/dp = 2(p - y); pull back through the softmax Jacobian.
                let mut dp = vec![0.0; self.outputs];
                for (o, d) in dp.iter_mut().enumerate() {
                    *d = 2.0 * (p[o] - if o == label { 1.0 } else { 0.0 });
                }
                let dot: f64 = dp.iter().zip(p).map(|(d, pi)| d * pi).sum();
                for o in 0..self.outputs {
                    dlogits[o] = p[o] * (dp[o] - dot);
                }
            }
        }

        let mut dhidden = vec![0.0; self.hidden];
        for o in 0..self.outputs {
            grad.b2[o] += dlogits[o];
            for h in 0..self.hidden {
                grad.w2[o * self.hidden + h] += dlogits[o] * fwd.hidden_activation[h];
                dhidden[h] += dlogits[o] * self.w2[o * self.hidden + h];
            }
        }
        for h in 0..self.hidden {
            let dz = dhidden[h] * (1.0 - fwd.hidden_activation[h] * fwd.hidden_activation[h]);
            grad.b1[h] += dz;
            for i in 0..self.input {
                grad.w1[h * self.input + i] += dz * x[i];
            }
        }
        loss_value
    }

    fn apply(&mut self, grad: &Params, lr: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grad.w1) {
            *w -= lr * g;
        }
        for (b, g) in self.b1.iter_mut().zip(&grad.b1) {
            *b -= lr * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grad.w2) {
            *w -= lr * g;
        }
        for (b, g) in self.b2.iter_mut().zip(&grad.b2) {
            *b -= lr * g;
        }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = self.w1.clone();
        out.extend(&self.b1);
        out.extend(&self.w2);
        out.extend(&self.b2);
        out
    }

    fn unflatten(input: usize, hidden: usize, outputs: usize, flat: &[f64]) -> Self {
        let (w1, rest) = flat.split_at(hidden * input);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(outputs * hidden);
        Self {
            input,
            hidden,
            outputs,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: b2.to_vec(),
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    (best, values[best])
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
}

/// Finite-difference check of the classifier loss gradient on a random tiny
/// instance; returns the max relative error over all parameters.
pub fn gradient_check(loss: LossKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, hidden, outputs) = (4, 3, 3);
    let params = Params::init(input, hidden, outputs, &mut rng);
    let examples: Vec<(Vec<f64>, usize)> = (0..6)
        .map(|i| {
            let x: Vec<f64> =
                (0..input).map(|_| rng.next_u64() as f64 / u64::MAX as f64 - 0.5).collect();
            (x, i % outputs)
        })
        .collect();

    let flat = params.flatten();
    let loss_fn = |flat: &[f64]| -> f64 {
        let p = Params::unflatten(input, hidden, outputs, flat);
        let mut grad = Params::zeros(input, hidden, outputs);
        examples.iter().map(|(x, label)| p.backward(x, *label, loss, &mut grad)).sum()
    };

    let mut grad = Params::zeros(input, hidden, outputs);
    for (x, label) in &examples {
        params.backward(x, *label, loss, &mut grad);
    }
    let numeric = central_difference_gradient(loss_fn, &flat, 1e-4);
    max_relative_error(&grad.flatten(), &numeric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;
    use crate::vec::VectorSpace;

    fn iri(text: &str) -> Iri {
        Iri::parse(text).unwrap()
    }

    /// Cluster-centered synthetic set: each relation r gets examples around
    /// (center_r, -center_r) with small deterministic noise.
    fn separable_training_set(relations: usize, per_relation: usize, dim: usize) -> TrainingSet {
        let relation_set = RelationSet::new(
            (0..relations).map(|i| Iri::new("uco", &format!("rel{i}")).unwrap()).collect(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut examples = Vec::new();
        for r in 0..relations {
            for _ in 0..per_relation {
                let mut left = vec![0.0; dim];
                let mut right = vec![0.0; dim];
                left[r % dim] = 1.0;
                right[(r + 1) % dim] = 1.0;
                for v in left.iter_mut().chain(right.iter_mut()) {
                    *v += 0.05 * (rng.next_u64() as f64 / u64::MAX as f64 - 0.5);
                }
                examples.push(TrainingExample { left, right, label: r });
            }
        }
        TrainingSet {
            vector_dimension: dim,
            examples,
            relation_set,
            report: TrainingSetReport::default(),
        }
    }

    /// Nearest-centroid oracle: verifies the fixture really is separable
    /// before asking the network to learn it.
    fn nearest_centroid_accuracy(ts: &TrainingSet) -> f64 {
        let classes = ts.relation_set.len();
        let dim = 2 * ts.vector_dimension;
        let mut centroids = vec![vec![0.0; dim]; classes];
        let mut counts = vec![0usize; classes];
        for e in &ts.examples {
            let x = concat(&e.left, &e.right);
            for (c, xi) in centroids[e.label].iter_mut().zip(&x) {
                *c += xi;
            }
            counts[e.label] += 1;
        }
        for (c, n) in centroids.iter_mut().zip(&counts) {
            for v in c.iter_mut() {
                *v /= (*n).max(1) as f64;
            }
        }
        let mut correct = 0usize;
        for e in &ts.examples {
            let x = concat(&e.left, &e.right);
            let mut best = (f64::INFINITY, 0);
            for (label, c) in centroids.iter().enumerate() {
                let d: f64 = c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, label);
                }
            }
            if best.1 == e.label {
                correct += 1;
            }
        }
        correct as f64 / ts.examples.len() as f64
    }

    #[test]
    fn separable_fixture_reaches_high_held_out_accuracy() {
        let ts = separable_training_set(7, 60, 8);
        assert!(nearest_centroid_accuracy(&ts) > 0.99, "fixture must be separable");
        let model = train_model(&ts, 60, 3).unwrap();
        let accuracy = model.meta.held_out_accuracy.unwrap();
        assert!(accuracy >= 0.95, "held-out accuracy {accuracy}");
    }

    #[test]
    fn single_relation_set_predicts_it_with_full_confidence() {
        let ts = separable_training_set(1, 12, 4);
        let model = train_model(&ts, 5, 1).unwrap();
        assert_eq!(model.meta.held_out_accuracy, Some(1.0));
        let (rel, confidence, dist) = predict_relation(&model, &[0.3; 4], &[0.1; 4]).unwrap();
        assert_eq!(rel, iri("uco:rel0"));
        assert!((confidence - 1.0).abs() < 1e-12);
        assert_eq!(dist.len(), 1);
    }

    #[test]
    fn same_seed_trains_identical_parameters() {
        let ts = separable_training_set(3, 20, 4);
        let a = train_model(&ts, 10, 5).unwrap();
        let b = train_model(&ts, 10, 5).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.w2, b.w2);
        assert_eq!(a.meta.held_out_accuracy, b.meta.held_out_accuracy);
    }

    #[test]
    fn too_few_examples_is_an_error() {
        let mut ts = separable_training_set(7, 60, 8);
        ts.examples.truncate(3);
        assert!(matches!(train_model(&ts, 5, 1), Err(RelPredError::TooFewExamples { .. })));
    }

    #[test]
    fn softmax_distribution_is_normalized_and_positive() {
        let ts = separable_training_set(5, 20, 6);
        let model = train_model(&ts, 10, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let left: Vec<f64> =
                (0..6).map(|_| rng.next_u64() as f64 / u64::MAX as f64 - 0.5).collect();
            let right: Vec<f64> =
                (0..6).map(|_| rng.next_u64() as f64 / u64::MAX as f64 - 0.5).collect();
            let (_, _, dist) = predict_relation(&model, &left, &right).unwrap();
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(dist.iter().all(|(_, p)| *p > 0.0 && *p < 1.0 + 1e-12));
        }
    }

    #[test]
    fn gradient_check_passes_for_both_losses() {
        for loss in [LossKind::CrossEntropy, LossKind::MeanSquaredError] {
            for seed in 0..5 {
                let err = gradient_check(loss, seed);
                assert!(err < 1e-4, "{loss:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn permuting_relations_permutes_the_distribution() {
        let ts = separable_training_set(4, 15, 4);
        let model = train_model(&ts, 8, 9).unwrap();
        let permutation = [2, 0, 3, 1];
        let permuted = permute_relations(&model, &permutation);
        let left = [0.4, -0.2, 0.9, 0.0];
        let right = [0.1, 0.5, -0.3, 0.2];
        let (_, _, base) = predict_relation(&model, &left, &right).unwrap();
        let (_, _, perm) = predict_relation(&permuted, &left, &right).unwrap();
        for (new_idx, &old_idx) in permutation.iter().enumerate() {
            assert_eq!(perm[new_idx].0, base[old_idx].0);
            assert!((perm[new_idx].1 - base[old_idx].1).abs() < 1e-12);
        }
    }

    #[test]
    fn android_buffer_overflow_pair_predicts_has_vulnerability() {
        // Cluster-based fixture where (product vector, vulnerability vector)
        // pairs are labeled hasVulnerability; android and buffer_overflow
        // are placed at those cluster centers, so the trained truth for the
        // pair is hasVulnerability.
        let relation_set = RelationSet::new(vec![
            iri("uco:hasVulnerability"),
            iri("uco:hasAttacker"),
            iri("uco:hasMeans"),
        ])
        .unwrap();
        let dim = 6;
        let centers: [(usize, usize); 3] = [(0, 1), (2, 3), (4, 5)];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut examples = Vec::new();
        for (label, (li, ri)) in centers.iter().enumerate() {
            for _ in 0..60 {
                let mut left = vec![0.0; dim];
                let mut right = vec![0.0; dim];
                left[*li] = 1.0;
                right[*ri] = 1.0;
                for v in left.iter_mut().chain(right.iter_mut()) {
                    *v += 0.05 * (rng.next_u64() as f64 / u64::MAX as f64 - 0.5);
                }
                examples.push(TrainingExample { left, right, label });
            }
        }
        let ts = TrainingSet {
            vector_dimension: dim,
            examples,
            relation_set,
            report: TrainingSetReport::default(),
        };
        let model = train_model(&ts, 40, 4).unwrap();
        let mut android = vec![0.0; dim];
        android[0] = 1.0; // product-side center of the hasVulnerability cluster
        let mut buffer_overflow = vec![0.0; dim];
        buffer_overflow[1] = 1.0;
        let (relation, confidence, _) = predict_relation(&model, &android, &buffer_overflow).unwrap();
        assert_eq!(relation, iri("uco:hasVulnerability"));
        assert!(confidence > 0.8, "confidence {confidence}");
    }

    #[test]
    fn prediction_on_training_points_recovers_labels() {
        let ts = separable_training_set(7, 30, 8);
        let model = train_model(&ts, 60, 3).unwrap();
        let mut correct = 0usize;
        for e in &ts.examples {
            let (rel, _, _) = predict_relation(&model, &e.left, &e.right).unwrap();
            if rel == *ts.relation_set.get(e.label) {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / ts.examples.len() as f64;
        assert!(accuracy >= 0.99, "training accuracy {accuracy}");
    }

    #[test]
    fn model_round_trips_through_json() {
        let ts = separable_training_set(3, 15, 4);
        let model = train_model(&ts, 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.w1, model.w1);
        assert_eq!(loaded.relations, model.relations);
    }

    fn store_with_six_triples() -> VkgStore {
        // 6 triples, 4 eligible (enumerated by hand):
        //   (MySQL, hasVulnerability, dos)            eligible
        //   (MySQL, hasVulnerability, csrf)           eligible
        //   (dos, affectsProduct, MySQL)              eligible
        //   (dos, hasAttacker, remote_attackers)      eligible
        //   (MySQL, relatedTo, PostgreSQL)            shared class, skipped
        //   (MySQL, hasVulnerability, ghost)          unlinked object, skipped
        let mut g = KnowledgeGraph::new();
        let product = iri("uco:Product");
        let vuln = iri("uco:Vulnerability");
        let attacker = iri("uco:Attacker");
        for (e, c) in [
            ("<MySQL>", &product),
            ("<PostgreSQL>", &product),
            ("<dos>", &vuln),
            ("<csrf>", &vuln),
            ("<remote_attackers>", &attacker),
            ("<ghost>", &vuln),
        ] {
            g.assert_triple(Triple::with_iri_object(iri(e), terms::rdf_type(), c.clone()))
                .unwrap();
        }
        let rel = |s: &str, p: &str, o: &str| {
            Triple::with_iri_object(iri(s), iri(p), iri(o))
        };
        g.assert_triple(rel("<MySQL>", "uco:hasVulnerability", "<dos>")).unwrap();
        g.assert_triple(rel("<MySQL>", "uco:hasVulnerability", "<csrf>")).unwrap();
        g.assert_triple(rel("<dos>", "uco:affectsProduct", "<MySQL>")).unwrap();
        g.assert_triple(rel("<dos>", "uco:hasAttacker", "<remote_attackers>")).unwrap();
        g.assert_triple(rel("<MySQL>", "uco:relatedTo", "<PostgreSQL>")).unwrap();
        g.assert_triple(rel("<MySQL>", "uco:hasVulnerability", "<ghost>")).unwrap();

        let mut b = VectorSpace::builder(3);
        for (i, t) in ["mysql", "postgresql", "dos", "csrf", "remote_attackers"]
            .iter()
            .enumerate()
        {
            b.insert(t, vec![1.0, i as f64, 0.5]).unwrap();
        }
        let (store, _) = VkgStore::link(g, b.build()).unwrap();
        store
    }

    #[test]
    fn training_set_selects_eligible_triples() {
        let store = store_with_six_triples();
        let relation_set = RelationSet::new(vec![
            iri("uco:hasVulnerability"),
            iri("uco:affectsProduct"),
            iri("uco:hasAttacker"),
            iri("uco:relatedTo"),
        ])
        .unwrap();
        let ts = build_training_set(&store, &relation_set);
        assert_eq!(ts.report.eligible, 4);
        assert_eq!(ts.report.skipped_shared_class, 1);
        assert_eq!(ts.report.skipped_unlinked, 1);
        assert_eq!(ts.examples.len(), 4);
    }

    #[test]
    fn empty_relation_intersection_gives_empty_training_set() {
        let store = store_with_six_triples();
        let relation_set = RelationSet::new(vec![iri("uco:neverUsed")]).unwrap();
        let ts = build_training_set(&store, &relation_set);
        assert!(ts.examples.is_empty());
    }

    #[test]
    fn proposals_respect_threshold_and_do_not_duplicate() {
        let store = store_with_six_triples();
        let relation_set =
            RelationSet::new(vec![iri("uco:hasVulnerability"), iri("uco:affectsProduct"), iri("uco:hasAttacker")])
                .unwrap();
        let ts = build_training_set(&store, &relation_set);
        let model = train_model(&ts, 40, 2).unwrap();
        let pairs = vec![
            (iri("<MySQL>"), iri("<dos>")),
            (iri("<MySQL>"), iri("<csrf>")),
            (iri("<PostgreSQL>"), iri("<dos>")),
        ];
        let unreachable = propose_triples(&model, &store, &pairs, 1.01).unwrap();
        assert!(unreachable.proposals.is_empty());

        let everything = propose_triples(&model, &store, &pairs, 0.0).unwrap();
        // (MySQL, hasVulnerability, dos) and (MySQL, hasVulnerability, csrf)
        // are already asserted, so proposals never duplicate them.
        for p in &everything.proposals {
            assert!(!store.graph().contains(&p.triple));
        }
        let text = proposals_to_turtle(&everything.proposals);
        assert!(text.contains("vkg:ProposedTriple") || everything.proposals.is_empty());
    }
}
