//! Random-walk sentence generation over the knowledge graph, and the
//! walk-then-train pipeline that embeds graph entities.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{normalize_token, Iri, KnowledgeGraph};

use super::{train, TrainError, TrainerConfig, TrainerMode};

/// Walk sentences: token streams alternating entity and relation labels,
/// with the underlying identifier paths kept for validity checking.
#[derive(Debug, Clone)]
pub struct WalkCorpus {
    pub sentences: Vec<Vec<String>>,
    /// Identifier form of each sentence: entity, relation, entity, ...
    pub paths: Vec<Vec<Iri>>,
    pub walk_length: usize,
    pub walks_per_entity: usize,
}

impl WalkCorpus {
    /// True when every (entity, relation, entity) step is an asserted triple.
    pub fn validate_against(&self, graph: &KnowledgeGraph) -> bool {
        self.paths.iter().all(|path| {
            path.chunks(2).collect::<Vec<_>>().windows(2).all(|w| {
                let (from, edge) = (&w[0][0], &w[0].get(1));
                let to = &w[1][0];
                match edge {
                    Some(relation) => graph
                        .out_edges(from)
                        .iter()
                        .any(|(p, o)| p == *relation && o == to),
                    None => false,
                }
            })
        })
    }
}

/// Token used for an identifier inside walk sentences: corpus entities use
/// the same normalization as vector linking so that walk vocabularies align
/// with text vocabularies; prefixed identifiers keep their namespace.
pub fn walk_token(iri: &Iri) -> String {
    if iri.is_corpus_entity() {
        normalize_token(iri.local())
    } else {
        format!("{}:{}", iri.prefix(), iri.local().to_lowercase())
    }
}

/// Uniform random out-edge walks of `walk_length` steps from every entity.
/// Dead ends truncate the walk. Deterministic under the seed.
pub fn generate_walks(
    graph: &KnowledgeGraph,
    walk_length: usize,
    walks_per_entity: usize,
    seed: u64,
) -> WalkCorpus {
    assert!(walk_length >= 1, "walk_length must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::new();
    let mut paths = Vec::new();
    for entity in graph.entities() {
        for _ in 0..walks_per_entity {
            let mut sentence = vec![walk_token(&entity)];
            let mut path = vec![entity.clone()];
            let mut current = entity.clone();
            for _ in 0..walk_length {
                let edges = graph.out_edges(&current);
                if edges.is_empty() {
                    break;
                }
                let pick = (rng.next_u64() % edges.len() as u64) as usize;
                let (relation, object) = edges[pick].clone();
                sentence.push(walk_token(&relation));
                sentence.push(walk_token(&object));
                path.push(relation);
                path.push(object.clone());
                current = object;
            }
            sentences.push(sentence);
            paths.push(path);
        }
    }
    WalkCorpus { sentences, paths, walk_length, walks_per_entity }
}

/// Embed graph entities: generate walk sentences, train a skip-gram model
/// over them, and return vectors for entity tokens only.
pub fn rdf2vec(
    graph: &KnowledgeGraph,
    walk_length: usize,
    walks_per_entity: usize,
    config: &TrainerConfig,
) -> Result<BTreeMap<Iri, Vec<f64>>, TrainError> {
    let walks = generate_walks(graph, walk_length, walks_per_entity, config.seed);
    if walks.sentences.is_empty() {
        return Ok(BTreeMap::new());
    }
    let config = TrainerConfig { mode: TrainerMode::SkipGram, ..config.clone() };
    let snapshot = train(&config, &walks.sentences, None)?;
    let mut out = BTreeMap::new();
    for entity in graph.entities() {
        if let Some(v) = snapshot.space.vector(&walk_token(&entity)) {
            out.insert(entity, v.to_vec());
        }
    }
    Ok(out)
}
