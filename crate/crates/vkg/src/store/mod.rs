//! The linked whole: a knowledge graph and a vector space over the same
//! entities, joined by `vkg:hasVector` relations.
//!
//! Search here is "graph-aided": candidates come from vector top-k over
//! linked tokens, then class assertions from the graph filter the survivors.

mod manifest;

pub use manifest::{
    load_store, save_store, validate_store, BuildEcho, CorpusStats, LinkStats, StoreMeta,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::kg::{normalize_token, terms, Iri, KgError, KnowledgeGraph, Object, Triple};
use crate::vec::{VecError, VectorSpace};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("UnlinkedEntity: {entity} has no vector")]
    UnlinkedEntity { entity: String },
    #[error("UnknownClass: {class} is not in the ontology")]
    UnknownClass { class: String },
    #[error("UnknownEntity: {entity} is not in the graph")]
    UnknownEntity { entity: String },
    #[error("InvalidStore: {reason}")]
    InvalidStore { reason: String },
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Vec(#[from] VecError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of linking graph entities to vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkReport {
    pub linked: usize,
    pub unlinked_entities: Vec<Iri>,
    /// Vocabulary tokens no entity links to.
    pub orphan_tokens: Vec<String>,
}

impl LinkReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "linked {} entities; {} unlinked; {} orphan vocabulary tokens\n",
            self.linked,
            self.unlinked_entities.len(),
            self.orphan_tokens.len()
        );
        for e in &self.unlinked_entities {
            out.push_str(&format!("unlinked: {e}\n"));
        }
        for t in &self.orphan_tokens {
            out.push_str(&format!("orphan token: {t}\n"));
        }
        out
    }
}

/// Inputs to the build-cost estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ComplexityEstimate {
    pub context_window: u64,
    pub dimension: u64,
    pub hidden_size: u64,
    pub class_count: u64,
    pub relation_count: u64,
    pub vocab_size: u64,
    pub total: u64,
}

/// Build-cost estimate: `(window × dim × hidden) + (classes + relations) + vocab`.
pub fn complexity_estimate(
    context_window: u64,
    dimension: u64,
    hidden_size: u64,
    class_count: u64,
    relation_count: u64,
    vocab_size: u64,
) -> ComplexityEstimate {
    ComplexityEstimate {
        context_window,
        dimension,
        hidden_size,
        class_count,
        relation_count,
        vocab_size,
        total: context_window * dimension * hidden_size + (class_count + relation_count) + vocab_size,
    }
}

/// Graph + vectors + the entity-to-token link table. Immutable once built;
/// relinking produces a new value.
#[derive(Debug, Clone)]
pub struct VkgStore {
    graph: KnowledgeGraph,
    space: VectorSpace,
    links: BTreeMap<Iri, String>,
    // token -> entities linked to it (normally one)
    reverse: HashMap<String, BTreeSet<Iri>>,
}

/// Candidate over-fetch schedule for class-filtered search: 4×k, then 16×k,
/// then a full scan if fewer than k survivors remain.
const EXPANSION_FACTORS: [usize; 2] = [4, 16];

impl VkgStore {
    /// Link graph entities to vocabulary tokens with the default normalizer
    /// (lowercase, spaces to underscores) and seal the store.
    pub fn link(graph: KnowledgeGraph, space: VectorSpace) -> Result<(Self, LinkReport), StoreError> {
        Self::link_with(graph, space, normalize_token)
    }

    /// Link with a caller-supplied token normalization rule. Every link is
    /// mirrored as a `(entity, vkg:hasVector, "token")` triple so the table
    /// can be rebuilt from the graph alone.
    pub fn link_with(
        mut graph: KnowledgeGraph,
        space: VectorSpace,
        normalizer: impl Fn(&str) -> String,
    ) -> Result<(Self, LinkReport), StoreError> {
        let mut links = BTreeMap::new();
        let mut unlinked = Vec::new();
        for entity in graph.entities() {
            let token = normalizer(entity.local());
            if space.contains(&token) {
                graph.assert_triple(Triple::with_literal(
                    entity.clone(),
                    terms::has_vector(),
                    &token,
                ))?;
                links.insert(entity, token);
            } else {
                unlinked.push(entity);
            }
        }
        let used: BTreeSet<&String> = links.values().collect();
        let orphan_tokens: Vec<String> =
            space.tokens().filter(|t| !used.contains(&t.to_string())).map(String::from).collect();
        let report =
            LinkReport { linked: links.len(), unlinked_entities: unlinked, orphan_tokens };
        Ok((Self::from_parts(graph, space, links), report))
    }

    /// Assemble a store from a graph that already carries its hasVector
    /// triples (the on-disk load path). Link targets are validated.
    pub fn from_linked_graph(graph: KnowledgeGraph, space: VectorSpace) -> Result<Self, StoreError> {
        let links = rebuild_links(&graph)?;
        for (entity, token) in &links {
            if !space.contains(token) {
                return Err(StoreError::InvalidStore {
                    reason: format!("{entity} links to `{token}` which is not in the vocabulary"),
                });
            }
        }
        Ok(Self::from_parts(graph, space, links))
    }

    fn from_parts(graph: KnowledgeGraph, space: VectorSpace, links: BTreeMap<Iri, String>) -> Self {
        let mut reverse: HashMap<String, BTreeSet<Iri>> = HashMap::new();
        for (entity, token) in &links {
            reverse.entry(token.clone()).or_default().insert(entity.clone());
        }
        Self { graph, space, links, reverse }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn space(&self) -> &VectorSpace {
        &self.space
    }

    pub fn links(&self) -> &BTreeMap<Iri, String> {
        &self.links
    }

    pub fn link_token(&self, entity: &Iri) -> Option<&str> {
        self.links.get(entity).map(|s| s.as_str())
    }

    pub fn entities_for_token(&self, token: &str) -> BTreeSet<Iri> {
        self.reverse.get(token).cloned().unwrap_or_default()
    }

    /// Cosine similarity between two linked entities.
    pub fn entity_cosine(&self, a: &Iri, b: &Iri) -> Result<f64, StoreError> {
        let ta = self.require_link(a)?;
        let tb = self.require_link(b)?;
        Ok(self.space.cosine(ta, tb)?)
    }

    fn require_link(&self, entity: &Iri) -> Result<&str, StoreError> {
        self.link_token(entity)
            .ok_or_else(|| StoreError::UnlinkedEntity { entity: entity.to_string() })
    }

    /// Graph-aided similarity search: vector top-k over linked tokens, seed
    /// dropped, optionally filtered to entities whose classes (with subclass
    /// closure) include `class_filter`; first `k` survivors are returned.
    pub fn vkg_search(
        &self,
        seed: &Iri,
        k: usize,
        class_filter: Option<&Iri>,
    ) -> Result<Vec<(Iri, f64)>, StoreError> {
        let seed_token = self.require_link(seed)?.to_string();
        if let Some(class) = class_filter {
            if !self.graph.is_class(class) {
                return Err(StoreError::UnknownClass { class: class.to_string() });
            }
        }
        let query = self
            .space
            .vector(&seed_token)
            .expect("link targets exist in vocabulary")
            .to_vec();

        let linked_candidates = self.reverse.len();
        for factor in EXPANSION_FACTORS {
            let fetch = k.saturating_mul(factor);
            if fetch >= linked_candidates {
                break;
            }
            let survivors = self.search_pass(&query, seed, &seed_token, fetch, k, class_filter)?;
            if survivors.len() >= k {
                return Ok(survivors);
            }
        }
        // Full scan over every linked token.
        self.search_pass(&query, seed, &seed_token, linked_candidates, k, class_filter)
    }

    fn search_pass(
        &self,
        query: &[f64],
        seed: &Iri,
        seed_token: &str,
        fetch: usize,
        k: usize,
        class_filter: Option<&Iri>,
    ) -> Result<Vec<(Iri, f64)>, StoreError> {
        let ranked = self.space.top_k_where(query, fetch, |token| {
            token != seed_token && self.reverse.contains_key(token)
        })?;
        let mut out = Vec::with_capacity(k);
        'tokens: for (token, sim) in ranked.results {
            for entity in self.entities_for_token(&token) {
                if entity == *seed {
                    continue;
                }
                if let Some(class) = class_filter {
                    if !self.graph.class_of(&entity).contains(class) {
                        continue;
                    }
                }
                out.push((entity, sim));
                if out.len() == k {
                    break 'tokens;
                }
            }
        }
        Ok(out)
    }

    /// Build-cost estimate for this store under a given trainer geometry.
    /// The hidden layer size is taken equal to the embedding dimension
    /// (single projection layer); relations exclude `rdf:type`,
    /// `rdfs:subClassOf`, and `vkg:hasVector`.
    pub fn complexity(&self, context_window: u64) -> ComplexityEstimate {
        let skip = [terms::rdf_type(), terms::rdfs_subclass_of(), terms::has_vector()];
        let relation_count =
            self.graph.predicates().iter().filter(|p| !skip.contains(p)).count() as u64;
        complexity_estimate(
            context_window,
            self.space.dimension() as u64,
            self.space.dimension() as u64,
            self.graph.classes().len() as u64,
            relation_count,
            self.space.vocab_size() as u64,
        )
    }
}

/// Reconstruct the entity-to-token link table from `vkg:hasVector` triples.
pub fn rebuild_links(graph: &KnowledgeGraph) -> Result<BTreeMap<Iri, String>, StoreError> {
    let mut links = BTreeMap::new();
    for (subject, object) in graph.subject_objects(&terms::has_vector()) {
        let token = match object {
            Object::Literal(t) => t,
            Object::Iri(iri) => {
                return Err(StoreError::InvalidStore {
                    reason: format!("{subject} vkg:hasVector must name a token literal, found {iri}"),
                })
            }
        };
        if links.insert(subject.clone(), token).is_some() {
            return Err(StoreError::InvalidStore {
                reason: format!("{subject} carries more than one vkg:hasVector triple"),
            });
        }
    }
    Ok(links)
}
