//! Store-as-directory layout: `graph.ttl` (assertions), `links.ttl`
//! (entity-to-token links), `vectors.txt` (embeddings), `meta.json`
//! (complexity estimate, build configuration echo, corpus stats).
//!
//! Everything is plain text so intermediates stay diffable, and the link
//! table is reconstructible from the turtle files alone.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kg::{terms, KnowledgeGraph};
use crate::vec::{load_vectors, save_vectors};

use super::{ComplexityEstimate, StoreError, VkgStore};

pub const GRAPH_FILE: &str = "graph.ttl";
pub const LINKS_FILE: &str = "links.ttl";
pub const VECTORS_FILE: &str = "vectors.txt";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreMeta {
    pub complexity: ComplexityEstimate,
    pub build: BuildEcho,
    pub corpus: CorpusStats,
    pub links: LinkStats,
    #[serde(default)]
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildEcho {
    pub mode: String,
    pub context_window: usize,
    pub dimension: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub min_term_frequency: u64,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    /// Newest document timestamp, so reruns of identical inputs emit
    /// identical metadata.
    pub latest_timestamp: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkStats {
    pub linked: usize,
    pub unlinked: usize,
    pub orphan_tokens: usize,
}

pub fn save_store(store: &VkgStore, meta: &StoreMeta, dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir)?;

    let has_vector = terms::has_vector();
    let mut assertions = KnowledgeGraph::with_prefixes(store.graph().prefixes().clone());
    let mut links = KnowledgeGraph::with_prefixes(store.graph().prefixes().clone());
    for t in store.graph().triples() {
        if t.predicate == has_vector {
            links.assert_triple(t.clone())?;
        } else {
            assertions.assert_triple(t.clone())?;
        }
    }

    fs::write(dir.join(GRAPH_FILE), assertions.to_turtle())?;
    fs::write(dir.join(LINKS_FILE), links.to_turtle())?;
    save_vectors(store.space(), &dir.join(VECTORS_FILE))?;
    let mut meta_json = serde_json::to_string_pretty(meta).expect("meta serializes");
    meta_json.push('\n');
    fs::write(dir.join(META_FILE), meta_json)?;
    Ok(())
}

pub fn load_store(dir: &Path) -> Result<(VkgStore, StoreMeta), StoreError> {
    let graph_text = fs::read_to_string(dir.join(GRAPH_FILE))?;
    let links_text = fs::read_to_string(dir.join(LINKS_FILE))?;
    let mut graph = KnowledgeGraph::from_turtle(&graph_text)?;
    let links_graph = KnowledgeGraph::from_turtle(&links_text)?;
    for (label, expansion) in links_graph.prefixes() {
        graph.declare_prefix(label, expansion)?;
    }
    for t in links_graph.triples() {
        graph.assert_triple(t.clone())?;
    }

    let space = load_vectors(&dir.join(VECTORS_FILE))?;
    let meta: StoreMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)
        .map_err(|e| StoreError::InvalidStore { reason: format!("meta.json: {e}") })?;

    let store = VkgStore::from_linked_graph(graph, space)?;
    validate_store(&store, &meta)?;
    Ok((store, meta))
}

/// Cross-file invariants a store directory must satisfy.
pub fn validate_store(store: &VkgStore, meta: &StoreMeta) -> Result<(), StoreError> {
    let rebuilt = super::rebuild_links(store.graph())?;
    if &rebuilt != store.links() {
        return Err(StoreError::InvalidStore {
            reason: "link table does not match the graph's vkg:hasVector triples".into(),
        });
    }
    for (entity, token) in store.links() {
        if !store.space().contains(token) {
            return Err(StoreError::InvalidStore {
                reason: format!("{entity} links to `{token}` which is missing from vectors"),
            });
        }
    }
    if store.space().dimension() != meta.build.dimension {
        return Err(StoreError::InvalidStore {
            reason: format!(
                "vectors have dimension {}, meta declares {}",
                store.space().dimension(),
                meta.build.dimension
            ),
        });
    }
    let c = &meta.complexity;
    let expected =
        c.context_window * c.dimension * c.hidden_size + (c.class_count + c.relation_count) + c.vocab_size;
    if c.total != expected {
        return Err(StoreError::InvalidStore {
            reason: format!("complexity total {} does not match its fields ({expected})", c.total),
        });
    }
    if c.vocab_size != store.space().vocab_size() as u64 {
        return Err(StoreError::InvalidStore {
            reason: format!(
                "meta vocab_size {} does not match vectors ({})",
                c.vocab_size,
                store.space().vocab_size()
            ),
        });
    }
    Ok(())
}
