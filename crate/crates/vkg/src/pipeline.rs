//! End-to-end store construction: extract a graph from every document,
//! merge, optionally augment (sameAs files, dependency lists), train
//! embeddings, link, and report the build-cost estimate.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::alert::{load_dependencies, AlertError};
use crate::ingest::{
    default_stopwords, extract_document_graph, load_corpus, load_patterns, merge_graphs,
    preprocess_sentences, Document, ExtractionPattern, Gazetteer, IngestError,
};
use crate::kg::{terms, KgError, KnowledgeGraph, Object};
use crate::store::{
    save_store, BuildEcho, CorpusStats, LinkReport, LinkStats, StoreError, StoreMeta, VkgStore,
};
use crate::train::{rdf2vec, train, walk_token, TrainError, TrainerConfig, TrainerMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub trainer: TrainerConfig,
    /// Walk geometry for graph-augmented training.
    pub walk_length: usize,
    pub walks_per_entity: usize,
    /// Turtle file of `owl:sameAs` assertions plus external facts.
    pub same_as_file: Option<PathBuf>,
    /// `program<TAB>library` dependency list.
    pub dependencies_file: Option<PathBuf>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            trainer: TrainerConfig::default(),
            walk_length: 4,
            walks_per_entity: 10,
            same_as_file: None,
            dependencies_file: None,
        }
    }
}

#[derive(Debug)]
pub struct BuildOutput {
    pub store: VkgStore,
    pub meta: StoreMeta,
    pub link_report: LinkReport,
}

/// Build a store from in-memory parts.
pub fn build_store(
    documents: &[Document],
    gazetteer: &Gazetteer,
    patterns: &[ExtractionPattern],
    options: &BuildOptions,
) -> Result<BuildOutput, PipelineError> {
    if documents.is_empty() {
        return Err(IngestError::EmptyCorpus.into());
    }
    let stopwords = default_stopwords();

    let mut graphs = Vec::with_capacity(documents.len());
    let mut sentences = Vec::new();
    for doc in documents {
        graphs.push(extract_document_graph(doc, gazetteer, patterns, &stopwords)?.graph);
        for sentence in preprocess_sentences(&doc.text, gazetteer, &stopwords) {
            sentences.push(sentence.into_iter().map(|t| t.token).collect::<Vec<_>>());
        }
    }
    let mut graph = merge_graphs(&graphs)?;

    if let Some(path) = &options.same_as_file {
        augment_from_file(&mut graph, path)?;
    }
    if let Some(path) = &options.dependencies_file {
        for triple in load_dependencies(path)? {
            graph.assert_triple(triple)?;
        }
    }

    let snapshot = match options.trainer.mode {
        TrainerMode::GraphAugmentedCbow => {
            let entity_vectors =
                rdf2vec(&graph, options.walk_length, options.walks_per_entity, &options.trainer)?;
            let by_token: HashMap<String, Vec<f64>> = entity_vectors
                .into_iter()
                .map(|(entity, v)| (walk_token(&entity), v))
                .collect();
            train(&options.trainer, &sentences, Some(&by_token))?
        }
        _ => train(&options.trainer, &sentences, None)?,
    };

    let (store, link_report) = VkgStore::link(graph, snapshot.space)?;
    let meta = StoreMeta {
        complexity: store.complexity(options.trainer.context_window as u64),
        build: BuildEcho {
            mode: options.trainer.mode.name().to_string(),
            context_window: options.trainer.context_window,
            dimension: options.trainer.dimension,
            epochs: options.trainer.epochs,
            negatives: options.trainer.negatives,
            min_term_frequency: options.trainer.min_term_frequency,
            learning_rate: options.trainer.learning_rate,
            seed: options.trainer.seed,
        },
        corpus: CorpusStats {
            documents: documents.len(),
            latest_timestamp: documents.iter().map(|d| d.timestamp).max().unwrap_or(0),
        },
        links: LinkStats {
            linked: link_report.linked,
            unlinked: link_report.unlinked_entities.len(),
            orphan_tokens: link_report.orphan_tokens.len(),
        },
        loss_curve: snapshot.loss_curve.clone(),
    };
    Ok(BuildOutput { store, meta, link_report })
}

/// Build from a corpus directory plus gazetteer and pattern files, writing
/// the store directory when `out_dir` is given.
pub fn build_from_files(
    corpus_dir: &Path,
    gazetteer_path: &Path,
    patterns_path: &Path,
    options: &BuildOptions,
    out_dir: Option<&Path>,
) -> Result<BuildOutput, PipelineError> {
    let documents = load_corpus(corpus_dir)?;
    let gazetteer = Gazetteer::load(gazetteer_path)?;
    let patterns = load_patterns(patterns_path)?;
    let output = build_store(&documents, &gazetteer, &patterns, options)?;
    if let Some(dir) = out_dir {
        save_store(&output.store, &output.meta, dir)?;
    }
    Ok(output)
}

/// Merge a sameAs file into the graph: its `owl:sameAs` triples become the
/// link list, the whole file serves as the external graph.
fn augment_from_file(graph: &mut KnowledgeGraph, path: &Path) -> Result<(), PipelineError> {
    let external = KnowledgeGraph::from_turtle(&std::fs::read_to_string(path)?)?;
    let links: Vec<_> = external
        .subject_objects(&terms::owl_same_as())
        .into_iter()
        .filter_map(|(s, o)| match o {
            Object::Iri(ext) => Some((s, ext)),
            Object::Literal(_) => None,
        })
        .collect();
    graph.augment_same_as(&links, &external)?;
    Ok(())
}
