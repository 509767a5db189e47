//! Corpus preprocessing and desk-scale entity/relation extraction:
//! gazetteer recognition plus ordered class/keyword patterns over
//! vulnerability-style text, document-level graph emission, and
//! cross-document merge by normalized-name unification.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{normalize_token, terms, Iri, KgError, KnowledgeGraph, Triple};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("EmptyCorpus: the corpus directory has no documents")]
    EmptyCorpus,
    #[error("MalformedManifest: {reason}")]
    MalformedManifest { reason: String },
    #[error("MalformedGazetteer: {reason}")]
    MalformedGazetteer { reason: String },
    #[error("MalformedPattern: pattern `{name}`: {reason}")]
    MalformedPattern { name: String, reason: String },
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Nvd,
    Twitter,
    Reddit,
    Blog,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub text: String,
    pub timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    source: Source,
    timestamp: u64,
}

/// Load a corpus directory: a `manifest.json` list of (id, file, source,
/// timestamp) plus the referenced text files.
pub fn load_corpus(dir: &Path) -> Result<Vec<Document>, IngestError> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(IngestError::EmptyCorpus);
    }
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .map_err(|e| IngestError::MalformedManifest { reason: e.to_string() })?;
    if entries.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let mut seen = BTreeSet::new();
    let mut documents = Vec::with_capacity(entries.len());
    for entry in entries {
        if !seen.insert(entry.id.clone()) {
            return Err(IngestError::MalformedManifest {
                reason: format!("duplicate document id `{}`", entry.id),
            });
        }
        let text = std::fs::read_to_string(dir.join(&entry.file))?;
        documents.push(Document {
            id: entry.id,
            source: entry.source,
            text,
            timestamp: entry.timestamp,
        });
    }
    Ok(documents)
}

pub fn write_corpus(documents: &[Document], dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, doc) in documents.iter().enumerate() {
        let file = format!("doc{:04}.txt", i + 1);
        std::fs::write(dir.join(&file), &doc.text)?;
        entries.push(ManifestEntry {
            id: doc.id.clone(),
            file,
            source: doc.source,
            timestamp: doc.timestamp,
        });
    }
    let mut json = serde_json::to_string_pretty(&entries)
        .map_err(|e| IngestError::MalformedManifest { reason: e.to_string() })?;
    json.push('\n');
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Surface phrase -> (entity, class) dictionary standing in for trained NER.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    // phrase words -> (entity, class), longest phrases preferred
    entries: BTreeMap<Vec<String>, (Iri, Iri)>,
    max_phrase_words: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct GazetteerEntryFile {
    phrase: String,
    entity: String,
    class: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct GazetteerFile {
    entries: Vec<GazetteerEntryFile>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new(), max_phrase_words: 0 }
    }

    /// Phrases are matched lowercase; the entity keeps its canonical casing.
    pub fn add(&mut self, phrase: &str, entity: &str, class: &Iri) -> Result<(), IngestError> {
        let words: Vec<String> =
            phrase.to_lowercase().split_whitespace().map(String::from).collect();
        if words.is_empty() {
            return Err(IngestError::MalformedGazetteer {
                reason: format!("empty phrase for entity `{entity}`"),
            });
        }
        let entity_iri = Iri::entity(entity).map_err(|e| IngestError::MalformedGazetteer {
            reason: format!("entity `{entity}`: {e}"),
        })?;
        self.max_phrase_words = self.max_phrase_words.max(words.len());
        self.entries.insert(words, (entity_iri, class.clone()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entities(&self) -> BTreeSet<Iri> {
        self.entries.values().map(|(e, _)| e.clone()).collect()
    }

    fn lookup(&self, words: &[String]) -> Option<&(Iri, Iri)> {
        self.entries.get(words)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file: GazetteerFile = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| IngestError::MalformedGazetteer { reason: e.to_string() })?;
        let mut g = Self::new();
        for entry in file.entries {
            let class = Iri::parse(&entry.class).map_err(|e| IngestError::MalformedGazetteer {
                reason: format!("class `{}`: {e}", entry.class),
            })?;
            g.add(&entry.phrase, &entry.entity, &class)?;
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let entries: Vec<GazetteerEntryFile> = self
            .entries
            .iter()
            .map(|(words, (entity, class))| GazetteerEntryFile {
                phrase: words.join(" "),
                entity: entity.local().to_string(),
                class: class.to_string(),
            })
            .collect();
        let mut json = serde_json::to_string_pretty(&GazetteerFile { entries })
            .map_err(|e| IngestError::MalformedGazetteer { reason: e.to_string() })?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }
}

impl Default for Gazetteer {
    fn default() -> Self {
        Self::new()
    }
}

/// One preprocessed token, with the gazetteer hit when the token is a
/// collapsed entity phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceToken {
    pub token: String,
    pub entity: Option<(Iri, Iri)>,
}

pub fn default_stopwords() -> BTreeSet<String> {
    [
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have",
        "if", "in", "into", "is", "it", "its", "of", "on", "or", "such", "that", "the", "their",
        "then", "there", "these", "they", "this", "to", "was", "were", "which", "will", "with",
        "via", "aka", "also", "after", "can", "may",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn word_split(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Sentence-split, lowercase, collapse gazetteer phrases (longest match
/// first, left to right), then drop stopwords from the non-entity tokens.
pub fn preprocess_sentences(
    text: &str,
    gazetteer: &Gazetteer,
    stopwords: &BTreeSet<String>,
) -> Vec<Vec<SentenceToken>> {
    let mut sentences = Vec::new();
    for raw in text.split(['.', '!', '?', '\n']) {
        let words = word_split(raw);
        if words.is_empty() {
            continue;
        }
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let mut matched = false;
            let longest = gazetteer.max_phrase_words.min(words.len() - i);
            for len in (1..=longest).rev() {
                if let Some((entity, class)) = gazetteer.lookup(&words[i..i + len]) {
                    tokens.push(SentenceToken {
                        token: normalize_token(entity.local()),
                        entity: Some((entity.clone(), class.clone())),
                    });
                    i += len;
                    matched = true;
                    break;
                }
            }
            if !matched {
                if !stopwords.contains(&words[i]) {
                    tokens.push(SentenceToken { token: words[i].clone(), entity: None });
                }
                i += 1;
            }
        }
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    sentences
}

/// Flattened token stream for training corpora.
pub fn preprocess(
    text: &str,
    gazetteer: &Gazetteer,
    stopwords: &BTreeSet<String>,
) -> Vec<String> {
    preprocess_sentences(text, gazetteer, stopwords)
        .into_iter()
        .flatten()
        .map(|t| t.token)
        .collect()
}

/// Relations extraction patterns are allowed to emit.
pub fn permitted_relations() -> BTreeSet<String> {
    [
        "hasAffectedSoftware",
        "hasAttacker",
        "hasMeans",
        "hasWeakness",
        "isUnderAttack",
        "hasSoftware",
        "hasCVE_ID",
        "hasVulnerability",
        "hasConsequences",
        "hasProduct",
        "affectsProduct",
        "hasDependency",
        "hasVersion",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// A trigger item: an entity of a given class, or a literal keyword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerItem {
    Class(Iri),
    Keyword(String),
}

/// An emission template: (subject slot, relation, object slot) where slots
/// are 1-based indices of class items in the trigger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub subject_slot: usize,
    pub relation: Iri,
    pub object_slot: usize,
}

/// Ordered class/keyword template over a sentence; every in-order occurrence
/// (with gaps) fires the emissions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPattern {
    pub name: String,
    pub trigger: Vec<TriggerItem>,
    pub emits: Vec<Emission>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternFileEntry {
    name: String,
    trigger: Vec<String>,
    emits: Vec<[String; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternFile {
    patterns: Vec<PatternFileEntry>,
}

impl ExtractionPattern {
    pub fn new(
        name: &str,
        trigger: Vec<TriggerItem>,
        emits: Vec<Emission>,
    ) -> Result<Self, IngestError> {
        let slots = trigger.iter().filter(|t| matches!(t, TriggerItem::Class(_))).count();
        if slots == 0 {
            return Err(IngestError::MalformedPattern {
                name: name.to_string(),
                reason: "trigger needs at least one class item".into(),
            });
        }
        let permitted = permitted_relations();
        for e in &emits {
            if e.subject_slot == 0 || e.subject_slot > slots || e.object_slot == 0 || e.object_slot > slots
            {
                return Err(IngestError::MalformedPattern {
                    name: name.to_string(),
                    reason: format!(
                        "emission slots ${} and ${} must reference class items 1..={slots}",
                        e.subject_slot, e.object_slot
                    ),
                });
            }
            if !(e.relation.prefix() == "uco" || e.relation.prefix() == "intel")
                || !permitted.contains(e.relation.local())
            {
                return Err(IngestError::MalformedPattern {
                    name: name.to_string(),
                    reason: format!("relation {} is not a permitted extraction relation", e.relation),
                });
            }
        }
        Ok(Self { name: name.to_string(), trigger, emits })
    }

    fn parse_entry(entry: PatternFileEntry) -> Result<Self, IngestError> {
        let mut trigger = Vec::new();
        for item in &entry.trigger {
            if let Some(class) = item.strip_prefix("class:") {
                trigger.push(TriggerItem::Class(Iri::parse(class).map_err(|e| {
                    IngestError::MalformedPattern { name: entry.name.clone(), reason: e.to_string() }
                })?));
            } else if let Some(word) = item.strip_prefix("kw:") {
                trigger.push(TriggerItem::Keyword(word.to_lowercase()));
            } else {
                return Err(IngestError::MalformedPattern {
                    name: entry.name.clone(),
                    reason: format!("trigger item `{item}` must start with class: or kw:"),
                });
            }
        }
        let mut emits = Vec::new();
        for [s, r, o] in &entry.emits {
            let slot = |text: &str| -> Result<usize, IngestError> {
                text.strip_prefix('$')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| IngestError::MalformedPattern {
                        name: entry.name.clone(),
                        reason: format!("`{text}` is not a $n slot reference"),
                    })
            };
            emits.push(Emission {
                subject_slot: slot(s)?,
                relation: Iri::parse(r).map_err(|e| IngestError::MalformedPattern {
                    name: entry.name.clone(),
                    reason: e.to_string(),
                })?,
                object_slot: slot(o)?,
            });
        }
        Self::new(&entry.name, trigger, emits)
    }
}

pub fn load_patterns(path: &Path) -> Result<Vec<ExtractionPattern>, IngestError> {
    let file: PatternFile = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| IngestError::MalformedPattern { name: "<file>".into(), reason: e.to_string() })?;
    file.patterns.into_iter().map(ExtractionPattern::parse_entry).collect()
}

pub fn save_patterns(patterns: &[ExtractionPattern], path: &Path) -> Result<(), IngestError> {
    let entries: Vec<PatternFileEntry> = patterns
        .iter()
        .map(|p| PatternFileEntry {
            name: p.name.clone(),
            trigger: p
                .trigger
                .iter()
                .map(|t| match t {
                    TriggerItem::Class(c) => format!("class:{c}"),
                    TriggerItem::Keyword(w) => format!("kw:{w}"),
                })
                .collect(),
            emits: p
                .emits
                .iter()
                .map(|e| {
                    [
                        format!("${}", e.subject_slot),
                        e.relation.to_string(),
                        format!("${}", e.object_slot),
                    ]
                })
                .collect(),
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&PatternFile { patterns: entries })
        .map_err(|e| IngestError::MalformedPattern { name: "<file>".into(), reason: e.to_string() })?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

/// Upper bound on matches enumerated per pattern per sentence.
const MAX_MATCHES_PER_SENTENCE: usize = 256;

/// All in-order assignments of the trigger's class slots to recognized
/// entities (keywords must appear between them in order); returns the slot
/// entities for each match.
fn pattern_matches(pattern: &ExtractionPattern, sentence: &[SentenceToken]) -> Vec<Vec<Iri>> {
    let mut out = Vec::new();
    let mut slots = Vec::new();
    search(pattern, sentence, 0, 0, &mut slots, &mut out);
    return out;

    fn search(
        pattern: &ExtractionPattern,
        sentence: &[SentenceToken],
        item_idx: usize,
        from: usize,
        slots: &mut Vec<Iri>,
        out: &mut Vec<Vec<Iri>>,
    ) {
        if out.len() >= MAX_MATCHES_PER_SENTENCE {
            return;
        }
        if item_idx == pattern.trigger.len() {
            out.push(slots.clone());
            return;
        }
        for (pos, token) in sentence.iter().enumerate().skip(from) {
            match &pattern.trigger[item_idx] {
                TriggerItem::Class(class) => {
                    if let Some((entity, entity_class)) = &token.entity {
                        if entity_class == class {
                            slots.push(entity.clone());
                            search(pattern, sentence, item_idx + 1, pos + 1, slots, out);
                            slots.pop();
                        }
                    }
                }
                TriggerItem::Keyword(word) => {
                    if token.entity.is_none() && token.token == *word {
                        search(pattern, sentence, item_idx + 1, pos + 1, slots, out);
                        // A keyword item binds to its first occurrence only;
                        // later occurrences would duplicate every match.
                        if out.len() >= MAX_MATCHES_PER_SENTENCE {
                            return;
                        }
                    }
                }
            }
        }
    }
}

/// Extraction result for one document.
#[derive(Debug, Clone)]
pub struct DocumentGraph {
    pub graph: KnowledgeGraph,
    pub intelligence: Iri,
}

fn fnv1a(text: &str) -> u32 {
    let mut hash: u32 = 0x811c_9dc5;
    for b in text.as_bytes() {
        hash ^= u32::from(*b);
        hash = hash.wrapping_mul(0x0100_0193);
    }
    hash
}

/// Recognize entities, type them, fire relation patterns per sentence, and
/// aggregate the document's vulnerabilities under a timestamped
/// `intel:Intelligence` node.
pub fn extract_document_graph(
    doc: &Document,
    gazetteer: &Gazetteer,
    patterns: &[ExtractionPattern],
    stopwords: &BTreeSet<String>,
) -> Result<DocumentGraph, IngestError> {
    let mut graph = KnowledgeGraph::new();
    let sentences = preprocess_sentences(&doc.text, gazetteer, stopwords);

    let mut vulnerabilities = BTreeSet::new();
    for sentence in &sentences {
        for token in sentence {
            if let Some((entity, class)) = &token.entity {
                graph.assert_triple(Triple::with_iri_object(
                    entity.clone(),
                    terms::rdf_type(),
                    class.clone(),
                ))?;
                if *class == terms::uco_vulnerability() {
                    vulnerabilities.insert(entity.clone());
                }
            }
        }
        for pattern in patterns {
            for slots in pattern_matches(pattern, sentence) {
                for emission in &pattern.emits {
                    graph.assert_triple(Triple::with_iri_object(
                        slots[emission.subject_slot - 1].clone(),
                        emission.relation.clone(),
                        slots[emission.object_slot - 1].clone(),
                    ))?;
                }
            }
        }
    }

    let intelligence = Iri::entity(&format!("Int{}", fnv1a(&doc.id)))
        .expect("generated intelligence id");
    graph.assert_triple(Triple::with_iri_object(
        intelligence.clone(),
        terms::rdf_type(),
        terms::intelligence_class(),
    ))?;
    graph.assert_triple(Triple::with_literal(
        intelligence.clone(),
        terms::intel_timestamp(),
        &doc.timestamp.to_string(),
    ))?;
    for v in vulnerabilities {
        graph.assert_triple(Triple::with_iri_object(
            intelligence.clone(),
            terms::intel_has_vulnerability(),
            v,
        ))?;
    }
    Ok(DocumentGraph { graph, intelligence })
}

/// Triple-set union with desk-scale co-reference: corpus entities whose
/// normalized local names coincide unify under the lexicographically
/// smallest original name.
pub fn merge_graphs(graphs: &[KnowledgeGraph]) -> Result<KnowledgeGraph, IngestError> {
    let mut representative: BTreeMap<String, String> = BTreeMap::new();
    for g in graphs {
        for t in g.triples() {
            for iri in [Some(&t.subject), Some(&t.predicate), t.object.as_iri()]
                .into_iter()
                .flatten()
            {
                if iri.is_corpus_entity() {
                    let key = normalize_token(iri.local());
                    representative
                        .entry(key)
                        .and_modify(|existing| {
                            if iri.local() < existing.as_str() {
                                *existing = iri.local().to_string();
                            }
                        })
                        .or_insert_with(|| iri.local().to_string());
                }
            }
        }
    }
    let rewrite = |iri: &Iri| -> Result<Iri, KgError> {
        if iri.is_corpus_entity() {
            Iri::entity(&representative[&normalize_token(iri.local())])
        } else {
            Ok(iri.clone())
        }
    };

    let mut merged = KnowledgeGraph::new();
    for g in graphs {
        for (label, expansion) in g.prefixes() {
            merged.declare_prefix(label, expansion)?;
        }
        for t in g.triples() {
            let object = match &t.object {
                crate::kg::Object::Iri(o) => crate::kg::Object::Iri(rewrite(o)?),
                lit => lit.clone(),
            };
            merged.assert_triple(Triple::new(
                rewrite(&t.subject)?,
                t.predicate.clone(),
                object,
            ))?;
        }
    }
    Ok(merged)
}
