//! Triple store: subject-predicate-object assertions with ontology class
//! typing, `owl:sameAs` closure, and Turtle-subset serialization.
//!
//! A graph is mutable while it is being populated and is treated as sealed
//! once it is handed to a [`crate::store::VkgStore`]; sealed graphs are only
//! read, so sharing across threads needs no locking.

mod iri;
mod turtle;

pub use iri::{normalize_token, terms, Iri};
pub use turtle::ParseError;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("UndeclaredPrefix: prefix `{prefix}` used by {iri} is not declared")]
    UndeclaredPrefix { prefix: String, iri: String },
    #[error("CyclicSubclass: asserting {class} rdfs:subClassOf {superclass} would create a cycle")]
    CyclicSubclass { class: String, superclass: String },
    #[error("PrefixConflict: prefix `{prefix}` is declared as <{existing}> and <{incoming}>")]
    PrefixConflict { prefix: String, existing: String, incoming: String },
    #[error("InvalidIri: `{text}`: {reason}")]
    InvalidIri { text: String, reason: String },
    #[error("SyntaxError: {0}")]
    Parse(#[from] ParseError),
}

/// Object position of a triple: an identifier or a plain string literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Iri(Iri),
    Literal(String),
}

impl Object {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Object::Iri(iri) => Some(iri),
            Object::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&str> {
        match self {
            Object::Iri(_) => None,
            Object::Literal(s) => Some(s),
        }
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Object::Iri(iri) => write!(f, "{iri}"),
            Object::Literal(s) => write!(f, "\"{}\"", turtle::escape_literal(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: Object) -> Self {
        Self { subject, predicate, object }
    }

    pub fn with_iri_object(subject: Iri, predicate: Iri, object: Iri) -> Self {
        Self::new(subject, predicate, Object::Iri(object))
    }

    pub fn with_literal(subject: Iri, predicate: Iri, literal: &str) -> Self {
        Self::new(subject, predicate, Object::Literal(literal.to_string()))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, render_predicate(&self.predicate), self.object)
    }
}

pub(crate) fn render_predicate(p: &Iri) -> String {
    if *p == terms::rdf_type() {
        "a".to_string()
    } else {
        p.to_string()
    }
}

/// A named ontology class together with its direct superclass, if any.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OntologyClass {
    pub iri: Iri,
    pub superclass: Option<Iri>,
}

/// Default prefix table: the namespaces every store starts with.
pub fn default_prefixes() -> BTreeMap<String, String> {
    [
        ("uco", "http://accl.umbc.edu/ns/ontology/uco#"),
        ("intel", "http://accl.umbc.edu/ns/ontology/intelligence#"),
        ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
        ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
        ("xml", "http://www.w3.org/XML/1998/namespace"),
        ("xsd", "http://www.w3.org/2001/XMLSchema#"),
        ("dbp", "http://dbpedia.org/resource#"),
        ("owl", "http://www.w3.org/2002/07/owl#"),
        ("vkg", "http://accl.umbc.edu/ns/ontology/vkg#"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// In-memory triple store with set semantics and derived indexes.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    prefixes: BTreeMap<String, String>,
    triples: BTreeSet<Triple>,
    // subject -> predicate -> objects
    by_subject: BTreeMap<Iri, BTreeMap<Iri, BTreeSet<Object>>>,
    // predicate -> (subject, object)
    by_predicate: BTreeMap<Iri, BTreeSet<(Iri, Object)>>,
    // class -> direct instances
    instances: BTreeMap<Iri, BTreeSet<Iri>>,
    // class -> direct superclasses
    superclasses: BTreeMap<Iri, BTreeSet<Iri>>,
    // class -> direct subclasses
    subclasses: BTreeMap<Iri, BTreeSet<Iri>>,
    // undirected owl:sameAs adjacency
    same_as: BTreeMap<Iri, BTreeSet<Iri>>,
    // classes typed rdfs:Class without instances or subclass edges
    declared_classes: BTreeSet<Iri>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.prefixes == other.prefixes && self.triples == other.triples
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    /// Empty graph with the default prefix table.
    pub fn new() -> Self {
        Self { prefixes: default_prefixes(), ..Self::default() }
    }

    /// Empty graph with no declared prefixes.
    pub fn with_prefixes(prefixes: BTreeMap<String, String>) -> Self {
        Self { prefixes, ..Self::default() }
    }

    pub fn prefixes(&self) -> &BTreeMap<String, String> {
        &self.prefixes
    }

    pub fn declare_prefix(&mut self, label: &str, expansion: &str) -> Result<(), KgError> {
        match self.prefixes.get(label) {
            Some(existing) if existing != expansion => Err(KgError::PrefixConflict {
                prefix: label.to_string(),
                existing: existing.clone(),
                incoming: expansion.to_string(),
            }),
            _ => {
                self.prefixes.insert(label.to_string(), expansion.to_string());
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    fn check_declared(&self, iri: &Iri) -> Result<(), KgError> {
        if !iri.prefix().is_empty() && !self.prefixes.contains_key(iri.prefix()) {
            return Err(KgError::UndeclaredPrefix {
                prefix: iri.prefix().to_string(),
                iri: iri.to_string(),
            });
        }
        Ok(())
    }

    /// Insert a triple. Idempotent; rejects undeclared prefixes and subclass
    /// assertions that would make the class hierarchy cyclic.
    pub fn assert_triple(&mut self, triple: Triple) -> Result<(), KgError> {
        self.check_declared(&triple.subject)?;
        self.check_declared(&triple.predicate)?;
        if let Object::Iri(o) = &triple.object {
            self.check_declared(o)?;
        }

        if triple.predicate == terms::rdfs_subclass_of() {
            if let Object::Iri(superclass) = &triple.object {
                if *superclass == triple.subject
                    || self.superclass_closure(superclass).contains(&triple.subject)
                {
                    return Err(KgError::CyclicSubclass {
                        class: triple.subject.to_string(),
                        superclass: superclass.to_string(),
                    });
                }
            }
        }

        if !self.triples.insert(triple.clone()) {
            return Ok(());
        }

        let Triple { subject, predicate, object } = triple;
        self.by_subject
            .entry(subject.clone())
            .or_default()
            .entry(predicate.clone())
            .or_default()
            .insert(object.clone());
        self.by_predicate
            .entry(predicate.clone())
            .or_default()
            .insert((subject.clone(), object.clone()));

        if predicate == terms::rdf_type() {
            if let Object::Iri(class) = &object {
                if *class == terms::rdfs_class() {
                    self.declared_classes.insert(subject.clone());
                } else {
                    self.instances.entry(class.clone()).or_default().insert(subject.clone());
                }
            }
        } else if predicate == terms::rdfs_subclass_of() {
            if let Object::Iri(superclass) = &object {
                self.superclasses.entry(subject.clone()).or_default().insert(superclass.clone());
                self.subclasses.entry(superclass.clone()).or_default().insert(subject.clone());
            }
        } else if predicate == terms::owl_same_as() {
            if let Object::Iri(twin) = &object {
                self.same_as.entry(subject.clone()).or_default().insert(twin.clone());
                self.same_as.entry(twin.clone()).or_default().insert(subject.clone());
            }
        }
        Ok(())
    }

    pub fn assert_all<I: IntoIterator<Item = Triple>>(&mut self, triples: I) -> Result<(), KgError> {
        for t in triples {
            self.assert_triple(t)?;
        }
        Ok(())
    }

    /// Remove a triple and rebuild the derived indexes.
    pub fn retract_triple(&mut self, triple: &Triple) -> bool {
        if !self.triples.remove(triple) {
            return false;
        }
        let mut rebuilt = Self::with_prefixes(self.prefixes.clone());
        for t in std::mem::take(&mut self.triples) {
            rebuilt.assert_triple(t).expect("retained triples stay valid");
        }
        *self = rebuilt;
        true
    }

    /// All class identifiers known to the graph: `rdf:type` objects, both
    /// ends of `rdfs:subClassOf` assertions, and `rdfs:Class`-typed subjects.
    pub fn classes(&self) -> BTreeSet<Iri> {
        let mut out: BTreeSet<Iri> = self.instances.keys().cloned().collect();
        out.extend(self.superclasses.keys().cloned());
        out.extend(self.subclasses.keys().cloned());
        out.extend(self.declared_classes.iter().cloned());
        out
    }

    pub fn is_class(&self, iri: &Iri) -> bool {
        self.instances.contains_key(iri)
            || self.superclasses.contains_key(iri)
            || self.subclasses.contains_key(iri)
            || self.declared_classes.contains(iri)
    }

    /// (class, direct superclass) pairs; classes without a parent appear once
    /// with `superclass: None`.
    pub fn ontology_classes(&self) -> Vec<OntologyClass> {
        let mut out = Vec::new();
        for class in self.classes() {
            match self.superclasses.get(&class) {
                Some(supers) if !supers.is_empty() => {
                    for s in supers {
                        out.push(OntologyClass { iri: class.clone(), superclass: Some(s.clone()) });
                    }
                }
                _ => out.push(OntologyClass { iri: class.clone(), superclass: None }),
            }
        }
        out
    }

    /// Transitive superclasses of `class`, excluding the class itself.
    pub fn superclass_closure(&self, class: &Iri) -> BTreeSet<Iri> {
        let mut seen = BTreeSet::new();
        let mut frontier = vec![class.clone()];
        while let Some(c) = frontier.pop() {
            if let Some(supers) = self.superclasses.get(&c) {
                for s in supers {
                    if seen.insert(s.clone()) {
                        frontier.push(s.clone());
                    }
                }
            }
        }
        seen
    }

    /// `class` plus its transitive subclasses.
    pub fn subclass_closure(&self, class: &Iri) -> BTreeSet<Iri> {
        let mut seen = BTreeSet::from([class.clone()]);
        let mut frontier = vec![class.clone()];
        while let Some(c) = frontier.pop() {
            if let Some(subs) = self.subclasses.get(&c) {
                for s in subs {
                    if seen.insert(s.clone()) {
                        frontier.push(s.clone());
                    }
                }
            }
        }
        seen
    }

    /// The symmetric-transitive `owl:sameAs` component of `iri`, including
    /// `iri` itself.
    pub fn same_as_closure(&self, iri: &Iri) -> BTreeSet<Iri> {
        let mut seen = BTreeSet::from([iri.clone()]);
        let mut frontier = vec![iri.clone()];
        while let Some(node) = frontier.pop() {
            if let Some(twins) = self.same_as.get(&node) {
                for t in twins {
                    if seen.insert(t.clone()) {
                        frontier.push(t.clone());
                    }
                }
            }
        }
        seen
    }

    /// Direct classes of `entity` plus transitive superclasses. Type
    /// assertions made on any `owl:sameAs` twin count as well.
    pub fn class_of(&self, entity: &Iri) -> BTreeSet<Iri> {
        let mut out = BTreeSet::new();
        for member in self.same_as_closure(entity) {
            if let Some(objects) = self.by_subject.get(&member).and_then(|m| m.get(&terms::rdf_type())) {
                for o in objects {
                    if let Object::Iri(class) = o {
                        if *class == terms::rdfs_class() {
                            continue;
                        }
                        out.extend(self.superclass_closure(class));
                        out.insert(class.clone());
                    }
                }
            }
        }
        out
    }

    /// Direct classes only (no superclass closure), sameAs twins included.
    pub fn direct_classes(&self, entity: &Iri) -> BTreeSet<Iri> {
        let mut out = BTreeSet::new();
        for member in self.same_as_closure(entity) {
            if let Some(objects) = self.by_subject.get(&member).and_then(|m| m.get(&terms::rdf_type())) {
                for o in objects {
                    if let Object::Iri(class) = o {
                        if *class != terms::rdfs_class() {
                            out.insert(class.clone());
                        }
                    }
                }
            }
        }
        out
    }

    /// Entities typed `class` or any of its subclasses, expanded through
    /// `owl:sameAs` so that `x ∈ instances_of(C)` iff `C ∈ class_of(x)`.
    pub fn instances_of(&self, class: &Iri) -> BTreeSet<Iri> {
        let mut out = BTreeSet::new();
        for c in self.subclass_closure(class) {
            if let Some(direct) = self.instances.get(&c) {
                for e in direct {
                    out.extend(self.same_as_closure(e));
                }
            }
        }
        out
    }

    /// All objects `o` with `(subject', relation, o)` asserted for any sameAs
    /// twin `subject'` of `subject`. When `relation` is `rdf:type` and
    /// `subject` names a known class, returns that class's instances with
    /// subclass closure instead.
    pub fn list_objects(&self, relation: &Iri, subject: &Iri) -> BTreeSet<Object> {
        if *relation == terms::rdf_type() && self.is_class(subject) {
            return self.instances_of(subject).into_iter().map(Object::Iri).collect();
        }
        let mut out = BTreeSet::new();
        for member in self.same_as_closure(subject) {
            if let Some(objects) = self.by_subject.get(&member).and_then(|m| m.get(relation)) {
                out.extend(objects.iter().cloned());
            }
        }
        out
    }

    /// All (predicate, object) pairs asserted on `subject` (no closure).
    pub fn predicate_objects(&self, subject: &Iri) -> BTreeSet<(Iri, Object)> {
        self.by_subject
            .get(subject)
            .map(|m| {
                m.iter()
                    .flat_map(|(p, objs)| objs.iter().map(move |o| (p.clone(), o.clone())))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// All (subject, object) pairs for a predicate.
    pub fn subject_objects(&self, predicate: &Iri) -> BTreeSet<(Iri, Object)> {
        self.by_predicate.get(predicate).cloned().unwrap_or_default()
    }

    /// Distinct predicates in the graph.
    pub fn predicates(&self) -> BTreeSet<Iri> {
        self.by_predicate.keys().cloned().collect()
    }

    /// Entity nodes: subjects and Iri objects of triples whose predicate is
    /// not `rdf:type`, `rdfs:subClassOf`, or `owl:sameAs`, plus typed
    /// subjects; class identifiers are excluded.
    pub fn entities(&self) -> BTreeSet<Iri> {
        let skip = [terms::rdf_type(), terms::rdfs_subclass_of(), terms::owl_same_as()];
        let classes = self.classes();
        let mut out = BTreeSet::new();
        for t in &self.triples {
            if t.predicate == terms::rdf_type() {
                if !classes.contains(&t.subject) {
                    out.insert(t.subject.clone());
                }
                continue;
            }
            if skip.contains(&t.predicate) {
                continue;
            }
            if !classes.contains(&t.subject) {
                out.insert(t.subject.clone());
            }
            if let Object::Iri(o) = &t.object {
                if !classes.contains(o) {
                    out.insert(o.clone());
                }
            }
        }
        out
    }

    /// Out-edges usable by graph walks: (predicate, object) pairs with Iri
    /// objects, in deterministic order.
    pub fn out_edges(&self, subject: &Iri) -> Vec<(Iri, Iri)> {
        self.by_subject
            .get(subject)
            .map(|m| {
                m.iter()
                    .flat_map(|(p, objs)| {
                        objs.iter().filter_map(move |o| o.as_iri().map(|o| (p.clone(), o.clone())))
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Assert `(local, owl:sameAs, external)` links and copy every triple the
    /// external graph holds about each linked external node. Copied triples
    /// keep their original subjects; `list_objects` reaches them through the
    /// sameAs closure.
    pub fn augment_same_as(
        &mut self,
        links: &[(Iri, Iri)],
        external: &KnowledgeGraph,
    ) -> Result<(), KgError> {
        for (label, expansion) in &external.prefixes {
            self.declare_prefix(label, expansion)?;
        }
        for (local, ext) in links {
            self.assert_triple(Triple::with_iri_object(local.clone(), terms::owl_same_as(), ext.clone()))?;
            if let Some(predicates) = external.by_subject.get(ext) {
                for (p, objects) in predicates {
                    for o in objects {
                        self.assert_triple(Triple::new(ext.clone(), p.clone(), o.clone()))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Serialize to the Turtle subset: prefix block, then subject-grouped
    /// triples with `;` continuations and `a` for `rdf:type`. Deterministic.
    pub fn to_turtle(&self) -> String {
        turtle::serialize(self)
    }

    /// Parse a Turtle-subset document.
    pub fn from_turtle(text: &str) -> Result<Self, KgError> {
        turtle::parse(text)
    }
}
