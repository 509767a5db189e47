//! Two-phase alert generation: forward-chaining conjunctive rules over
//! factual graph data gated by a system profile, then vector-neighborhood
//! re-reasoning for similar products.
//!
//! Rules are conjunctions of triple patterns with variables plus a freshness
//! gate: any bound `intel:Intelligence` node must carry a timestamp within
//! the rule's validity window.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{normalize_token, terms, Iri, KgError, KnowledgeGraph, Object, Triple};
use crate::store::{StoreError, VkgStore};

#[derive(Debug, Error)]
pub enum AlertError {
    #[error("MalformedPattern: {reason}")]
    MalformedPattern { reason: String },
    #[error("MalformedRulebook: {reason}")]
    MalformedRulebook { reason: String },
    #[error("MalformedProfile: {reason}")]
    MalformedProfile { reason: String },
    #[error("MalformedLine: line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One position of a triple pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PatternTerm {
    Var(String),
    Iri(Iri),
    Literal(String),
}

impl PatternTerm {
    /// `?x` is a variable, `"text"` a literal, `a` the type predicate,
    /// anything else an identifier.
    pub fn parse(text: &str) -> Result<Self, AlertError> {
        let text = text.trim();
        if let Some(name) = text.strip_prefix('?') {
            if name.is_empty() {
                return Err(AlertError::MalformedPattern { reason: "`?` without a name".into() });
            }
            return Ok(PatternTerm::Var(name.to_string()));
        }
        if let Some(inner) = text.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
            return Ok(PatternTerm::Literal(inner.to_string()));
        }
        if text == "a" {
            return Ok(PatternTerm::Iri(terms::rdf_type()));
        }
        Iri::parse(text)
            .map(PatternTerm::Iri)
            .map_err(|e| AlertError::MalformedPattern { reason: e.to_string() })
    }

    fn render(&self) -> String {
        match self {
            PatternTerm::Var(v) => format!("?{v}"),
            PatternTerm::Iri(iri) if *iri == terms::rdf_type() => "a".to_string(),
            PatternTerm::Iri(iri) => iri.to_string(),
            PatternTerm::Literal(s) => format!("\"{s}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn parse(parts: &[String; 3]) -> Result<Self, AlertError> {
        Ok(Self {
            subject: PatternTerm::parse(&parts[0])?,
            predicate: PatternTerm::parse(&parts[1])?,
            object: PatternTerm::parse(&parts[2])?,
        })
    }
}

/// Antecedent patterns, an alert template naming the product and
/// vulnerability variables, and a freshness window for intelligence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub antecedent: Vec<TriplePattern>,
    pub product_var: String,
    pub vulnerability_var: String,
    pub validity_days: u64,
}

impl Rule {
    pub fn validate(&self) -> Result<(), AlertError> {
        if self.antecedent.is_empty() {
            return Err(AlertError::MalformedPattern {
                reason: format!("rule `{}` has no antecedent patterns", self.name),
            });
        }
        let mut antecedent_vars = BTreeSet::new();
        for p in &self.antecedent {
            for term in [&p.subject, &p.predicate, &p.object] {
                if let PatternTerm::Var(v) = term {
                    antecedent_vars.insert(v.clone());
                }
            }
        }
        for required in [&self.product_var, &self.vulnerability_var] {
            if !antecedent_vars.contains(required) {
                return Err(AlertError::MalformedPattern {
                    reason: format!(
                        "rule `{}`: consequent variable ?{required} does not appear in the antecedent",
                        self.name
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Rulebook {
    pub rules: Vec<Rule>,
}

impl Rulebook {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleFileEntry {
    name: String,
    antecedent: Vec<[String; 3]>,
    product_var: String,
    vulnerability_var: String,
    #[serde(default = "default_validity_days")]
    validity_days: u64,
}

fn default_validity_days() -> u64 {
    30
}

#[derive(Debug, Serialize, Deserialize)]
struct RulebookFile {
    rules: Vec<RuleFileEntry>,
}

pub fn load_rulebook(path: &Path) -> Result<Rulebook, AlertError> {
    let file: RulebookFile = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| AlertError::MalformedRulebook { reason: e.to_string() })?;
    let mut rules = Vec::new();
    for entry in file.rules {
        let antecedent: Vec<TriplePattern> =
            entry.antecedent.iter().map(TriplePattern::parse).collect::<Result<_, _>>()?;
        let rule = Rule {
            name: entry.name,
            antecedent,
            product_var: entry.product_var.trim_start_matches('?').to_string(),
            vulnerability_var: entry.vulnerability_var.trim_start_matches('?').to_string(),
            validity_days: entry.validity_days,
        };
        rule.validate()?;
        rules.push(rule);
    }
    Ok(Rulebook { rules })
}

pub fn save_rulebook(rulebook: &Rulebook, path: &Path) -> Result<(), AlertError> {
    let entries: Vec<RuleFileEntry> = rulebook
        .rules
        .iter()
        .map(|r| RuleFileEntry {
            name: r.name.clone(),
            antecedent: r
                .antecedent
                .iter()
                .map(|p| [p.subject.render(), p.predicate.render(), p.object.render()])
                .collect(),
            product_var: format!("?{}", r.product_var),
            vulnerability_var: format!("?{}", r.vulnerability_var),
            validity_days: r.validity_days,
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&RulebookFile { rules: entries })
        .map_err(|e| AlertError::MalformedRulebook { reason: e.to_string() })?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

/// The shipped reconstruction of the two-part check: a valid, current
/// intelligence names a vulnerability asserted on some product.
pub fn default_rulebook() -> Rulebook {
    Rulebook {
        rules: vec![Rule {
            name: "vulnerability-alert".into(),
            antecedent: vec![
                TriplePattern {
                    subject: PatternTerm::Var("i".into()),
                    predicate: PatternTerm::Iri(terms::rdf_type()),
                    object: PatternTerm::Iri(terms::intelligence_class()),
                },
                TriplePattern {
                    subject: PatternTerm::Var("i".into()),
                    predicate: PatternTerm::Iri(terms::intel_has_vulnerability()),
                    object: PatternTerm::Var("v".into()),
                },
                TriplePattern {
                    subject: PatternTerm::Var("p".into()),
                    predicate: PatternTerm::Iri(Iri::new("uco", "hasVulnerability").expect("uco")),
                    object: PatternTerm::Var("v".into()),
                },
            ],
            product_var: "p".into(),
            vulnerability_var: "v".into(),
            validity_days: 30,
        }],
    }
}

pub type Binding = BTreeMap<String, Object>;

fn resolve(term: &PatternTerm, binding: &Binding) -> Option<Object> {
    match term {
        PatternTerm::Var(v) => binding.get(v).cloned(),
        PatternTerm::Iri(iri) => Some(Object::Iri(iri.clone())),
        PatternTerm::Literal(s) => Some(Object::Literal(s.clone())),
    }
}

fn unify(term: &PatternTerm, value: &Object, binding: &mut Binding) -> bool {
    match term {
        PatternTerm::Var(v) => match binding.get(v) {
            Some(bound) => bound == value,
            None => {
                binding.insert(v.clone(), value.clone());
                true
            }
        },
        _ => resolve(term, binding).as_ref() == Some(value),
    }
}

fn candidate_triples(graph: &KnowledgeGraph, pattern: &TriplePattern, binding: &Binding) -> Vec<Triple> {
    let subject = resolve(&pattern.subject, binding);
    let predicate = resolve(&pattern.predicate, binding);
    match (subject, predicate) {
        (Some(Object::Iri(s)), _) => graph
            .predicate_objects(&s)
            .into_iter()
            .map(|(p, o)| Triple::new(s.clone(), p, o))
            .collect(),
        (None, Some(Object::Iri(p))) => graph
            .subject_objects(&p)
            .into_iter()
            .map(|(s, o)| Triple::new(s, p.clone(), o))
            .collect(),
        _ => graph.triples().cloned().collect(),
    }
}

/// All variable bindings satisfying every antecedent pattern, with stale
/// intelligence filtered out; deterministic (lexicographic) order.
pub fn match_rule(
    graph: &KnowledgeGraph,
    rule: &Rule,
    now: u64,
) -> Result<Vec<Binding>, AlertError> {
    rule.validate()?;
    let mut bindings: Vec<Binding> = vec![Binding::new()];
    for pattern in &rule.antecedent {
        let mut next = Vec::new();
        for binding in &bindings {
            for triple in candidate_triples(graph, pattern, binding) {
                let mut extended = binding.clone();
                if unify(&pattern.subject, &Object::Iri(triple.subject.clone()), &mut extended)
                    && unify(&pattern.predicate, &Object::Iri(triple.predicate.clone()), &mut extended)
                    && unify(&pattern.object, &triple.object, &mut extended)
                {
                    next.push(extended);
                }
            }
        }
        next.sort();
        next.dedup();
        bindings = next;
        if bindings.is_empty() {
            return Ok(bindings);
        }
    }
    let window_secs = rule.validity_days * 86_400;
    bindings.retain(|b| intelligence_is_current(graph, b, now, window_secs));
    Ok(bindings)
}

/// Every bound intelligence node must carry a parseable timestamp within the
/// window; future timestamps count as age zero.
fn intelligence_is_current(
    graph: &KnowledgeGraph,
    binding: &Binding,
    now: u64,
    window_secs: u64,
) -> bool {
    for value in binding.values() {
        let Object::Iri(entity) = value else { continue };
        if !graph.class_of(entity).contains(&terms::intelligence_class()) {
            continue;
        }
        let stamps = graph.list_objects(&terms::intel_timestamp(), entity);
        let Some(ts) = stamps
            .iter()
            .filter_map(|o| o.as_literal().and_then(|s| s.parse::<u64>().ok()))
            .max()
        else {
            return false;
        };
        if now.saturating_sub(ts) > window_secs {
            return false;
        }
    }
    true
}

fn instantiate(rule: &Rule, binding: &Binding) -> Vec<Triple> {
    rule.antecedent
        .iter()
        .filter_map(|p| {
            let s = resolve(&p.subject, binding)?;
            let pred = resolve(&p.predicate, binding)?;
            let o = resolve(&p.object, binding)?;
            match (s, pred) {
                (Object::Iri(s), Object::Iri(pred)) => Some(Triple::new(s, pred, o)),
                _ => None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlertPhase {
    Factual,
    SimilarProduct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub matched_triples: Vec<Triple>,
    pub neighbor: Option<Iri>,
    pub similarity: Option<f64>,
    pub shared_dependencies: Option<usize>,
    pub total_dependencies: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub product: Iri,
    pub vulnerability: Iri,
    pub phase: AlertPhase,
    pub score: f64,
    pub rule: String,
    pub evidence: Evidence,
}

impl Alert {
    /// Recompute the phase-2 score from the evidence fields alone.
    pub fn score_from_evidence(&self) -> Option<f64> {
        match self.phase {
            AlertPhase::Factual => Some(1.0),
            AlertPhase::SimilarProduct => {
                let sim = self.evidence.similarity?;
                let shared = self.evidence.shared_dependencies? as f64;
                let total = self.evidence.total_dependencies? as f64;
                Some(sim * (1.0 + shared) / (1.0 + total))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductEntry {
    pub name: String,
    #[serde(default)]
    pub version: String,
}

/// Analyst-supplied inventory. Product matching is by normalized name; the
/// operating system entry participates like any product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemProfile {
    #[serde(default)]
    pub operating_system: Option<ProductEntry>,
    #[serde(default)]
    pub products: Vec<ProductEntry>,
    /// Analyst opt-in for phase-2 alerts.
    #[serde(default = "default_true")]
    pub similar_product_alerts: bool,
}

fn default_true() -> bool {
    true
}

impl SystemProfile {
    pub fn load(path: &Path) -> Result<Self, AlertError> {
        serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| AlertError::MalformedProfile { reason: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<(), AlertError> {
        let mut json = serde_json::to_string_pretty(self)
            .map_err(|e| AlertError::MalformedProfile { reason: e.to_string() })?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    /// All inventory entries, operating system included.
    pub fn inventory(&self) -> Vec<&ProductEntry> {
        self.operating_system.iter().chain(self.products.iter()).collect()
    }

    fn tokens(&self) -> BTreeSet<String> {
        self.inventory().iter().map(|p| normalize_token(&p.name)).collect()
    }
}

/// Phase 1: rule matches whose product is in the profile, score 1.0.
pub fn factual_alerts(
    store: &VkgStore,
    profile: &SystemProfile,
    rulebook: &Rulebook,
    now: u64,
) -> Result<Vec<Alert>, AlertError> {
    let profile_tokens = profile.tokens();
    let mut alerts: BTreeMap<(Iri, Iri), Alert> = BTreeMap::new();
    for rule in &rulebook.rules {
        for binding in match_rule(store.graph(), rule, now)? {
            let (Some(Object::Iri(product)), Some(Object::Iri(vulnerability))) =
                (binding.get(&rule.product_var), binding.get(&rule.vulnerability_var))
            else {
                continue;
            };
            if !profile_tokens.contains(&normalize_token(product.local())) {
                continue;
            }
            let key = (product.clone(), vulnerability.clone());
            alerts.entry(key).or_insert_with(|| Alert {
                product: product.clone(),
                vulnerability: vulnerability.clone(),
                phase: AlertPhase::Factual,
                score: 1.0,
                rule: rule.name.clone(),
                evidence: Evidence {
                    matched_triples: instantiate(rule, &binding),
                    neighbor: None,
                    similarity: None,
                    shared_dependencies: None,
                    total_dependencies: None,
                },
            });
        }
    }
    Ok(alerts.into_values().collect())
}

#[derive(Debug, Clone, Default)]
pub struct SimilarAlerts {
    pub alerts: Vec<Alert>,
    /// Profile entries that could not be searched (missing or unlinked).
    pub diagnostics: Vec<String>,
}

fn dependencies(graph: &KnowledgeGraph, entity: &Iri) -> BTreeSet<Iri> {
    graph
        .list_objects(&terms::uco_has_dependency(), entity)
        .into_iter()
        .filter_map(|o| o.as_iri().cloned())
        .collect()
}

fn resolve_profile_entity(graph: &KnowledgeGraph, name: &str) -> Option<Iri> {
    let wanted = normalize_token(name);
    graph
        .entities()
        .into_iter()
        .find(|e| normalize_token(e.local()) == wanted)
}

/// Phase 2: for each profile product, search its class-filtered vector
/// neighborhood and re-reason the rulebook against the neighbors. A
/// neighbor's rule-matched vulnerability becomes an alert for the profile
/// product scored `cosine x (1 + shared_deps) / (1 + total_deps)`.
pub fn similar_product_alerts(
    store: &VkgStore,
    profile: &SystemProfile,
    rulebook: &Rulebook,
    neighborhood: usize,
    threshold: f64,
    now: u64,
) -> Result<SimilarAlerts, AlertError> {
    if !profile.similar_product_alerts {
        return Ok(SimilarAlerts::default());
    }
    let phase1: BTreeSet<(Iri, Iri)> = factual_alerts(store, profile, rulebook, now)?
        .into_iter()
        .map(|a| (a.product, a.vulnerability))
        .collect();

    // product entity -> (vulnerability, rule name, evidence) from any rule.
    let mut matched: BTreeMap<Iri, Vec<(Iri, String, Vec<Triple>)>> = BTreeMap::new();
    for rule in &rulebook.rules {
        for binding in match_rule(store.graph(), rule, now)? {
            let (Some(Object::Iri(product)), Some(Object::Iri(vulnerability))) =
                (binding.get(&rule.product_var), binding.get(&rule.vulnerability_var))
            else {
                continue;
            };
            matched.entry(product.clone()).or_default().push((
                vulnerability.clone(),
                rule.name.clone(),
                instantiate(rule, &binding),
            ));
        }
    }

    let mut out = SimilarAlerts::default();
    let mut best: BTreeMap<(Iri, Iri), Alert> = BTreeMap::new();
    let product_class = terms::uco_product();
    for entry in profile.inventory() {
        let Some(product) = resolve_profile_entity(store.graph(), &entry.name) else {
            out.diagnostics.push(format!("profile entry `{}` is not in the graph", entry.name));
            continue;
        };
        let neighbors = match store.vkg_search(&product, neighborhood, Some(&product_class)) {
            Ok(n) => n,
            Err(e @ (StoreError::UnlinkedEntity { .. } | StoreError::UnknownClass { .. })) => {
                out.diagnostics.push(format!("profile entry `{}`: {e}", entry.name));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let own_deps = dependencies(store.graph(), &product);
        for (neighbor, similarity) in neighbors {
            if similarity <= 0.0 {
                continue;
            }
            let Some(findings) = matched.get(&neighbor) else { continue };
            let shared = dependencies(store.graph(), &neighbor).intersection(&own_deps).count();
            let factor = (1.0 + shared as f64) / (1.0 + own_deps.len() as f64);
            let score = similarity * factor;
            if score < threshold || score <= 0.0 {
                continue;
            }
            for (vulnerability, rule_name, mut evidence_triples) in findings.clone() {
                let key = (product.clone(), vulnerability.clone());
                if phase1.contains(&key) {
                    continue;
                }
                evidence_triples.sort();
                let alert = Alert {
                    product: product.clone(),
                    vulnerability,
                    phase: AlertPhase::SimilarProduct,
                    score,
                    rule: rule_name,
                    evidence: Evidence {
                        matched_triples: evidence_triples,
                        neighbor: Some(neighbor.clone()),
                        similarity: Some(similarity),
                        shared_dependencies: Some(shared),
                        total_dependencies: Some(own_deps.len()),
                    },
                };
                best.entry(key)
                    .and_modify(|existing| {
                        if alert.score > existing.score {
                            *existing = alert.clone();
                        }
                    })
                    .or_insert(alert);
            }
        }
    }
    out.alerts = best.into_values().collect();
    Ok(out)
}

/// Export alerts as Turtle annotation nodes.
pub fn alerts_to_turtle(alerts: &[Alert]) -> String {
    let mut g = KnowledgeGraph::new();
    let vkg = |local: &str| Iri::new("vkg", local).expect("vkg prefix");
    for (i, alert) in alerts.iter().enumerate() {
        let node = Iri::entity(&format!("alert_{i:04}")).expect("generated name");
        let mut push = |t: Triple| g.assert_triple(t).expect("alert annotation");
        push(Triple::with_iri_object(node.clone(), terms::rdf_type(), vkg("Alert")));
        push(Triple::with_iri_object(node.clone(), vkg("product"), alert.product.clone()));
        push(Triple::with_iri_object(node.clone(), vkg("vulnerability"), alert.vulnerability.clone()));
        push(Triple::with_literal(
            node.clone(),
            vkg("phase"),
            match alert.phase {
                AlertPhase::Factual => "factual",
                AlertPhase::SimilarProduct => "similar-product",
            },
        ));
        push(Triple::with_literal(node.clone(), vkg("score"), &format!("{:.6}", alert.score)));
        push(Triple::with_literal(node.clone(), vkg("rule"), &alert.rule));
        if let Some(neighbor) = &alert.evidence.neighbor {
            push(Triple::with_iri_object(node.clone(), vkg("neighbor"), neighbor.clone()));
        }
    }
    g.to_turtle()
}

/// Parse `program<TAB>library` lines into dependency triples. Duplicate
/// lines collapse under the graph's set semantics.
pub fn ingest_dependencies(text: &str) -> Result<Vec<Triple>, AlertError> {
    let mut triples = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((program, library)) = line.split_once('\t') else {
            return Err(AlertError::MalformedLine {
                line: i + 1,
                reason: "expected `program<TAB>library`".into(),
            });
        };
        let (program, library) = (program.trim(), library.trim());
        if program.is_empty() || library.is_empty() {
            return Err(AlertError::MalformedLine {
                line: i + 1,
                reason: "empty program or library name".into(),
            });
        }
        let triple = Triple::with_iri_object(
            Iri::entity(&program.replace(' ', "_"))
                .map_err(|e| AlertError::MalformedLine { line: i + 1, reason: e.to_string() })?,
            terms::uco_has_dependency(),
            Iri::entity(&library.replace(' ', "_"))
                .map_err(|e| AlertError::MalformedLine { line: i + 1, reason: e.to_string() })?,
        );
        if seen.insert(triple.clone()) {
            triples.push(triple);
        }
    }
    Ok(triples)
}

pub fn load_dependencies(path: &Path) -> Result<Vec<Triple>, AlertError> {
    ingest_dependencies(&std::fs::read_to_string(path)?)
}
