//! Composite queries: `search` clauses run on the vector part, `list` and
//! `infer` on the graph part. A query is an ordered list of clauses wired
//! together by named sets; the planner layers the dataflow DAG into stages
//! of mutually independent clauses.
//!
//! The interface is the tuple notation only. A request like "raise an alert
//! if a vulnerability similar to denial of service is listed in MySQL" is
//! written as
//! `{search, 'denial_of_service', V} ; {list, vulnerability, 'MySQL', K} ;
//! {infer, V, K, 'MySQL', alert}`.

mod parser;

pub use parser::{parse_query, print_query};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use thiserror::Error;

use crate::alert::{match_rule, AlertError, Rulebook};
use crate::kg::{normalize_token, Iri, Object};
use crate::store::{StoreError, VkgStore};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("SyntaxError: line {line}, col {col}: expected {expected}, found {found}")]
    Syntax { line: usize, col: usize, expected: String, found: String },
    #[error("UnknownCommand: `{command}` is not one of search, list, infer")]
    UnknownCommand { command: String },
    #[error("UnboundSetName: `{name}` is consumed but never produced")]
    UnboundSetName { name: String },
    #[error("DuplicateSetName: `{name}` is produced more than once")]
    DuplicateSetName { name: String },
    #[error("CyclicDataflow: `{name}` participates in a dependency cycle")]
    CyclicDataflow { name: String },
    #[error("ClauseArity: {clause}: {reason}")]
    ClauseArity { clause: String, reason: String },
    #[error("UnknownRule: `{name}` is neither a built-in nor in the rulebook")]
    UnknownRule { name: String },
    #[error("UnknownEntity: `{name}` is not in the graph")]
    UnknownEntity { name: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Alert(#[from] AlertError),
}

/// Class restriction of a search clause. The default restricts results to
/// the seed's own class; `*` lifts the restriction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassFilter {
    SeedClass,
    Unfiltered,
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubjectArg {
    Entity(String),
    Set(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InferArg {
    Set(String),
    Entity(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseKind {
    Search { seed: String, class_filter: ClassFilter, k: Option<usize> },
    List { relation: String, subject: SubjectArg },
    Infer { rule: Option<String>, args: Vec<InferArg> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub kind: ClauseKind,
    pub out: String,
}

impl Clause {
    /// Set names this clause consumes.
    pub fn inputs(&self) -> Vec<&str> {
        match &self.kind {
            ClauseKind::Search { .. } => Vec::new(),
            ClauseKind::List { subject: SubjectArg::Set(s), .. } => vec![s.as_str()],
            ClauseKind::List { .. } => Vec::new(),
            ClauseKind::Infer { args, .. } => args
                .iter()
                .filter_map(|a| match a {
                    InferArg::Set(s) => Some(s.as_str()),
                    InferArg::Entity(_) => None,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub clauses: Vec<Clause>,
}

impl QueryAst {
    /// Out names unique, inputs bound, dataflow acyclic.
    pub fn validate(&self) -> Result<(), QueryError> {
        let mut produced = BTreeSet::new();
        for c in &self.clauses {
            if !produced.insert(c.out.clone()) {
                return Err(QueryError::DuplicateSetName { name: c.out.clone() });
            }
        }
        for c in &self.clauses {
            for input in c.inputs() {
                if !produced.contains(input) {
                    return Err(QueryError::UnboundSetName { name: input.to_string() });
                }
            }
        }
        self.plan().map(|_| ())
    }

    /// Topological stages: a clause runs in the first stage after all of its
    /// producers.
    pub fn plan(&self) -> Result<QueryPlan, QueryError> {
        let index_of: BTreeMap<&str, usize> =
            self.clauses.iter().enumerate().map(|(i, c)| (c.out.as_str(), i)).collect();
        let mut depth = vec![usize::MAX; self.clauses.len()];
        // Depth via iterative relaxation; a full pass without progress on an
        // unresolved clause means a cycle.
        for _ in 0..=self.clauses.len() {
            let mut changed = false;
            for (i, clause) in self.clauses.iter().enumerate() {
                if depth[i] != usize::MAX {
                    continue;
                }
                let inputs = clause.inputs();
                let resolved: Option<usize> = inputs
                    .iter()
                    .map(|name| depth[index_of[name]])
                    .try_fold(0usize, |acc, d| {
                        if d == usize::MAX {
                            None
                        } else {
                            Some(acc.max(d + 1))
                        }
                    });
                if let Some(d) = resolved {
                    depth[i] = d;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if let Some(i) = depth.iter().position(|d| *d == usize::MAX) {
            return Err(QueryError::CyclicDataflow { name: self.clauses[i].out.clone() });
        }
        let stages_count = depth.iter().max().map(|d| d + 1).unwrap_or(0);
        let mut stages = vec![Vec::new(); stages_count];
        for (i, d) in depth.iter().enumerate() {
            stages[*d].push(i);
        }
        Ok(QueryPlan { stages })
    }
}

/// Clause indices grouped into stages; clauses within a stage are
/// independent of one another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub stages: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Vector,
    Graph,
}

impl Part {
    pub fn name(&self) -> &'static str {
        match self {
            Part::Vector => "vector",
            Part::Graph => "graph",
        }
    }
}

/// Which clauses run where, plus the execution plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub vector_clauses: Vec<usize>,
    pub graph_clauses: Vec<usize>,
    pub plan: QueryPlan,
}

/// Route `search` to the vector part, `list`/`infer` to the graph part, and
/// layer the dataflow DAG.
pub fn decompose(ast: &QueryAst) -> Result<Decomposition, QueryError> {
    let plan = ast.plan()?;
    let mut vector_clauses = Vec::new();
    let mut graph_clauses = Vec::new();
    for (i, clause) in ast.clauses.iter().enumerate() {
        match clause.kind {
            ClauseKind::Search { .. } => vector_clauses.push(i),
            _ => graph_clauses.push(i),
        }
    }
    Ok(Decomposition { vector_clauses, graph_clauses, plan })
}

/// A named set of entities produced by one clause, in rank (search) or
/// sorted (list) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingSet {
    pub name: String,
    pub members: Vec<Iri>,
    pub provenance: String,
}

impl BindingSet {
    pub fn member_set(&self) -> BTreeSet<&Iri> {
        self.members.iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub value: bool,
    pub witness: Vec<Iri>,
    pub context: Vec<Iri>,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseTrace {
    pub clause: String,
    pub out: String,
    pub part: Part,
    pub micros: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub bindings: Vec<BindingSet>,
    pub verdicts: Vec<Verdict>,
    pub trace: Vec<ClauseTrace>,
}

impl QueryResult {
    pub fn binding(&self, name: &str) -> Option<&BindingSet> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct QueryOptions {
    /// Reference time for rule freshness checks.
    pub now: u64,
    /// k for search clauses that do not set one.
    pub default_k: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { now: u64::MAX / 2, default_k: 10 }
    }
}

/// Resolve a query atom to a graph entity: exact prefixed form, exact local
/// name, then normalized-name match.
fn resolve_entity(store: &VkgStore, name: &str) -> Result<Iri, QueryError> {
    if name.contains(':') {
        let iri = Iri::parse(name).map_err(|_| QueryError::UnknownEntity { name: name.into() })?;
        return Ok(iri);
    }
    let stripped = name.trim_start_matches('<').trim_end_matches('>');
    if let Ok(direct) = Iri::entity(stripped) {
        if store.graph().entities().contains(&direct) {
            return Ok(direct);
        }
    }
    let wanted = normalize_token(stripped);
    store
        .graph()
        .entities()
        .into_iter()
        .find(|e| normalize_token(e.local()) == wanted)
        .ok_or(QueryError::UnknownEntity { name: name.to_string() })
}

/// Resolve a class atom against the ontology (case-insensitive local name).
fn resolve_class(store: &VkgStore, name: &str) -> Iri {
    if name.contains(':') {
        if let Ok(iri) = Iri::parse(name) {
            return iri;
        }
    }
    let wanted = name.to_lowercase();
    store
        .graph()
        .classes()
        .into_iter()
        .find(|c| c.local().to_lowercase() == wanted)
        .unwrap_or_else(|| Iri::new("uco", name).unwrap_or_else(|_| crate::kg::terms::uco_product()))
}

/// Resolve a relation atom: an exact prefixed name, or every graph predicate
/// whose local name equals the atom or `has<Atom>` (case-insensitive);
/// results of a list clause union over all matches.
fn resolve_relations(store: &VkgStore, name: &str) -> Vec<Iri> {
    if name.contains(':') {
        if let Ok(iri) = Iri::parse(name) {
            return vec![iri];
        }
    }
    let wanted = name.to_lowercase();
    let with_has = format!("has{wanted}");
    let matches: Vec<Iri> = store
        .graph()
        .predicates()
        .into_iter()
        .filter(|p| {
            let local = p.local().to_lowercase();
            local == wanted || local == with_has
        })
        .collect();
    if matches.is_empty() {
        match Iri::new("uco", name) {
            Ok(iri) => vec![iri],
            Err(_) => Vec::new(),
        }
    } else {
        matches
    }
}

/// Evaluate a query against a sealed store. The store is never mutated;
/// clauses run stage by stage, and results are independent of the order of
/// clauses within a stage.
pub fn execute(
    store: &VkgStore,
    ast: &QueryAst,
    rulebook: &Rulebook,
    options: &QueryOptions,
) -> Result<QueryResult, QueryError> {
    ast.validate()?;
    // Every named rule must exist before any work starts.
    for clause in &ast.clauses {
        if let ClauseKind::Infer { rule: Some(name), .. } = &clause.kind {
            if name != "overlap" && rulebook.rule(name).is_none() {
                return Err(QueryError::UnknownRule { name: name.clone() });
            }
        }
    }
    let decomposition = decompose(ast)?;

    let mut bindings: BTreeMap<String, BindingSet> = BTreeMap::new();
    let mut result = QueryResult { bindings: Vec::new(), verdicts: Vec::new(), trace: Vec::new() };

    for stage in &decomposition.plan.stages {
        for &i in stage {
            let clause = &ast.clauses[i];
            let rendered = print_query(&QueryAst { clauses: vec![clause.clone()] });
            let started = Instant::now();
            match &clause.kind {
                ClauseKind::Search { seed, class_filter, k } => {
                    let seed_entity = resolve_entity(store, seed)?;
                    let filter = match class_filter {
                        ClassFilter::Unfiltered => None,
                        ClassFilter::Named(name) => Some(resolve_class(store, name)),
                        ClassFilter::SeedClass => {
                            store.graph().direct_classes(&seed_entity).into_iter().next()
                        }
                    };
                    let k = k.unwrap_or(options.default_k);
                    let ranked = store.vkg_search(&seed_entity, k, filter.as_ref())?;
                    let set = BindingSet {
                        name: clause.out.clone(),
                        members: ranked.into_iter().map(|(e, _)| e).collect(),
                        provenance: rendered.clone(),
                    };
                    bindings.insert(clause.out.clone(), set.clone());
                    result.bindings.push(set);
                    result.trace.push(ClauseTrace {
                        clause: rendered,
                        out: clause.out.clone(),
                        part: Part::Vector,
                        micros: started.elapsed().as_micros(),
                    });
                }
                ClauseKind::List { relation, subject } => {
                    let relations = resolve_relations(store, relation);
                    let subjects: Vec<Iri> = match subject {
                        SubjectArg::Entity(name) => match resolve_entity(store, name) {
                            Ok(e) => vec![e],
                            // Unknown subjects legally list to the empty set.
                            Err(QueryError::UnknownEntity { .. }) => Vec::new(),
                            Err(e) => return Err(e),
                        },
                        SubjectArg::Set(name) => {
                            bindings.get(name).expect("validated input").members.clone()
                        }
                    };
                    let mut members = BTreeSet::new();
                    for s in &subjects {
                        for rel in &relations {
                            for object in store.graph().list_objects(rel, s) {
                                if let Object::Iri(o) = object {
                                    members.insert(o);
                                }
                            }
                        }
                    }
                    let set = BindingSet {
                        name: clause.out.clone(),
                        members: members.into_iter().collect(),
                        provenance: rendered.clone(),
                    };
                    bindings.insert(clause.out.clone(), set.clone());
                    result.bindings.push(set);
                    result.trace.push(ClauseTrace {
                        clause: rendered,
                        out: clause.out.clone(),
                        part: Part::Graph,
                        micros: started.elapsed().as_micros(),
                    });
                }
                ClauseKind::Infer { rule, args } => {
                    let rule_name = rule.clone().unwrap_or_else(|| "overlap".to_string());
                    let sets: Vec<&BindingSet> = args
                        .iter()
                        .filter_map(|a| match a {
                            InferArg::Set(s) => bindings.get(s),
                            InferArg::Entity(_) => None,
                        })
                        .collect();
                    let context: Vec<Iri> = args
                        .iter()
                        .filter_map(|a| match a {
                            InferArg::Entity(e) => resolve_entity(store, e).ok(),
                            InferArg::Set(_) => None,
                        })
                        .collect();
                    let verdict = if rule_name == "overlap" {
                        if sets.len() < 2 {
                            return Err(QueryError::ClauseArity {
                                clause: rendered.clone(),
                                reason: "overlap needs two bound sets".into(),
                            });
                        }
                        let right = sets[1].member_set();
                        let witness: Vec<Iri> = sets[0]
                            .members
                            .iter()
                            .filter(|m| right.contains(m))
                            .cloned()
                            .collect();
                        Verdict {
                            name: clause.out.clone(),
                            value: !witness.is_empty(),
                            witness,
                            context,
                            rule: rule_name,
                        }
                    } else {
                        let rule = rulebook
                            .rule(&rule_name)
                            .ok_or(QueryError::UnknownRule { name: rule_name.clone() })?;
                        let matches = match_rule(store.graph(), rule, options.now)?;
                        let witness: BTreeSet<Iri> = matches
                            .iter()
                            .filter_map(|b| b.get(&rule.product_var))
                            .filter_map(|o| o.as_iri().cloned())
                            .collect();
                        Verdict {
                            name: clause.out.clone(),
                            value: !matches.is_empty(),
                            witness: witness.into_iter().collect(),
                            context,
                            rule: rule_name,
                        }
                    };
                    result.verdicts.push(verdict);
                    result.trace.push(ClauseTrace {
                        clause: rendered,
                        out: clause.out.clone(),
                        part: Part::Graph,
                        micros: started.elapsed().as_micros(),
                    });
                }
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alert::default_rulebook;
    use crate::kg::{terms, KnowledgeGraph, Triple};
    use crate::vec::VectorSpace;

    fn iri(text: &str) -> Iri {
        Iri::parse(text).unwrap()
    }

    const QUERY_1: &str = "{search, 'denial_of_service', V} ; \
{list, vulnerability, 'MySQL', K} ; \
{infer, V, K, 'MySQL', alert}";

    #[test]
    fn parses_the_three_clause_composite_query() {
        let ast = parse_query(QUERY_1).unwrap();
        assert_eq!(ast.clauses.len(), 3);
        assert!(matches!(ast.clauses[0].kind, ClauseKind::Search { .. }));
        assert!(matches!(ast.clauses[1].kind, ClauseKind::List { .. }));
        match &ast.clauses[2].kind {
            ClauseKind::Infer { rule, args } => {
                assert_eq!(*rule, None);
                assert_eq!(args.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(ast.clauses[2].out, "alert");
    }

    #[test]
    fn accepts_union_separator_outer_braces_and_explicit_rule() {
        let wrapped = "{{search, 'denial_of_service', V} ∪ \
{list, vulnerability, 'MySQL', K} ∪ \
{infer, overlap, V, K, 'MySQL', alert}}";
        let ast = parse_query(wrapped).unwrap();
        assert_eq!(ast.clauses.len(), 3);
        match &ast.clauses[2].kind {
            ClauseKind::Infer { rule, .. } => assert_eq!(rule.as_deref(), Some("overlap")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_list_clause_parses() {
        let ast = parse_query("{list, vulnerability, 'MySQL', K}").unwrap();
        assert_eq!(ast.clauses.len(), 1);
    }

    #[test]
    fn unbound_set_name_is_rejected() {
        let err = parse_query("{infer, overlap, V, K, 'MySQL', alert}").unwrap_err();
        assert!(matches!(err, QueryError::UnboundSetName { .. }), "{err}");
    }

    #[test]
    fn duplicate_set_name_is_rejected() {
        let err =
            parse_query("{search, 'a', V} ; {list, vulnerability, 'MySQL', V}").unwrap_err();
        assert!(matches!(err, QueryError::DuplicateSetName { .. }));
    }

    #[test]
    fn unknown_command_is_rejected() {
        let err = parse_query("{fetch, 'a', V}").unwrap_err();
        assert!(matches!(err, QueryError::UnknownCommand { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_query("{search 'a' V}").unwrap_err();
        match err {
            QueryError::Syntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decompose_routes_and_stages_the_composite_query() {
        let ast = parse_query(QUERY_1).unwrap();
        let d = decompose(&ast).unwrap();
        assert_eq!(d.vector_clauses, vec![0]);
        assert_eq!(d.graph_clauses, vec![1, 2]);
        assert_eq!(d.plan.stages, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn all_list_query_has_empty_vector_part() {
        let ast = parse_query("{list, vulnerability, 'MySQL', K}").unwrap();
        let d = decompose(&ast).unwrap();
        assert!(d.vector_clauses.is_empty());
        assert_eq!(d.graph_clauses, vec![0]);
    }

    #[test]
    fn diamond_dependency_stages_parallel_searches_first() {
        let text = "{search, 'a1', V1} ; {search, 'a2', V2} ; {infer, overlap, V1, V2, check}";
        let ast = parse_query(text).unwrap();
        let d = decompose(&ast).unwrap();
        assert_eq!(d.plan.stages, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn print_parse_is_a_fixpoint() {
        for text in [
            QUERY_1,
            "{search, 'x', *, V, 25} ; {list, vulnerability, V, K}",
            "{search, 'x', uco:Vulnerability, V}",
            "{list, type, 'uco:Product', P}",
        ] {
            let ast = parse_query(text).unwrap();
            let printed = print_query(&ast);
            let reparsed = parse_query(&printed).unwrap();
            assert_eq!(ast, reparsed, "text: {text} printed: {printed}");
            assert_eq!(print_query(&reparsed), printed);
        }
    }

    /// Store where denial_of_service's default-k vulnerability neighborhood
    /// overlaps MySQL's asserted vulnerabilities in exactly
    /// {memory_corruption}: ten padding vulnerabilities keep sql_injection
    /// outside the top 10.
    fn query_store() -> VkgStore {
        let mut g = KnowledgeGraph::new();
        let t = |s: &str, p: &str, o: &str| {
            let predicate = if p == "a" { terms::rdf_type() } else { iri(p) };
            Triple::with_iri_object(iri(s), predicate, iri(o))
        };
        for (s, p, o) in [
            ("<denial_of_service>", "a", "uco:Vulnerability"),
            ("<memory_corruption>", "a", "uco:Vulnerability"),
            ("<service_crash>", "a", "uco:Vulnerability"),
            ("<sql_injection>", "a", "uco:Vulnerability"),
            ("<MySQL>", "a", "uco:Product"),
            ("<PostgreSQL>", "a", "uco:Product"),
            ("<MySQL>", "uco:hasVulnerability", "<memory_corruption>"),
            ("<MySQL>", "uco:hasVulnerability", "<sql_injection>"),
            ("<PostgreSQL>", "uco:hasVulnerability", "<sql_injection>"),
        ] {
            g.assert_triple(t(s, p, o)).unwrap();
        }
        let mut b = VectorSpace::builder(2);
        b.insert("denial_of_service", vec![1.0, 0.0]).unwrap();
        b.insert("memory_corruption", vec![1.0, 0.05]).unwrap();
        b.insert("service_crash", vec![1.0, 0.1]).unwrap();
        b.insert("sql_injection", vec![0.0, 1.0]).unwrap();
        b.insert("mysql", vec![0.9, 0.4]).unwrap();
        b.insert("postgresql", vec![0.88, 0.42]).unwrap();
        for i in 0..10 {
            let name = format!("pad_vuln_{i:02}");
            g.assert_triple(t(&format!("<{name}>"), "a", "uco:Vulnerability")).unwrap();
            b.insert(&name, vec![1.0, 0.15 + 0.05 * i as f64]).unwrap();
        }
        let (store, _) = VkgStore::link(g, b.build()).unwrap();
        store
    }

    #[test]
    fn composite_query_raises_alert_on_overlap() {
        let store = query_store();
        let ast = parse_query(QUERY_1).unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();

        let v = result.binding("V").unwrap();
        // Class filter defaults to the seed's class, so only vulnerabilities.
        assert!(v.members.contains(&iri("<memory_corruption>")));
        assert!(!v.members.contains(&iri("<MySQL>")));
        let k = result.binding("K").unwrap();
        assert_eq!(k.members, vec![iri("<memory_corruption>"), iri("<sql_injection>")]);

        let verdict = result.verdict("alert").unwrap();
        assert!(verdict.value);
        assert_eq!(verdict.witness, vec![iri("<memory_corruption>")]);
        assert_eq!(verdict.context, vec![iri("<MySQL>")]);
    }

    #[test]
    fn removing_the_overlap_flips_the_verdict() {
        let store = query_store();
        let mut graph = store.graph().clone();
        graph.retract_triple(&Triple::with_iri_object(
            iri("<MySQL>"),
            iri("uco:hasVulnerability"),
            iri("<memory_corruption>"),
        ));
        let store = VkgStore::from_linked_graph(graph, store.space().clone()).unwrap();
        let ast = parse_query(QUERY_1).unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        let verdict = result.verdict("alert").unwrap();
        assert!(!verdict.value);
        assert!(verdict.witness.is_empty());
    }

    #[test]
    fn search_then_list_chains_through_the_set() {
        // vulnerabilities in products similar to PostgreSQL: search products,
        // then union their vulnerability lists. Hand check: MySQL is the
        // only product neighbor, so the union is MySQL's two assertions.
        let store = query_store();
        let text = "{search, 'PostgreSQL', P} ; {list, vulnerability, P, K}";
        let ast = parse_query(text).unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        assert_eq!(result.binding("P").unwrap().members, vec![iri("<MySQL>")]);
        assert_eq!(
            result.binding("K").unwrap().members,
            vec![iri("<memory_corruption>"), iri("<sql_injection>")]
        );
    }

    #[test]
    fn trace_routes_search_to_vector_and_rest_to_graph() {
        let store = query_store();
        let ast = parse_query(QUERY_1).unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        for trace in &result.trace {
            let is_search = trace.clause.starts_with("{search");
            assert_eq!(trace.part == Part::Vector, is_search, "{}", trace.clause);
        }
        assert_eq!(result.trace.len(), 3);
    }

    #[test]
    fn intra_stage_order_does_not_change_results() {
        let store = query_store();
        let forward = parse_query(QUERY_1).unwrap();
        let swapped = parse_query(
            "{list, vulnerability, 'MySQL', K} ; {search, 'denial_of_service', V} ; \
             {infer, V, K, 'MySQL', alert}",
        )
        .unwrap();
        let opts = QueryOptions::default();
        let a = execute(&store, &forward, &default_rulebook(), &opts).unwrap();
        let b = execute(&store, &swapped, &default_rulebook(), &opts).unwrap();
        assert_eq!(a.binding("V").unwrap().members, b.binding("V").unwrap().members);
        assert_eq!(a.binding("K").unwrap().members, b.binding("K").unwrap().members);
        assert_eq!(a.verdict("alert").unwrap().value, b.verdict("alert").unwrap().value);
        assert_eq!(a.verdict("alert").unwrap().witness, b.verdict("alert").unwrap().witness);
    }

    #[test]
    fn execute_never_mutates_the_store() {
        let store = query_store();
        let before = store.graph().clone();
        let ast = parse_query(QUERY_1).unwrap();
        execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        assert_eq!(store.graph(), &before);
    }

    #[test]
    fn unknown_rule_and_unlinked_seed_are_reported() {
        let store = query_store();
        let ast =
            parse_query("{search, 'denial_of_service', V} ; {infer, nonexistent, V, out}").unwrap();
        let err = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap_err();
        assert!(matches!(err, QueryError::UnknownRule { .. }), "{err}");

        let ast = parse_query("{search, 'never_heard_of', V}").unwrap();
        let err = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap_err();
        assert!(matches!(err, QueryError::UnknownEntity { .. }), "{err}");
    }

    #[test]
    fn explicit_star_filter_returns_mixed_classes() {
        let store = query_store();
        let ast = parse_query("{search, 'denial_of_service', *, V, 15}").unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        let v = result.binding("V").unwrap();
        assert!(v.members.contains(&iri("<MySQL>")), "unfiltered search should cross classes");
    }

    #[test]
    fn empty_set_overlap_is_no() {
        let store = query_store();
        let text = "{list, vulnerability, 'unknown_product', E} ; \
{list, vulnerability, 'MySQL', K} ; {infer, E, K, check}";
        let ast = parse_query(text).unwrap();
        let result = execute(&store, &ast, &default_rulebook(), &QueryOptions::default()).unwrap();
        assert!(result.binding("E").unwrap().members.is_empty());
        assert!(!result.verdict("check").unwrap().value);
    }
}
