//! Retrieval evaluation: Mean Average Precision over annotated similarity
//! groups, comparing graph matching, plain vector search, and graph-filtered
//! vector search, plus latency measurement.

use std::collections::{BTreeMap, HashSet};
use std::hash::Hash;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{normalize_token, terms, Iri, KnowledgeGraph};
use crate::store::{StoreError, VkgStore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("EmptyRelevantSet: average precision needs at least one relevant item")]
    EmptyRelevantSet,
    #[error("MalformedGroups: {reason}")]
    MalformedGroups { reason: String },
    #[error("UnknownEntity: group member `{member}` is not a graph entity")]
    UnknownEntity { member: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Product,
    Vulnerability,
    Attack,
}

impl GroupKind {
    /// The ontology class a group's members share.
    pub fn class(&self) -> Iri {
        match self {
            GroupKind::Product => terms::uco_product(),
            GroupKind::Vulnerability => terms::uco_vulnerability(),
            GroupKind::Attack => Iri::new("uco", "Attack").expect("uco prefix"),
        }
    }
}

/// An annotated set of mutually similar entities used as retrieval ground
/// truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityGroup {
    pub name: String,
    pub kind: GroupKind,
    pub members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupsFile {
    groups: Vec<SimilarityGroup>,
}

pub fn load_groups(path: &Path) -> Result<Vec<SimilarityGroup>, EvalError> {
    let file: GroupsFile = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| EvalError::MalformedGroups { reason: e.to_string() })?;
    validate_groups(&file.groups)?;
    Ok(file.groups)
}

pub fn save_groups(groups: &[SimilarityGroup], path: &Path) -> Result<(), EvalError> {
    validate_groups(groups)?;
    let mut json = serde_json::to_string_pretty(&GroupsFile { groups: groups.to_vec() })
        .map_err(|e| EvalError::MalformedGroups { reason: e.to_string() })?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

fn validate_groups(groups: &[SimilarityGroup]) -> Result<(), EvalError> {
    for g in groups {
        if g.members.len() < 2 {
            return Err(EvalError::MalformedGroups {
                reason: format!("group `{}` needs at least 2 members", g.name),
            });
        }
    }
    Ok(())
}

/// Average precision of a ranked list against a relevant set: the sum of
/// precision-at-rank over retrieved relevant items, divided by the total
/// number of relevant items. Zero when nothing relevant is retrieved.
pub fn average_precision<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevantSet);
    }
    debug_assert_eq!(
        ranked.len(),
        ranked.iter().collect::<HashSet<_>>().len(),
        "ranked list must be duplicate-free"
    );
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (rank, item) in ranked.iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            precision_sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(precision_sum / relevant.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalModel {
    GraphMatching,
    VectorOnly,
    VkgSearch,
}

impl RetrievalModel {
    pub fn name(&self) -> &'static str {
        match self {
            RetrievalModel::GraphMatching => "graph-matching",
            RetrievalModel::VectorOnly => "vector-only",
            RetrievalModel::VkgSearch => "vkg-search",
        }
    }
}

/// Structural graph baseline: rank entities by the number of shared
/// (predicate, object) pairs with the seed, class match breaking ties, then
/// entity name.
pub fn structural_rank(graph: &KnowledgeGraph, seed: &Iri, k: usize) -> Vec<(Iri, f64)> {
    let seed_pairs = graph.predicate_objects(seed);
    let seed_classes = graph.direct_classes(seed);
    let mut scored: Vec<(Iri, usize, bool)> = graph
        .entities()
        .into_iter()
        .filter(|e| e != seed)
        .map(|e| {
            let shared = graph.predicate_objects(&e).intersection(&seed_pairs).count();
            let class_match = !graph.direct_classes(&e).is_disjoint(&seed_classes);
            (e, shared, class_match)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| b.2.cmp(&a.2))
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.into_iter().take(k).map(|(e, s, _)| (e, s as f64)).collect()
}

/// Resolve a group member name to its graph entity (by exact local name,
/// then by normalized name over linked entities).
pub fn resolve_member(store: &VkgStore, member: &str) -> Result<Iri, EvalError> {
    let direct = Iri::entity(member)
        .map_err(|e| EvalError::MalformedGroups { reason: e.to_string() })?;
    let entities = store.graph().entities();
    if entities.contains(&direct) {
        return Ok(direct);
    }
    let wanted = normalize_token(member);
    for e in &entities {
        if normalize_token(e.local()) == wanted {
            return Ok(e.clone());
        }
    }
    Err(EvalError::UnknownEntity { member: member.to_string() })
}

fn retrieve(
    store: &VkgStore,
    model: RetrievalModel,
    seed: &Iri,
    k: usize,
    kind: GroupKind,
) -> Result<Vec<Iri>, EvalError> {
    let entities = match model {
        RetrievalModel::GraphMatching => {
            structural_rank(store.graph(), seed, k).into_iter().map(|(e, _)| e).collect()
        }
        RetrievalModel::VectorOnly => {
            store.vkg_search(seed, k, None)?.into_iter().map(|(e, _)| e).collect()
        }
        RetrievalModel::VkgSearch => {
            let class = kind.class();
            store.vkg_search(seed, k, Some(&class))?.into_iter().map(|(e, _)| e).collect()
        }
    };
    Ok(entities)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyStats {
    pub queries: usize,
    pub median_micros: f64,
    pub p10_micros: f64,
    pub p90_micros: f64,
    pub mean_micros: f64,
}

fn latency_stats(mut micros: Vec<f64>) -> LatencyStats {
    assert!(!micros.is_empty());
    micros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| -> f64 {
        let idx = ((micros.len() - 1) as f64 * q).round() as usize;
        micros[idx]
    };
    LatencyStats {
        queries: micros.len(),
        median_micros: pick(0.5),
        p10_micros: pick(0.1),
        p90_micros: pick(0.9),
        mean_micros: micros.iter().sum::<f64>() / micros.len() as f64,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupResult {
    pub name: String,
    pub kind: GroupKind,
    pub average_precision: f64,
    pub seeds_evaluated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: RetrievalModel,
    pub k: usize,
    pub per_group: Vec<GroupResult>,
    pub map_by_kind: BTreeMap<GroupKind, f64>,
    pub map: f64,
    pub latency: LatencyStats,
}

/// Evaluate one model: for every group and every member as seed, retrieve
/// top-k, score average precision against the remaining members; a group's
/// AP is the mean over seeds, MAP the mean over groups.
pub fn evaluate_model(
    store: &VkgStore,
    groups: &[SimilarityGroup],
    model: RetrievalModel,
    k: usize,
) -> Result<EvalReport, EvalError> {
    evaluate_model_with_threads(store, groups, model, k, 1)
}

/// Same as [`evaluate_model`], optionally fanning the (group, seed) work out
/// over scoped threads. AP results are independent of the thread count;
/// latency numbers are measured as-run.
pub fn evaluate_model_with_threads(
    store: &VkgStore,
    groups: &[SimilarityGroup],
    model: RetrievalModel,
    k: usize,
    threads: usize,
) -> Result<EvalReport, EvalError> {
    validate_groups(groups)?;
    let mut tasks = Vec::new(); // (group index, seed, relevant)
    for (gi, group) in groups.iter().enumerate() {
        let members: Vec<Iri> = group
            .members
            .iter()
            .map(|m| resolve_member(store, m))
            .collect::<Result<_, _>>()?;
        for (si, seed) in members.iter().enumerate() {
            let relevant: HashSet<Iri> =
                members.iter().enumerate().filter(|(j, _)| *j != si).map(|(_, m)| m.clone()).collect();
            tasks.push((gi, seed.clone(), relevant));
        }
    }

    let run_task = |(gi, seed, relevant): &(usize, Iri, HashSet<Iri>)| -> Result<(usize, f64, f64), EvalError> {
        let started = Instant::now();
        let ranked = retrieve(store, model, seed, k, groups[*gi].kind)?;
        let micros = started.elapsed().as_secs_f64() * 1e6;
        let ap = average_precision(&ranked, relevant)?;
        Ok((*gi, ap, micros))
    };

    let results: Vec<(usize, f64, f64)> = if threads <= 1 || tasks.len() < 2 {
        tasks.iter().map(run_task).collect::<Result<_, _>>()?
    } else {
        let chunk = tasks.len().div_ceil(threads);
        let mut collected: Vec<Option<Vec<(usize, f64, f64)>>> =
            (0..tasks.len().div_ceil(chunk)).map(|_| None).collect();
        std::thread::scope(|scope| -> Result<(), EvalError> {
            let mut handles = Vec::new();
            for (ci, task_chunk) in tasks.chunks(chunk).enumerate() {
                handles.push((ci, scope.spawn(move || {
                    task_chunk.iter().map(run_task).collect::<Result<Vec<_>, _>>()
                })));
            }
            for (ci, handle) in handles {
                collected[ci] = Some(handle.join().expect("eval worker panicked")?);
            }
            Ok(())
        })?;
        collected.into_iter().flatten().flatten().collect()
    };

    let mut group_ap_sums = vec![(0.0, 0usize); groups.len()];
    let mut micros = Vec::with_capacity(results.len());
    for (gi, ap, us) in results {
        group_ap_sums[gi].0 += ap;
        group_ap_sums[gi].1 += 1;
        micros.push(us);
    }
    let per_group: Vec<GroupResult> = groups
        .iter()
        .zip(&group_ap_sums)
        .map(|(g, (sum, n))| GroupResult {
            name: g.name.clone(),
            kind: g.kind,
            average_precision: if *n == 0 { 0.0 } else { sum / *n as f64 },
            seeds_evaluated: *n,
        })
        .collect();

    let mut map_by_kind = BTreeMap::new();
    for kind in [GroupKind::Product, GroupKind::Vulnerability, GroupKind::Attack] {
        let of_kind: Vec<f64> = per_group
            .iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.average_precision)
            .collect();
        if !of_kind.is_empty() {
            map_by_kind.insert(kind, of_kind.iter().sum::<f64>() / of_kind.len() as f64);
        }
    }
    let map = per_group.iter().map(|g| g.average_precision).sum::<f64>() / per_group.len() as f64;

    Ok(EvalReport { model, k, per_group, map_by_kind, map, latency: latency_stats(micros) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub vector: LatencyStats,
    pub graph: LatencyStats,
    /// Graph-matching median latency divided by vector-search median.
    pub speedup: f64,
}

/// Median per-query latency of graph matching over vector search across
/// `repetitions` passes over every (group, seed) query.
pub fn latency_compare(
    store: &VkgStore,
    groups: &[SimilarityGroup],
    k: usize,
    repetitions: usize,
) -> Result<SpeedupReport, EvalError> {
    assert!(repetitions >= 10, "latency comparison needs at least 10 repetitions");
    validate_groups(groups)?;
    let mut seeds = Vec::new();
    for group in groups {
        for member in &group.members {
            seeds.push((resolve_member(store, member)?, group.kind));
        }
    }
    let mut vector_micros = Vec::new();
    let mut graph_micros = Vec::new();
    for _ in 0..repetitions {
        for (seed, kind) in &seeds {
            let started = Instant::now();
            retrieve(store, RetrievalModel::VectorOnly, seed, k, *kind)?;
            vector_micros.push(started.elapsed().as_secs_f64() * 1e6);

            let started = Instant::now();
            retrieve(store, RetrievalModel::GraphMatching, seed, k, *kind)?;
            graph_micros.push(started.elapsed().as_secs_f64() * 1e6);
        }
    }
    let vector = latency_stats(vector_micros);
    let graph = latency_stats(graph_micros);
    let speedup = graph.median_micros / vector.median_micros;
    Ok(SpeedupReport { vector, graph, speedup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;
    use crate::vec::VectorSpace;

    fn iri(text: &str) -> Iri {
        Iri::parse(text).unwrap()
    }

    #[test]
    fn average_precision_matches_hand_computation() {
        let relevant: HashSet<&str> = ["r1", "r2"].into_iter().collect();
        let ap = average_precision(&["r1", "x", "r2"], &relevant).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn all_relevant_retrieved_in_order_scores_one() {
        let relevant: HashSet<&str> = ["a", "b"].into_iter().collect();
        assert!((average_precision(&["a", "b"], &relevant).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nothing_relevant_retrieved_scores_zero() {
        let relevant: HashSet<&str> = ["a"].into_iter().collect();
        assert_eq!(average_precision(&["x", "y"], &relevant).unwrap(), 0.0);
    }

    #[test]
    fn empty_relevant_set_is_an_error() {
        let relevant: HashSet<&str> = HashSet::new();
        assert!(matches!(
            average_precision(&["x"], &relevant),
            Err(EvalError::EmptyRelevantSet)
        ));
    }

    fn two_group_store() -> VkgStore {
        // Group alpha: a1 a2 a3 near axis x; group beta: b1 b2 near axis y.
        let mut g = KnowledgeGraph::new();
        let product = iri("uco:Product");
        for e in ["<a1>", "<a2>", "<a3>", "<b1>", "<b2>"] {
            g.assert_triple(Triple::with_iri_object(iri(e), terms::rdf_type(), product.clone()))
                .unwrap();
        }
        // Structural signal: members share a vendor pair.
        for e in ["<a1>", "<a2>", "<a3>"] {
            g.assert_triple(Triple::with_iri_object(iri(e), iri("uco:hasProduct"), iri("<va>")))
                .unwrap();
        }
        for e in ["<b1>", "<b2>"] {
            g.assert_triple(Triple::with_iri_object(iri(e), iri("uco:hasProduct"), iri("<vb>")))
                .unwrap();
        }
        let mut b = VectorSpace::builder(2);
        b.insert("a1", vec![1.0, 0.00]).unwrap();
        b.insert("a2", vec![1.0, 0.05]).unwrap();
        b.insert("a3", vec![1.0, 0.10]).unwrap();
        b.insert("b1", vec![0.0, 1.0]).unwrap();
        b.insert("b2", vec![0.05, 1.0]).unwrap();
        b.insert("va", vec![0.7, 0.7]).unwrap();
        b.insert("vb", vec![0.6, 0.8]).unwrap();
        let (store, _) = VkgStore::link(g, b.build()).unwrap();
        store
    }

    fn groups() -> Vec<SimilarityGroup> {
        vec![
            SimilarityGroup {
                name: "alpha".into(),
                kind: GroupKind::Product,
                members: vec!["a1".into(), "a2".into(), "a3".into()],
            },
            SimilarityGroup {
                name: "beta".into(),
                kind: GroupKind::Product,
                members: vec!["b1".into(), "b2".into()],
            },
        ]
    }

    #[test]
    fn perfect_geometry_gives_map_one_for_vector_only() {
        let store = two_group_store();
        let report =
            evaluate_model(&store, &groups(), RetrievalModel::VkgSearch, 2).unwrap();
        assert!((report.map - 1.0).abs() < 1e-12, "map = {}", report.map);
    }

    #[test]
    fn map_is_the_mean_of_per_group_aps() {
        let store = two_group_store();
        for model in
            [RetrievalModel::GraphMatching, RetrievalModel::VectorOnly, RetrievalModel::VkgSearch]
        {
            let report = evaluate_model(&store, &groups(), model, 3).unwrap();
            let mean: f64 = report.per_group.iter().map(|g| g.average_precision).sum::<f64>()
                / report.per_group.len() as f64;
            assert!((report.map - mean).abs() < 1e-12);
            assert!(report.map >= 0.0 && report.map <= 1.0);
        }
    }

    #[test]
    fn results_are_identical_across_thread_counts() {
        let store = two_group_store();
        let sequential =
            evaluate_model_with_threads(&store, &groups(), RetrievalModel::VkgSearch, 3, 1).unwrap();
        let parallel =
            evaluate_model_with_threads(&store, &groups(), RetrievalModel::VkgSearch, 3, 4).unwrap();
        for (a, b) in sequential.per_group.iter().zip(&parallel.per_group) {
            assert_eq!(a.average_precision, b.average_precision);
        }
    }

    #[test]
    fn single_group_report_matches_brute_force() {
        // Hand-checked: seed a1 retrieves [a2 (.9988), a3 (.9950)] at k=2
        // under the vector model restricted to products... including b's:
        // cos(a1,b1)=0, cos(a1,b2)≈.05, so top-2 is a2, a3 -> AP = 1.
        let store = two_group_store();
        let single = vec![SimilarityGroup {
            name: "alpha".into(),
            kind: GroupKind::Product,
            members: vec!["a1".into(), "a2".into(), "a3".into()],
        }];
        let report = evaluate_model(&store, &single, RetrievalModel::VectorOnly, 2).unwrap();
        // Each seed retrieves its two twins ahead of everything else.
        assert!((report.map - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structural_rank_prefers_shared_pairs() {
        let store = two_group_store();
        let ranked = structural_rank(store.graph(), &iri("<a1>"), 4);
        assert_eq!(ranked[0].0, iri("<a2>"));
        assert_eq!(ranked[1].0, iri("<a3>"));
        assert!(ranked[0].1 >= 1.0);
    }

    #[test]
    fn filtered_ap_never_undercuts_unfiltered_when_members_share_class() {
        let store = two_group_store();
        let gs = groups();
        let unfiltered = evaluate_model(&store, &gs, RetrievalModel::VectorOnly, 3).unwrap();
        let filtered = evaluate_model(&store, &gs, RetrievalModel::VkgSearch, 3).unwrap();
        for (u, f) in unfiltered.per_group.iter().zip(&filtered.per_group) {
            assert!(f.average_precision >= u.average_precision - 1e-12);
        }
    }

    #[test]
    fn latency_compare_reports_positive_finite_speedup() {
        let store = two_group_store();
        let report = latency_compare(&store, &groups(), 3, 10).unwrap();
        assert!(report.speedup.is_finite());
        assert!(report.speedup > 0.0);
    }

    #[test]
    fn single_entity_store_still_measures_finite_latencies() {
        // Degenerate store: one entity; both group members resolve to it by
        // normalization, so measurement still runs.
        let mut g = KnowledgeGraph::new();
        g.assert_triple(Triple::with_iri_object(
            Iri::entity("Solo").unwrap(),
            terms::rdf_type(),
            iri("uco:Product"),
        ))
        .unwrap();
        let mut b = VectorSpace::builder(2);
        b.insert("solo", vec![1.0, 0.5]).unwrap();
        let (store, _) = VkgStore::link(g, b.build()).unwrap();
        let group = vec![SimilarityGroup {
            name: "degenerate".into(),
            kind: GroupKind::Product,
            members: vec!["Solo".into(), "solo".into()],
        }];
        let report = latency_compare(&store, &group, 3, 10).unwrap();
        assert!(report.speedup.is_finite() && report.speedup > 0.0);
        assert!(report.vector.median_micros > 0.0);
        assert!(report.graph.median_micros > 0.0);
    }

    #[test]
    fn groups_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("groups.json");
        save_groups(&groups(), &path).unwrap();
        assert_eq!(load_groups(&path).unwrap(), groups());
        save_groups(
            &[SimilarityGroup { name: "solo".into(), kind: GroupKind::Attack, members: vec!["x".into()] }],
            &path,
        )
        .map(|_| ())
        .unwrap_err();
    }
}
