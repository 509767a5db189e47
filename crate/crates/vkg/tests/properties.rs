//! Property tests for the store's structural invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;

use vkg::ingest::{default_stopwords, merge_graphs, preprocess, Gazetteer};
use vkg::kg::{terms, Iri, KnowledgeGraph, Object, Triple};
use vkg::query::{parse_query, print_query};
use vkg::store::VkgStore;
use vkg::vec::{rank_order, VectorSpace};

fn entity_name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,10}"
}

fn literal_text() -> impl Strategy<Value = String> {
    // Printable text plus the characters the escaper must handle.
    proptest::collection::vec(
        prop_oneof![
            proptest::char::range('a', 'z').prop_map(|c| c.to_string()),
            Just("\"".to_string()),
            Just("\\".to_string()),
            Just("\n".to_string()),
            Just("\t".to_string()),
            Just(" ".to_string()),
        ],
        0..12,
    )
    .prop_map(|parts| parts.concat())
}

#[derive(Debug, Clone)]
enum TripleSpec {
    Typed(String, u8),
    Related(String, u8, String),
    Tagged(String, String),
}

fn triple_spec() -> impl Strategy<Value = TripleSpec> {
    prop_oneof![
        (entity_name(), 0u8..3).prop_map(|(s, c)| TripleSpec::Typed(s, c)),
        (entity_name(), 0u8..4, entity_name()).prop_map(|(s, p, o)| TripleSpec::Related(s, p, o)),
        (entity_name(), literal_text()).prop_map(|(s, l)| TripleSpec::Tagged(s, l)),
    ]
}

fn build_graph(specs: &[TripleSpec]) -> KnowledgeGraph {
    let classes = ["uco:Product", "uco:Vulnerability", "uco:Means"];
    let predicates =
        ["uco:hasVulnerability", "uco:hasMeans", "uco:hasAttacker", "intel:hasVulnerability"];
    let mut g = KnowledgeGraph::new();
    for spec in specs {
        let triple = match spec {
            TripleSpec::Typed(s, c) => Triple::with_iri_object(
                Iri::entity(s).unwrap(),
                terms::rdf_type(),
                Iri::parse(classes[*c as usize % classes.len()]).unwrap(),
            ),
            TripleSpec::Related(s, p, o) => Triple::with_iri_object(
                Iri::entity(s).unwrap(),
                Iri::parse(predicates[*p as usize % predicates.len()]).unwrap(),
                Iri::entity(o).unwrap(),
            ),
            TripleSpec::Tagged(s, l) => {
                Triple::with_literal(Iri::entity(s).unwrap(), terms::has_vector(), l)
            }
        };
        g.assert_triple(triple).unwrap();
    }
    g
}

proptest! {
    /// parse(serialize(g)) reproduces every graph exactly, and serializing
    /// twice is byte-identical.
    #[test]
    fn turtle_round_trip(specs in proptest::collection::vec(triple_spec(), 0..60)) {
        let g = build_graph(&specs);
        let text = g.to_turtle();
        prop_assert_eq!(&g.to_turtle(), &text);
        let parsed = KnowledgeGraph::from_turtle(&text).unwrap();
        prop_assert_eq!(&parsed, &g);
    }

    /// Asserting more triples never removes list results.
    #[test]
    fn list_objects_is_monotone(
        base in proptest::collection::vec(triple_spec(), 0..30),
        extra in proptest::collection::vec(triple_spec(), 0..10),
        subject in entity_name(),
    ) {
        let smaller = build_graph(&base);
        let mut larger = smaller.clone();
        for spec in &extra {
            let mut one = build_graph(std::slice::from_ref(spec));
            for t in one.triples().cloned().collect::<Vec<_>>() {
                larger.assert_triple(t.clone()).unwrap();
            }
            one = KnowledgeGraph::new();
            let _ = one;
        }
        let relation = Iri::parse("uco:hasVulnerability").unwrap();
        let subject = Iri::entity(&subject).unwrap();
        let before = smaller.list_objects(&relation, &subject);
        let after = larger.list_objects(&relation, &subject);
        prop_assert!(before.is_subset(&after));
    }

    /// Subclass closure is a fixpoint: closing the closure adds nothing.
    #[test]
    fn subclass_closure_fixpoint(chain in proptest::collection::vec(entity_name(), 2..8)) {
        let mut g = KnowledgeGraph::new();
        let classes: Vec<Iri> =
            chain.iter().enumerate().map(|(i, c)| Iri::new("uco", &format!("C{i}{c}")).unwrap()).collect();
        for pair in classes.windows(2) {
            // Duplicate names can make a later link a self-loop; skip those.
            if pair[0] != pair[1] {
                let _ = g.assert_triple(Triple::with_iri_object(
                    pair[0].clone(),
                    terms::rdfs_subclass_of(),
                    pair[1].clone(),
                ));
            }
        }
        let once = g.superclass_closure(&classes[0]);
        let mut twice = once.clone();
        for c in &once {
            twice.extend(g.superclass_closure(c));
        }
        prop_assert_eq!(once, twice);
    }

    /// Cosine is symmetric within 1e-6 and self-similarity is 1 within 1e-6;
    /// scaling a vector by a positive factor never changes rankings.
    #[test]
    fn cosine_properties(
        vectors in proptest::collection::vec(
            proptest::collection::vec(-1.0f64..1.0, 4),
            2..12,
        ),
        scale in 0.1f64..50.0,
    ) {
        let mut builder = VectorSpace::builder(4);
        let mut nonzero = Vec::new();
        for (i, v) in vectors.iter().enumerate() {
            let token = format!("t{i:02}");
            if v.iter().any(|x| *x != 0.0) {
                nonzero.push(token.clone());
            }
            builder.insert(&token, v.clone()).unwrap();
        }
        prop_assume!(nonzero.len() >= 2);
        let space = builder.build();
        let a = &nonzero[0];
        let b = &nonzero[1];
        prop_assert!((space.cosine(a, a).unwrap() - 1.0).abs() < 1e-6);
        prop_assert!((space.cosine(a, b).unwrap() - space.cosine(b, a).unwrap()).abs() < 1e-6);

        let mut scaled = VectorSpace::builder(4);
        for (i, v) in vectors.iter().enumerate() {
            let token = format!("t{i:02}");
            let values = if token == *b {
                v.iter().map(|x| x * scale).collect()
            } else {
                v.clone()
            };
            scaled.insert(&token, values).unwrap();
        }
        let scaled = scaled.build();
        let before: Vec<String> =
            space.top_k(a, vectors.len(), true).unwrap().results.into_iter().map(|(t, _)| t).collect();
        let after: Vec<String> =
            scaled.top_k(a, vectors.len(), true).unwrap().results.into_iter().map(|(t, _)| t).collect();
        prop_assert_eq!(before, after);
    }

    /// Class-filtered search results are always a subset of the unfiltered
    /// results at the same expansion, all linked, with descending scores.
    #[test]
    fn filtered_search_is_a_subset(
        typed in proptest::collection::vec((entity_name(), 0u8..2), 3..14),
        seed_idx in 0usize..3,
    ) {
        let mut g = KnowledgeGraph::new();
        let mut builder = VectorSpace::builder(3);
        let mut names = BTreeSet::new();
        for (name, class) in &typed {
            names.insert((name.clone(), *class));
        }
        let names: Vec<(String, u8)> = names.into_iter().collect();
        prop_assume!(names.len() >= 3);
        // The filter class must exist in the ontology.
        prop_assume!(names.iter().any(|(_, c)| *c == 1));
        for (i, (name, class)) in names.iter().enumerate() {
            let class = if *class == 0 { "uco:Product" } else { "uco:Vulnerability" };
            g.assert_triple(Triple::with_iri_object(
                Iri::entity(name).unwrap(),
                terms::rdf_type(),
                Iri::parse(class).unwrap(),
            )).unwrap();
            let angle = i as f64 * 0.7;
            builder.insert(
                &vkg::kg::normalize_token(name),
                vec![angle.cos(), angle.sin(), 0.3],
            ).unwrap_or(());
        }
        let (store, _) = VkgStore::link(g, builder.build()).unwrap();
        let seed = Iri::entity(&names[seed_idx % names.len()].0).unwrap();
        prop_assume!(store.link_token(&seed).is_some());
        let k = names.len();
        let unfiltered: BTreeSet<Iri> = store
            .vkg_search(&seed, k, None).unwrap()
            .into_iter().map(|(e, _)| e).collect();
        let filter = Iri::parse("uco:Vulnerability").unwrap();
        let filtered = store.vkg_search(&seed, k, Some(&filter)).unwrap();
        let filtered_set: BTreeSet<Iri> = filtered.iter().map(|(e, _)| e.clone()).collect();
        prop_assert!(filtered_set.is_subset(&unfiltered));
        prop_assert!(filtered.windows(2).all(|w| w[0].1 >= w[1].1));
        for (e, _) in &filtered {
            prop_assert!(store.link_token(e).is_some());
        }
    }

    /// Merging is commutative and associative up to triple-set equality.
    #[test]
    fn merge_is_commutative_and_associative(
        a in proptest::collection::vec(triple_spec(), 0..16),
        b in proptest::collection::vec(triple_spec(), 0..16),
        c in proptest::collection::vec(triple_spec(), 0..16),
    ) {
        let (ga, gb, gc) = (build_graph(&a), build_graph(&b), build_graph(&c));
        let ab = merge_graphs(&[ga.clone(), gb.clone()]).unwrap();
        let ba = merge_graphs(&[gb.clone(), ga.clone()]).unwrap();
        prop_assert_eq!(&ab, &ba);
        let ab_then_c = merge_graphs(&[ab, gc.clone()]).unwrap();
        let all_at_once = merge_graphs(&[ga, gb, gc]).unwrap();
        prop_assert_eq!(ab_then_c, all_at_once);
    }

    /// Preprocessing its own output changes nothing.
    #[test]
    fn preprocess_is_idempotent(words in proptest::collection::vec("[a-z]{1,8}", 1..20)) {
        let mut gazetteer = Gazetteer::new();
        let class = Iri::parse("uco:Product").unwrap();
        // Every third word becomes a known two-word phrase.
        for pair in words.chunks(3) {
            if pair.len() >= 2 {
                gazetteer
                    .add(&format!("{} {}", pair[0], pair[1]), &format!("{}_{}", pair[0], pair[1]), &class)
                    .unwrap();
            }
        }
        let stopwords = default_stopwords();
        let text = words.join(" ");
        let once = preprocess(&text, &gazetteer, &stopwords);
        let again = preprocess(&once.join(" "), &gazetteer, &stopwords);
        prop_assert_eq!(once, again);
    }

    /// Pretty-printing a parsed query and reparsing it is a fixpoint.
    #[test]
    fn query_print_parse_fixpoint(
        seed in "[a-z_]{1,12}",
        relation in "[a-z]{1,10}",
        k in proptest::option::of(1usize..50),
        filtered in proptest::bool::ANY,
    ) {
        let k_text = k.map(|k| format!(", {k}")).unwrap_or_default();
        let filter_text = if filtered { ", *" } else { "" };
        let text = format!(
            "{{search, '{seed}'{filter_text}, V{k_text}}} ; {{list, {relation}, '{seed}', K}} ; \
             {{infer, V, K, '{seed}', alert}}"
        );
        let ast = parse_query(&text).unwrap();
        let printed = print_query(&ast);
        let reparsed = parse_query(&printed).unwrap();
        prop_assert_eq!(&reparsed, &ast);
        prop_assert_eq!(print_query(&reparsed), printed);
    }

    /// The ranking comparator is a total order on finite scores: antisymmetric
    /// and transitive over any sample.
    #[test]
    fn rank_order_is_total(
        items in proptest::collection::vec((-1.0f64..1.0, "[a-z]{1,4}"), 2..8),
    ) {
        for (sa, ta) in &items {
            for (sb, tb) in &items {
                let ab = rank_order((*sa, ta), (*sb, tb));
                let ba = rank_order((*sb, tb), (*sa, ta));
                prop_assert_eq!(ab, ba.reverse());
            }
        }
        let mut sorted = items.clone();
        sorted.sort_by(|a, b| rank_order((a.0, &a.1), (b.0, &b.1)));
        for w in sorted.windows(2) {
            prop_assert_ne!(rank_order((w[0].0, &w[0].1), (w[1].0, &w[1].1)), std::cmp::Ordering::Greater);
        }
    }
}

/// sameAs closure: list results are invariant to which member of a pair is
/// queried, for predicates asserted on either member.
#[test]
fn same_as_closure_makes_list_symmetric() {
    let mut g = KnowledgeGraph::new();
    let rel = Iri::parse("uco:hasVulnerability").unwrap();
    g.assert_triple(Triple::with_iri_object(
        Iri::entity("local_name").unwrap(),
        terms::owl_same_as(),
        Iri::parse("dbp:External_Name").unwrap(),
    ))
    .unwrap();
    g.assert_triple(Triple::with_iri_object(
        Iri::entity("local_name").unwrap(),
        rel.clone(),
        Iri::entity("dos").unwrap(),
    ))
    .unwrap();
    g.assert_triple(Triple::with_iri_object(
        Iri::parse("dbp:External_Name").unwrap(),
        rel.clone(),
        Iri::entity("csrf").unwrap(),
    ))
    .unwrap();
    let from_local = g.list_objects(&rel, &Iri::entity("local_name").unwrap());
    let from_external = g.list_objects(&rel, &Iri::parse("dbp:External_Name").unwrap());
    assert_eq!(from_local, from_external);
    assert_eq!(from_local.len(), 2);
    assert!(from_local.contains(&Object::Iri(Iri::entity("dos").unwrap())));
}
