//! Regenerates `fixtures/cyber/`: a small hand-placed cyber store plus the
//! corpus, gazetteer, patterns, rules, profile, groups, sameAs, and
//! dependency files that exercise every CLI path. Deterministic, so the
//! committed fixture files never drift.
//!
//! Run from the workspace root:
//!
//! ```bash
//! cargo run -p vkg-cli --example make_cyber_fixture
//! ```

use std::path::Path;

use vkg::alert::{default_rulebook, save_rulebook, ProductEntry, SystemProfile};
use vkg::eval::{save_groups, GroupKind, SimilarityGroup};
use vkg::ingest::{save_patterns, write_corpus, Document, Gazetteer, Source};
use vkg::kg::{terms, Iri, KnowledgeGraph, Triple};
use vkg::store::{save_store, BuildEcho, CorpusStats, LinkStats, StoreMeta, VkgStore};
use vkg::vec::VectorSpace;

/// (entity, class, vector) rows for the hand-placed store. Vulnerability
/// families sit along distinct directions so that the availability family
/// plus the overflow family fill the top 10 around denial_of_service while
/// every injection entity stays outside it.
const ENTITIES: &[(&str, &str, [f64; 4])] = &[
    // availability family
    ("denial_of_service", "uco:Vulnerability", [1.0, 0.02, 0.0, 0.0]),
    ("memory_corruption", "uco:Vulnerability", [1.0, 0.05, 0.0, 0.0]),
    ("resource_exhaustion", "uco:Vulnerability", [1.0, 0.08, 0.01, 0.0]),
    ("service_crash", "uco:Vulnerability", [1.0, 0.10, 0.02, 0.0]),
    ("connection_flood", "uco:Vulnerability", [1.0, 0.12, 0.03, 0.0]),
    ("cache_exhaustion", "uco:Vulnerability", [1.0, 0.14, 0.04, 0.0]),
    ("execute_arbitrary_code", "uco:Vulnerability", [0.9, 0.30, 0.05, 0.0]),
    // overflow family
    ("buffer_overflow", "uco:Vulnerability", [0.60, 0.80, 0.0, 0.0]),
    ("heap_overflow", "uco:Vulnerability", [0.58, 0.80, 0.02, 0.0]),
    ("stack_overflow", "uco:Vulnerability", [0.56, 0.80, 0.04, 0.0]),
    ("integer_overflow", "uco:Vulnerability", [0.54, 0.80, 0.06, 0.0]),
    ("format_string", "uco:Vulnerability", [0.52, 0.80, 0.08, 0.0]),
    // injection family
    ("sql_injection", "uco:Vulnerability", [0.05, 0.10, 1.0, 0.0]),
    ("code_injection", "uco:Vulnerability", [0.04, 0.10, 1.0, 0.01]),
    ("command_injection", "uco:Vulnerability", [0.03, 0.10, 1.0, 0.02]),
    ("cross_site_scripting", "uco:Vulnerability", [0.02, 0.10, 1.0, 0.03]),
    ("csrf", "uco:Vulnerability", [0.01, 0.10, 1.0, 0.04]),
    // products
    ("MySQL", "uco:Product", [0.0, 0.05, 0.12, 1.0]),
    ("PostgreSQL", "uco:Product", [0.0, 0.06, 0.14, 1.0]),
    ("MariaDB", "uco:Product", [0.0, 0.07, 0.16, 1.0]),
    ("Google_Chrome", "uco:Product", [0.30, 0.0, 0.0, 1.0]),
    ("Chromium", "uco:Product", [0.31, 0.0, 0.01, 1.0]),
    ("Microsoft_Internet_Explorer", "uco:Product", [0.36, 0.0, 0.02, 1.0]),
    ("Firefox", "uco:Product", [0.55, 0.0, 0.02, 1.0]),
    ("Thunderbird", "uco:Product", [0.56, 0.0, 0.03, 1.0]),
    // attackers and means
    ("remote_attackers", "uco:Attacker", [0.0, 1.0, 0.20, 0.10]),
    ("local_users", "uco:Attacker", [0.0, 1.0, 0.25, 0.10]),
    ("crafted_web_site", "uco:Means", [0.1, 0.95, 0.30, 0.0]),
    ("crafted_packets", "uco:Means", [0.1, 0.90, 0.35, 0.0]),
];

/// Non-type assertions: (subject, predicate, object).
const RELATIONS: &[(&str, &str, &str)] = &[
    // the worked Internet Explorer example
    ("Microsoft_Internet_Explorer", "uco:hasVulnerability", "execute_arbitrary_code"),
    ("Microsoft_Internet_Explorer", "uco:hasVulnerability", "denial_of_service"),
    ("execute_arbitrary_code", "uco:affectsProduct", "Microsoft_Internet_Explorer"),
    ("execute_arbitrary_code", "uco:hasAttacker", "remote_attackers"),
    ("execute_arbitrary_code", "uco:hasMeans", "crafted_web_site"),
    ("denial_of_service", "uco:affectsProduct", "Microsoft_Internet_Explorer"),
    ("denial_of_service", "uco:hasAttacker", "remote_attackers"),
    ("denial_of_service", "uco:hasMeans", "crafted_web_site"),
    // database products
    ("MySQL", "uco:hasVulnerability", "memory_corruption"),
    ("MySQL", "uco:hasVulnerability", "sql_injection"),
    ("PostgreSQL", "uco:hasVulnerability", "sql_injection"),
    // the mozilla pair
    ("Firefox", "uco:hasVulnerability", "heap_overflow"),
    // shared library dependencies
    ("Firefox", "uco:hasDependency", "libnss"),
    ("Firefox", "uco:hasDependency", "libgtk"),
    ("Firefox", "uco:hasDependency", "libxul"),
    ("Thunderbird", "uco:hasDependency", "libnss"),
    ("Thunderbird", "uco:hasDependency", "libgtk"),
    ("Thunderbird", "uco:hasDependency", "libxul"),
    ("Thunderbird", "uco:hasDependency", "libical"),
    ("MySQL", "uco:hasDependency", "libssl"),
    ("MySQL", "uco:hasDependency", "libz"),
    ("PostgreSQL", "uco:hasDependency", "libssl"),
    ("PostgreSQL", "uco:hasDependency", "libz"),
    ("PostgreSQL", "uco:hasDependency", "libxml2"),
];

/// Intelligence nodes: (id, vulnerability, unix timestamp). The injection
/// report is deliberately stale.
const INTELLIGENCE: &[(&str, &str, u64)] = &[
    ("Int3482758232", "execute_arbitrary_code", 1_494_547_200), // 2017-05-12
    ("Int3482758232", "denial_of_service", 1_494_547_200),
    ("Int8831002744", "memory_corruption", 1_494_633_600), // 2017-05-13
    ("Int5520013918", "heap_overflow", 1_494_547_200),
    ("Int2290751633", "sql_injection", 1_451_606_400), // 2016-01-01, stale
];

const LIBRARIES: &[&str] = &["libnss", "libgtk", "libxul", "libical", "libssl", "libz", "libxml2"];

fn iri(text: &str) -> Iri {
    Iri::parse(text).expect("fixture identifier")
}

fn entity(name: &str) -> Iri {
    Iri::entity(name).expect("fixture entity")
}

fn build_graph() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    for (name, class, _) in ENTITIES {
        g.assert_triple(Triple::with_iri_object(entity(name), terms::rdf_type(), iri(class)))
            .expect("type assertion");
    }
    for lib in LIBRARIES {
        g.assert_triple(Triple::with_iri_object(entity(lib), terms::rdf_type(), iri("uco:Software")))
            .expect("library type");
    }
    for (s, p, o) in RELATIONS {
        g.assert_triple(Triple::with_iri_object(entity(s), iri(p), entity(o)))
            .expect("relation assertion");
    }
    let mut intel_nodes = std::collections::BTreeMap::new();
    for (node, vulnerability, ts) in INTELLIGENCE {
        let node_iri = entity(node);
        g.assert_triple(Triple::with_iri_object(
            node_iri.clone(),
            terms::rdf_type(),
            terms::intelligence_class(),
        ))
        .expect("intelligence type");
        g.assert_triple(Triple::with_iri_object(
            node_iri.clone(),
            terms::intel_has_vulnerability(),
            entity(vulnerability),
        ))
        .expect("intelligence vulnerability");
        intel_nodes.insert(node.to_string(), *ts);
    }
    for (node, ts) in intel_nodes {
        g.assert_triple(Triple::with_literal(
            entity(&node),
            terms::intel_timestamp(),
            &ts.to_string(),
        ))
        .expect("intelligence timestamp");
    }
    // DBpedia counterparts, as in the worked example.
    let same_as = [
        ("Microsoft_Internet_Explorer", "dbp:Internet_Explorer"),
        ("execute_arbitrary_code", "dbp:Arbitrary_code_execution"),
        ("denial_of_service", "dbp:Denial-of-service_attack"),
    ];
    for (local, external) in same_as {
        g.assert_triple(Triple::with_iri_object(entity(local), terms::owl_same_as(), iri(external)))
            .expect("sameAs link");
    }
    g.assert_triple(Triple::with_iri_object(
        iri("dbp:Internet_Explorer"),
        iri("dbp:producedBy"),
        iri("dbp:Microsoft"),
    ))
    .expect("external fact");
    g
}

fn build_space() -> VectorSpace {
    let mut b = VectorSpace::builder(4);
    for (name, _, values) in ENTITIES {
        b.insert(&vkg::kg::normalize_token(name), values.to_vec()).expect("fixture vector");
    }
    b.build()
}

fn corpus_documents() -> Vec<Document> {
    let doc = |id: &str, text: &str, ts: u64| Document {
        id: id.to_string(),
        source: Source::Nvd,
        text: text.to_string(),
        timestamp: ts,
    };
    vec![
        doc(
            "cve-2017-ie",
            "Microsoft Internet Explorer allows remote attackers to execute arbitrary code \
or cause a denial of service (memory corruption) via a crafted web site, aka \
\"Internet Explorer Memory Corruption Vulnerability.\"\n",
            1_489_449_600,
        ),
        doc(
            "cve-2017-mysql-mem",
            "MySQL allows remote attackers to cause memory corruption via crafted packets.\n",
            1_494_633_600,
        ),
        doc(
            "cve-2016-mysql-sqli",
            "MySQL allows local users to conduct sql injection through unchecked statements.\n",
            1_451_606_400,
        ),
        doc(
            "cve-2017-firefox-heap",
            "Firefox allows remote attackers to cause heap overflow via a crafted web site.\n",
            1_494_547_200,
        ),
        doc(
            "blog-mozilla-stack",
            "Thunderbird shares rendering and networking libraries with Firefox.\n",
            1_494_547_200,
        ),
        doc(
            "blog-browsers",
            "Google Chrome and Chromium harden their sandboxes against buffer overflow and \
stack overflow reports.\n",
            1_494_460_800,
        ),
    ]
}

fn build_gazetteer() -> Gazetteer {
    let mut g = Gazetteer::new();
    let class_of = |name: &str| -> &str {
        ENTITIES
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|(_, c, _)| *c)
            .expect("gazetteer entity")
    };
    for (name, class, _) in ENTITIES {
        let phrase = name.replace('_', " ").to_lowercase();
        g.add(&phrase, name, &iri(class)).expect("gazetteer entry");
    }
    // Aliases and abbreviations.
    for (phrase, name) in [
        ("internet explorer", "Microsoft_Internet_Explorer"),
        ("dos", "denial_of_service"),
        ("xss", "cross_site_scripting"),
        ("cross-site request forgery", "csrf"),
    ] {
        g.add(phrase, name, &iri(class_of(name))).expect("gazetteer alias");
    }
    g
}

fn fixture_groups() -> Vec<SimilarityGroup> {
    let group = |name: &str, kind: GroupKind, members: &[&str]| SimilarityGroup {
        name: name.to_string(),
        kind,
        members: members.iter().map(|m| m.to_string()).collect(),
    };
    vec![
        group("databases", GroupKind::Product, &["MySQL", "PostgreSQL", "MariaDB"]),
        group(
            "browsers",
            GroupKind::Product,
            &["Google_Chrome", "Chromium", "Microsoft_Internet_Explorer"],
        ),
        group("mozilla", GroupKind::Product, &["Firefox", "Thunderbird"]),
        group(
            "availability",
            GroupKind::Vulnerability,
            &[
                "denial_of_service",
                "memory_corruption",
                "resource_exhaustion",
                "service_crash",
                "connection_flood",
                "cache_exhaustion",
            ],
        ),
        group(
            "overflow",
            GroupKind::Vulnerability,
            &["buffer_overflow", "heap_overflow", "stack_overflow", "integer_overflow", "format_string"],
        ),
        group(
            "injection",
            GroupKind::Vulnerability,
            &["sql_injection", "code_injection", "command_injection", "cross_site_scripting", "csrf"],
        ),
    ]
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/cyber");
    std::fs::create_dir_all(&root).expect("fixture directory");

    let graph = build_graph();
    let space = build_space();
    let (store, report) = VkgStore::link(graph, space).expect("link fixture store");
    let meta = StoreMeta {
        complexity: store.complexity(7),
        build: BuildEcho {
            mode: "cbow".into(),
            context_window: 7,
            dimension: 4,
            epochs: 0, // vectors are hand-placed, not trained
            negatives: 5,
            min_term_frequency: 1,
            learning_rate: 0.05,
            seed: 42,
        },
        corpus: CorpusStats { documents: corpus_documents().len(), latest_timestamp: 1_494_633_600 },
        links: LinkStats {
            linked: report.linked,
            unlinked: report.unlinked_entities.len(),
            orphan_tokens: report.orphan_tokens.len(),
        },
        loss_curve: vec![],
    };
    save_store(&store, &meta, &root.join("store")).expect("write store");

    write_corpus(&corpus_documents(), &root.join("corpus")).expect("write corpus");
    build_gazetteer().save(&root.join("gazetteer.json")).expect("write gazetteer");
    save_patterns(&vkg::ingest::synth::standard_patterns(), &root.join("patterns.json"))
        .expect("write patterns");
    save_rulebook(&default_rulebook(), &root.join("rules.json")).expect("write rules");
    save_groups(&fixture_groups(), &root.join("groups.json")).expect("write groups");

    let profile = SystemProfile {
        operating_system: Some(ProductEntry { name: "Ubuntu".into(), version: "16.04".into() }),
        products: vec![
            ProductEntry { name: "MySQL".into(), version: "5.7".into() },
            ProductEntry { name: "Thunderbird".into(), version: "52".into() },
        ],
        similar_product_alerts: true,
    };
    profile.save(&root.join("profile.json")).expect("write profile");

    let deps = "Firefox\tlibnss\nFirefox\tlibgtk\nFirefox\tlibxul\n\
Thunderbird\tlibnss\nThunderbird\tlibgtk\nThunderbird\tlibxul\nThunderbird\tlibical\n\
MySQL\tlibssl\nMySQL\tlibz\nPostgreSQL\tlibssl\nPostgreSQL\tlibz\nPostgreSQL\tlibxml2\n";
    std::fs::write(root.join("deps.tsv"), deps).expect("write deps");

    let mut sameas = KnowledgeGraph::new();
    for (local, external) in [
        ("Microsoft_Internet_Explorer", "dbp:Internet_Explorer"),
        ("execute_arbitrary_code", "dbp:Arbitrary_code_execution"),
        ("denial_of_service", "dbp:Denial-of-service_attack"),
    ] {
        sameas
            .assert_triple(Triple::with_iri_object(entity(local), terms::owl_same_as(), iri(external)))
            .expect("sameas link");
    }
    sameas
        .assert_triple(Triple::with_iri_object(
            iri("dbp:Internet_Explorer"),
            iri("dbp:producedBy"),
            iri("dbp:Microsoft"),
        ))
        .expect("sameas fact");
    std::fs::write(root.join("sameas.ttl"), sameas.to_turtle()).expect("write sameas");

    println!("fixture written to {}", root.display());
    println!("{}", report.render());
}
