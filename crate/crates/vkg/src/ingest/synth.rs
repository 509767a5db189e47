//! Parameterized synthetic corpora: families of vulnerability-report
//! sentences with known ground-truth entities, relations, and similarity
//! groups.
//!
//! Products, vulnerabilities, and attacks come in groups. Members of a group
//! co-occur with group-specific context words in every sentence, so their
//! embeddings cluster; the *asserted* relations are deliberately sparse and
//! noisy (each product claims only a seeded subset of its group's
//! vulnerabilities, plus occasional off-group mentions), which keeps
//! structural graph matching from seeing the full group signal.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{GroupKind, SimilarityGroup};
use crate::kg::Iri;

use super::{Document, Emission, ExtractionPattern, Gazetteer, IngestError, Source, TriggerItem};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub product_groups: usize,
    pub products_per_group: usize,
    pub vuln_groups: usize,
    pub vulns_per_group: usize,
    pub attack_groups: usize,
    pub attacks_per_group: usize,
    pub attackers: usize,
    pub means: usize,
    pub docs_per_product: usize,
    pub docs_per_vuln: usize,
    pub docs_per_attack: usize,
    /// How many of its group's vulnerabilities one product asserts.
    pub vulns_asserted_per_product: usize,
    /// Chance that a product document also name-drops an off-group
    /// vulnerability (a spurious graph edge).
    pub cross_mention_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            product_groups: 4,
            products_per_group: 4,
            vuln_groups: 4,
            vulns_per_group: 4,
            attack_groups: 2,
            attacks_per_group: 3,
            attackers: 3,
            means: 3,
            docs_per_product: 10,
            docs_per_vuln: 4,
            docs_per_attack: 3,
            vulns_asserted_per_product: 2,
            cross_mention_prob: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub gazetteer: Gazetteer,
    pub patterns: Vec<ExtractionPattern>,
    pub groups: Vec<SimilarityGroup>,
}

impl SynthCorpus {
    /// Write corpus files plus gazetteer.json, patterns.json, groups.json.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir)?;
        super::write_corpus(&self.documents, &dir.join("corpus"))?;
        self.gazetteer.save(&dir.join("gazetteer.json"))?;
        super::save_patterns(&self.patterns, &dir.join("patterns.json"))?;
        crate::eval::save_groups(&self.groups, &dir.join("groups.json"))
            .map_err(|e| IngestError::MalformedManifest { reason: e.to_string() })?;
        Ok(())
    }
}

/// Extraction patterns matching the generated sentence shapes.
pub fn standard_patterns() -> Vec<ExtractionPattern> {
    let product = Iri::new("uco", "Product").expect("uco prefix");
    let vuln = Iri::new("uco", "Vulnerability").expect("uco prefix");
    let attacker = Iri::new("uco", "Attacker").expect("uco prefix");
    let means = Iri::new("uco", "Means").expect("uco prefix");
    let attack = Iri::new("uco", "Attack").expect("uco prefix");
    let rel = |local: &str| Iri::new("uco", local).expect("uco prefix");
    vec![
        ExtractionPattern::new(
            "product-vulnerability",
            vec![TriggerItem::Class(product.clone()), TriggerItem::Class(vuln.clone())],
            vec![
                Emission { subject_slot: 1, relation: rel("hasVulnerability"), object_slot: 2 },
                Emission { subject_slot: 2, relation: rel("affectsProduct"), object_slot: 1 },
            ],
        )
        .expect("pattern"),
        ExtractionPattern::new(
            "attacker-vulnerability",
            vec![TriggerItem::Class(attacker.clone()), TriggerItem::Class(vuln.clone())],
            vec![Emission { subject_slot: 2, relation: rel("hasAttacker"), object_slot: 1 }],
        )
        .expect("pattern"),
        ExtractionPattern::new(
            "vulnerability-means",
            vec![TriggerItem::Class(vuln), TriggerItem::Class(means)],
            vec![Emission { subject_slot: 1, relation: rel("hasMeans"), object_slot: 2 }],
        )
        .expect("pattern"),
        ExtractionPattern::new(
            "attacker-attack",
            vec![TriggerItem::Class(attacker), TriggerItem::Class(attack.clone())],
            vec![Emission { subject_slot: 2, relation: rel("hasAttacker"), object_slot: 1 }],
        )
        .expect("pattern"),
        ExtractionPattern::new(
            "attack-product",
            vec![TriggerItem::Class(attack), TriggerItem::Class(product)],
            vec![Emission { subject_slot: 2, relation: rel("isUnderAttack"), object_slot: 1 }],
        )
        .expect("pattern"),
    ]
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let product = Iri::new("uco", "Product").expect("uco prefix");
    let vuln_class = Iri::new("uco", "Vulnerability").expect("uco prefix");
    let attack_class = Iri::new("uco", "Attack").expect("uco prefix");
    let attacker_class = Iri::new("uco", "Attacker").expect("uco prefix");
    let means_class = Iri::new("uco", "Means").expect("uco prefix");

    // Entity names carry a shuffled serial so that lexicographic order does
    // not leak group membership into deterministic tie-breaks.
    let total_named = config.product_groups * config.products_per_group
        + config.vuln_groups * config.vulns_per_group
        + config.attack_groups * config.attacks_per_group;
    let mut serials: Vec<usize> = (0..total_named).collect();
    for i in (1..serials.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        serials.swap(i, j);
    }
    let mut next_serial = serials.into_iter();
    let mut name = |prefix: &str| format!("{prefix}_{:03}", next_serial.next().expect("serial"));

    let products: Vec<Vec<String>> = (0..config.product_groups)
        .map(|_| (0..config.products_per_group).map(|_| name("prod")).collect())
        .collect();
    let vulns: Vec<Vec<String>> = (0..config.vuln_groups)
        .map(|_| (0..config.vulns_per_group).map(|_| name("vuln")).collect())
        .collect();
    let attacks: Vec<Vec<String>> = (0..config.attack_groups)
        .map(|_| (0..config.attacks_per_group).map(|_| name("attack")).collect())
        .collect();
    let attackers: Vec<String> = (0..config.attackers).map(|a| format!("attacker{a}")).collect();
    let means: Vec<String> = (0..config.means).map(|m| format!("means{m}")).collect();

    let mut gazetteer = Gazetteer::new();
    for name in products.iter().flatten() {
        gazetteer.add(name, name, &product).expect("synthetic entity");
    }
    for name in vulns.iter().flatten() {
        gazetteer.add(name, name, &vuln_class).expect("synthetic entity");
    }
    for name in attacks.iter().flatten() {
        gazetteer.add(name, name, &attack_class).expect("synthetic entity");
    }
    for name in &attackers {
        gazetteer.add(name, name, &attacker_class).expect("synthetic entity");
    }
    for name in &means {
        gazetteer.add(name, name, &means_class).expect("synthetic entity");
    }

    let pflav = |g: usize, w: usize| format!("pflav{g}w{w}");
    let vflav = |h: usize, w: usize| format!("vflav{h}w{w}");
    let aflav = |t: usize, w: usize| format!("aflav{t}w{w}");
    let pick = |rng: &mut ChaCha8Rng, n: usize| (rng.next_u64() % n as u64) as usize;
    let chance = |rng: &mut ChaCha8Rng, p: f64| (rng.next_u64() as f64 / u64::MAX as f64) < p;

    let mut documents = Vec::new();
    let base_ts = 1_600_000_000u64;
    let push_doc = |documents: &mut Vec<Document>, id: String, text: String| {
        let timestamp = base_ts + documents.len() as u64;
        documents.push(Document { id, source: Source::Nvd, text, timestamp });
    };

    // Product documents: group-exclusive context words dominate every
    // sentence, a seeded subset of the group's vulnerabilities is asserted,
    // with an occasional off-group mention as graph noise.
    for (g, group_products) in products.iter().enumerate() {
        let h = g % config.vuln_groups;
        let pool = &vulns[h];
        for p in group_products {
            // This product's asserted slice of the pool.
            let offset = pick(&mut rng, pool.len());
            let mine: Vec<&String> = (0..config.vulns_asserted_per_product.min(pool.len()))
                .map(|i| &pool[(offset + i) % pool.len()])
                .collect();
            for d in 0..config.docs_per_product {
                let v = mine[d % mine.len()];
                let attacker = &attackers[pick(&mut rng, attackers.len())];
                let mean = &means[pick(&mut rng, means.len())];
                let f = |rng: &mut ChaCha8Rng| pflav(g, pick(rng, 6));
                let (f1, f2, f3, f4, f5) =
                    (f(&mut rng), f(&mut rng), f(&mut rng), f(&mut rng), f(&mut rng));
                let mut text = format!(
                    "{p} allows {attacker} to cause {v} via {mean}.\n\
                     {p} ships {f1} {f2} {f3} builds.\n\
                     {f4} {f5} teams tune {p} {f1} daily.\n"
                );
                if chance(&mut rng, config.cross_mention_prob) {
                    let oh = (h + 1 + pick(&mut rng, config.vuln_groups.saturating_sub(1).max(1)))
                        % config.vuln_groups;
                    let off = &vulns[oh][pick(&mut rng, vulns[oh].len())];
                    text.push_str(&format!("One advisory ties {p} to {off}.\n"));
                }
                push_doc(&mut documents, format!("p-{p}-{d:03}"), text);
            }
        }
    }

    // Vulnerability documents: group-exclusive context, no product.
    for (h, group_vulns) in vulns.iter().enumerate() {
        for v in group_vulns {
            for d in 0..config.docs_per_vuln {
                let f = |rng: &mut ChaCha8Rng| vflav(h, pick(rng, 6));
                let (f1, f2, f3, f4, f5) =
                    (f(&mut rng), f(&mut rng), f(&mut rng), f(&mut rng), f(&mut rng));
                let text = format!(
                    "patching {v} needs {f1} {f2} {f3} review.\n\
                     {v} incidents spike under {f4} {f5} {f1} load.\n"
                );
                push_doc(&mut documents, format!("v-{v}-{d:03}"), text);
            }
        }
    }

    // Attack documents: attacker plus attack-group context.
    for (t, group_attacks) in attacks.iter().enumerate() {
        for a in group_attacks {
            for d in 0..config.docs_per_attack {
                let attacker = &attackers[pick(&mut rng, attackers.len())];
                let g = pick(&mut rng, products.len());
                let p = &products[g][pick(&mut rng, products[g].len())];
                let f = |rng: &mut ChaCha8Rng| aflav(t, pick(rng, 6));
                let (f1, f2, f3) = (f(&mut rng), f(&mut rng), f(&mut rng));
                let text = format!(
                    "{attacker} used {a} against {p}.\n\
                     {a} relies on {f1} {f2} {f3} tradecraft.\n"
                );
                push_doc(&mut documents, format!("a-{a}-{d:03}"), text);
            }
        }
    }

    let mut groups = Vec::new();
    for (g, members) in products.iter().enumerate() {
        groups.push(SimilarityGroup {
            name: format!("products-{g}"),
            kind: GroupKind::Product,
            members: members.clone(),
        });
    }
    for (h, members) in vulns.iter().enumerate() {
        groups.push(SimilarityGroup {
            name: format!("vulnerabilities-{h}"),
            kind: GroupKind::Vulnerability,
            members: members.clone(),
        });
    }
    for (t, members) in attacks.iter().enumerate() {
        groups.push(SimilarityGroup {
            name: format!("attacks-{t}"),
            kind: GroupKind::Attack,
            members: members.clone(),
        });
    }

    SynthCorpus { documents, gazetteer, patterns: standard_patterns(), groups }
}
