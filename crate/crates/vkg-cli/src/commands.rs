use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Args;

use vkg::alert::{
    default_rulebook, factual_alerts, load_rulebook, similar_product_alerts, SystemProfile,
};
use vkg::eval::{evaluate_model_with_threads, latency_compare, load_groups, RetrievalModel};
use vkg::ingest::{load_corpus, preprocess_sentences, Gazetteer};
use vkg::kg::{normalize_token, terms, Iri};
use vkg::pipeline::{build_from_files, BuildOptions};
use vkg::query::{execute, parse_query, QueryOptions};
use vkg::relpred::{
    build_training_set, load_model, propose_triples, proposals_to_turtle,
    save_model, train_model_with, ModelConfig, RelationSet,
};
use vkg::store::{load_store, validate_store};
use vkg::train::{train as train_embeddings, TrainerConfig, TrainerMode};

use crate::report;

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn now_or(default_now: Option<u64>) -> u64 {
    default_now.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    })
}

#[derive(Args)]
pub struct TrainerArgs {
    /// Trainer mode: cbow, skipgram, or graph_augmented_cbow.
    #[arg(long, default_value = "cbow")]
    pub mode: String,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Context window (tokens on each side).
    #[arg(long, default_value_t = 7)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    /// Minimum term frequency for the vocabulary.
    #[arg(long = "min-count", default_value_t = 1)]
    pub min_count: u64,
    #[arg(long = "learning-rate", default_value_t = 0.05)]
    pub learning_rate: f64,
}

impl TrainerArgs {
    fn config(&self, seed: u64) -> Result<TrainerConfig, String> {
        let mode = TrainerMode::parse(&self.mode)
            .ok_or_else(|| format!("InvalidConfig: unknown trainer mode `{}`", self.mode))?;
        Ok(TrainerConfig {
            mode,
            context_window: self.window,
            dimension: self.dim,
            min_term_frequency: self.min_count,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
        })
    }
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub gazetteer: PathBuf,
    #[arg(long)]
    pub patterns: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Turtle file of owl:sameAs links plus external facts to merge.
    #[arg(long)]
    pub sameas: Option<PathBuf>,
    /// Tab-separated program/library dependency list.
    #[arg(long)]
    pub deps: Option<PathBuf>,
    #[arg(long = "walk-length", default_value_t = 4)]
    pub walk_length: usize,
    #[arg(long = "walks-per-entity", default_value_t = 10)]
    pub walks_per_entity: usize,
    #[command(flatten)]
    pub trainer: TrainerArgs,
}

pub fn build(args: BuildArgs, seed: u64) -> CmdResult {
    let options = BuildOptions {
        trainer: args.trainer.config(seed)?,
        walk_length: args.walk_length,
        walks_per_entity: args.walks_per_entity,
        same_as_file: args.sameas,
        dependencies_file: args.deps,
    };
    let out = build_from_files(&args.corpus, &args.gazetteer, &args.patterns, &options, Some(&args.out))?;
    print!("{}", out.link_report.render());
    let c = &out.meta.complexity;
    println!(
        "complexity: ({} x {} x {}) + ({} + {}) + {} = {}",
        c.context_window, c.dimension, c.hidden_size, c.class_count, c.relation_count, c.vocab_size, c.total
    );
    println!(
        "store written to {} ({} triples, {} tokens)",
        args.out.display(),
        out.store.graph().len(),
        out.store.space().vocab_size()
    );
    Ok(())
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Query text, e.g. "{search, 'denial_of_service', V} ; {list, vulnerability, 'MySQL', K} ; {infer, V, K, 'MySQL', alert}"
    #[arg(long = "q")]
    pub query: String,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Default k for search clauses.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Reference time (unix seconds) for rule freshness; defaults to now.
    #[arg(long)]
    pub now: Option<u64>,
    /// Write a machine-readable result file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn query(args: QueryArgs) -> CmdResult {
    let (store, _) = load_store(&args.store)?;
    let rulebook = match &args.rules {
        Some(path) => load_rulebook(path)?,
        None => default_rulebook(),
    };
    let ast = parse_query(&args.query)?;
    let options = QueryOptions { now: now_or(args.now), default_k: args.k };
    let result = execute(&store, &ast, &rulebook, &options)?;

    for binding in &result.bindings {
        let members: Vec<String> = binding.members.iter().map(|m| m.to_string()).collect();
        println!("{} = {{{}}}  ({} entities)", binding.name, members.join(", "), members.len());
    }
    for verdict in &result.verdicts {
        let witness: Vec<String> = verdict.witness.iter().map(|w| w.to_string()).collect();
        println!(
            "{}: {}  witness: {{{}}}",
            verdict.name,
            if verdict.value { "yes" } else { "no" },
            witness.join(", ")
        );
    }
    for trace in &result.trace {
        println!("# {} part served {} in {} us", trace.part.name(), trace.out, trace.micros);
    }
    if let Some(path) = &args.report {
        report::write_query_report(&result, path)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct AlertArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Neighborhood size for similar-product alerts.
    #[arg(long, default_value_t = 5)]
    pub similar: usize,
    /// Minimum similar-product score.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Reference time (unix seconds); defaults to now.
    #[arg(long)]
    pub now: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the alerts as Turtle annotation nodes.
    #[arg(long = "ttl-out")]
    pub ttl_out: Option<PathBuf>,
}

pub fn alert(args: AlertArgs) -> CmdResult {
    let (store, _) = load_store(&args.store)?;
    let profile = SystemProfile::load(&args.profile)?;
    let rulebook = match &args.rules {
        Some(path) => load_rulebook(path)?,
        None => default_rulebook(),
    };
    let now = now_or(args.now);
    let factual = factual_alerts(&store, &profile, &rulebook, now)?;
    let similar = similar_product_alerts(&store, &profile, &rulebook, args.similar, args.threshold, now)?;

    println!("factual alerts: {}", factual.len());
    for a in &factual {
        println!("  {} affected by {} (rule {}, score 1.0)", a.product, a.vulnerability, a.rule);
    }
    println!("similar-product alerts: {}", similar.alerts.len());
    for a in &similar.alerts {
        println!(
            "  {} may share {} with {} (score {:.4}, {} of {} dependencies shared)",
            a.product,
            a.vulnerability,
            a.evidence.neighbor.as_ref().map(|n| n.to_string()).unwrap_or_default(),
            a.score,
            a.evidence.shared_dependencies.unwrap_or(0),
            a.evidence.total_dependencies.unwrap_or(0),
        );
    }
    for d in &similar.diagnostics {
        eprintln!("note: {d}");
    }
    if let Some(path) = &args.report {
        report::write_alert_report(&factual, &similar.alerts, &similar.diagnostics, path)?;
    }
    if let Some(path) = &args.ttl_out {
        let mut all = factual.clone();
        all.extend(similar.alerts.iter().cloned());
        std::fs::write(path, vkg::alert::alerts_to_turtle(&all))?;
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "sweep")]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub groups: PathBuf,
    /// all, graph-matching, vector-only, or vkg-search.
    #[arg(long, default_value = "all")]
    pub model: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Also compare vector vs graph query latency.
    #[arg(long)]
    pub latency: bool,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Train and score one model per (dimension, frequency) combination
    /// instead of evaluating an existing store.
    #[arg(long, requires_all = ["corpus", "gazetteer", "patterns"])]
    pub sweep: bool,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// Sweep dimensions, comma-separated.
    #[arg(long, default_value = "16,32,64", value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// Sweep term-frequency cutoffs, comma-separated.
    #[arg(long, default_value = "1,2,5", value_delimiter = ',')]
    pub frequencies: Vec<u64>,
    #[command(flatten)]
    pub trainer: TrainerArgs,
}

fn parse_models(name: &str) -> Result<Vec<RetrievalModel>, String> {
    match name {
        "all" => Ok(vec![
            RetrievalModel::GraphMatching,
            RetrievalModel::VectorOnly,
            RetrievalModel::VkgSearch,
        ]),
        "graph-matching" | "graph" => Ok(vec![RetrievalModel::GraphMatching]),
        "vector-only" | "vector" => Ok(vec![RetrievalModel::VectorOnly]),
        "vkg-search" | "vkg" => Ok(vec![RetrievalModel::VkgSearch]),
        other => Err(format!("UnknownModel: `{other}`")),
    }
}

pub fn eval(args: EvalArgs, seed: u64, threads: usize) -> CmdResult {
    let groups = load_groups(&args.groups)?;
    if args.sweep {
        return sweep(&args, &groups, seed, threads);
    }
    let (store, _) = load_store(args.store.as_ref().expect("required unless sweep"))?;
    let mut reports = Vec::new();
    for model in parse_models(&args.model)? {
        let r = evaluate_model_with_threads(&store, &groups, model, args.k, threads)?;
        println!(
            "{:<14} map {:.4}  median latency {:.1} us over {} queries",
            r.model.name(),
            r.map,
            r.latency.median_micros,
            r.latency.queries
        );
        for (kind, map) in &r.map_by_kind {
            println!("    {kind:?}: {map:.4}");
        }
        reports.push(r);
    }
    let speedup = if args.latency {
        let s = latency_compare(&store, &groups, args.k, args.repetitions)?;
        println!(
            "latency: vector median {:.1} us, graph median {:.1} us, speedup {:.2}x",
            s.vector.median_micros, s.graph.median_micros, s.speedup
        );
        Some(s)
    } else {
        None
    };
    if let Some(path) = &args.report {
        report::write_eval_report(&reports, speedup.as_ref(), path)?;
    }
    Ok(())
}

/// The dimension-by-frequency sweep: build one store per combination and
/// record each model's MAP.
fn sweep(args: &EvalArgs, groups: &[vkg::eval::SimilarityGroup], seed: u64, threads: usize) -> CmdResult {
    let mut rows = Vec::new();
    for &dim in &args.dims {
        for &freq in &args.frequencies {
            let mut trainer = args.trainer.config(seed)?;
            trainer.dimension = dim;
            trainer.min_term_frequency = freq;
            let options = BuildOptions { trainer, ..BuildOptions::default() };
            let out = build_from_files(
                args.corpus.as_ref().expect("clap requires"),
                args.gazetteer.as_ref().expect("clap requires"),
                args.patterns.as_ref().expect("clap requires"),
                &options,
                None,
            )?;
            let mut row = report::SweepRow {
                dimension: dim,
                min_term_frequency: freq,
                map_graph: 0.0,
                map_vector: 0.0,
                map_vkg: 0.0,
            };
            for model in parse_models("all")? {
                let r = evaluate_model_with_threads(&out.store, groups, model, args.k, threads)?;
                match model {
                    RetrievalModel::GraphMatching => row.map_graph = r.map,
                    RetrievalModel::VectorOnly => row.map_vector = r.map,
                    RetrievalModel::VkgSearch => row.map_vkg = r.map,
                }
            }
            println!(
                "dim {:>4}  freq {:>2}  graph {:.4}  vector {:.4}  vkg {:.4}",
                row.dimension, row.min_term_frequency, row.map_graph, row.map_vector, row.map_vkg
            );
            rows.push(row);
        }
    }
    if let Some(path) = &args.report {
        report::write_sweep_report(&rows, path)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gazetteer used for phrase collapsing during preprocessing.
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// Output vectors file (word2vec text format).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub trainer: TrainerArgs,
}

pub fn train(args: TrainArgs, seed: u64) -> CmdResult {
    let config = args.trainer.config(seed)?;
    if config.mode == TrainerMode::GraphAugmentedCbow {
        return Err("InvalidConfig: graph_augmented_cbow needs a graph; use `vkg build`".into());
    }
    let documents = load_corpus(&args.corpus)?;
    let gazetteer = match &args.gazetteer {
        Some(path) => Gazetteer::load(path)?,
        None => Gazetteer::new(),
    };
    let stopwords = vkg::ingest::default_stopwords();
    let mut sentences = Vec::new();
    for doc in &documents {
        for sentence in preprocess_sentences(&doc.text, &gazetteer, &stopwords) {
            sentences.push(sentence.into_iter().map(|t| t.token).collect::<Vec<_>>());
        }
    }
    let snapshot = train_embeddings(&config, &sentences, None)?;
    vkg::vec::save_vectors(&snapshot.space, &args.out)?;
    println!(
        "trained {} tokens x {} dims over {} epochs; loss {:.4} -> {:.4}",
        snapshot.space.vocab_size(),
        snapshot.space.dimension(),
        config.epochs,
        snapshot.loss_curve.first().copied().unwrap_or(0.0),
        snapshot.loss_curve.last().copied().unwrap_or(0.0),
    );
    println!("vectors written to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Load a trained model instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "save-model")]
    pub save_model: Option<PathBuf>,
    /// Relation set, comma-separated (defaults to the store's uco/intel
    /// relations).
    #[arg(long, value_delimiter = ',')]
    pub relations: Vec<String>,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Candidate pairs file: `entity_a<TAB>entity_b` per line.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Propose over every linked, class-disjoint entity pair.
    #[arg(long = "all-pairs")]
    pub all_pairs: bool,
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// Write proposals as Turtle.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_relation_set(store: &vkg::store::VkgStore) -> Result<RelationSet, String> {
    let skip = [
        terms::rdf_type(),
        Iri::new("rdfs", "subClassOf").expect("rdfs"),
        terms::owl_same_as(),
        terms::has_vector(),
        terms::intel_timestamp(),
    ];
    let relations: Vec<Iri> = store
        .graph()
        .predicates()
        .into_iter()
        .filter(|p| (p.prefix() == "uco" || p.prefix() == "intel") && !skip.contains(p))
        .collect();
    RelationSet::new(relations).map_err(|e| e.to_string())
}

pub fn predict(args: PredictArgs, seed: u64) -> CmdResult {
    let (store, _) = load_store(&args.store)?;
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => {
            let relation_set = if args.relations.is_empty() {
                default_relation_set(&store)?
            } else {
                let relations: Result<Vec<Iri>, _> =
                    args.relations.iter().map(|r| Iri::parse(r)).collect();
                RelationSet::new(relations?)?
            };
            let ts = build_training_set(&store, &relation_set);
            println!(
                "training set: {} examples ({} skipped unlinked, {} shared-class, {} untyped)",
                ts.examples.len(),
                ts.report.skipped_unlinked,
                ts.report.skipped_shared_class,
                ts.report.skipped_untyped
            );
            let config = ModelConfig { epochs: args.epochs, hidden: args.hidden, seed, ..ModelConfig::default() };
            let model = train_model_with(&ts, &config)?;
            match model.meta.held_out_accuracy {
                Some(acc) => println!(
                    "held-out accuracy {:.4} on {} examples",
                    acc, model.meta.test_examples
                ),
                None => println!("training set too small for a held-out split"),
            }
            model
        }
    };
    if let Some(path) = &args.save_model {
        save_model(&model, path)?;
        println!("model written to {}", path.display());
    }

    let pairs: Vec<(Iri, Iri)> = if let Some(path) = &args.pairs {
        let text = std::fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .ok_or(format!("MalformedLine: line {}: expected `a<TAB>b`", i + 1))?;
            out.push((Iri::entity(a.trim())?, Iri::entity(b.trim())?));
        }
        out
    } else if args.all_pairs {
        let entities: Vec<Iri> = store.links().keys().cloned().collect();
        let mut out = Vec::new();
        for a in &entities {
            for b in &entities {
                if a != b {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    } else {
        Vec::new()
    };

    if !pairs.is_empty() {
        let report = propose_triples(&model, &store, &pairs, args.threshold)?;
        println!(
            "{} proposals ({} below threshold, {} already asserted, {} ineligible pairs)",
            report.proposals.len(),
            report.skipped_below_threshold,
            report.skipped_already_asserted,
            report.skipped_unlinked + report.skipped_shared_class,
        );
        for p in report.proposals.iter().take(20) {
            println!("  {}  (confidence {:.4})", p.triple, p.confidence);
        }
        if let Some(path) = &args.out {
            std::fs::write(path, proposals_to_turtle(&report.proposals))?;
            println!("proposals written to {}", path.display());
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Entity to describe (local name or prefixed form).
    #[arg(long)]
    pub entity: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub neighbors: usize,
}

pub fn inspect(args: InspectArgs) -> CmdResult {
    let (store, meta) = load_store(&args.store)?;
    validate_store(&store, &meta)?;
    println!(
        "store ok: {} triples, {} classes, {} entities, {} tokens x {} dims, {} links",
        store.graph().len(),
        store.graph().classes().len(),
        store.graph().entities().len(),
        store.space().vocab_size(),
        store.space().dimension(),
        store.links().len()
    );

    if let Some(name) = &args.entity {
        let wanted = normalize_token(name);
        let entity = store
            .graph()
            .entities()
            .into_iter()
            .find(|e| normalize_token(e.local()) == wanted)
            .ok_or(format!("UnknownEntity: `{name}` is not in the graph"))?;
        println!("\nentity {entity}");
        let classes: Vec<String> =
            store.graph().class_of(&entity).iter().map(|c| c.to_string()).collect();
        println!("classes: {}", if classes.is_empty() { "(untyped)".into() } else { classes.join(", ") });
        println!("triples:");
        let mut shown = BTreeSet::new();
        for t in store.graph().triples() {
            if (t.subject == entity || t.object.as_iri() == Some(&entity)) && shown.insert(t.clone())
            {
                println!("  {t}");
            }
        }
        match store.link_token(&entity) {
            Some(token) => {
                println!("link token: {token}");
                let ranked = store.vkg_search(&entity, args.neighbors, None)?;
                println!("nearest linked entities:");
                for (e, sim) in ranked {
                    println!("  {sim:.4}  {e}");
                }
            }
            None => println!("link token: (unlinked)"),
        }
    }
    Ok(())
}
