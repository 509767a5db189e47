//! `vkg`: build, query, and analyze hybrid graph/vector stores.

mod commands;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "vkg",
    version,
    about = "Hybrid knowledge-graph / vector-embedding store",
    propagate_version = true
)]
struct Cli {
    /// Seed for every random choice (training init, sampling, walks).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for evaluation; 1 is the fully deterministic mode.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, merge, train, and link a store from a corpus directory.
    /// `rebuild` is an alias: refreshing a stale vector model is the same
    /// action pointed at the same output directory.
    #[command(visible_alias = "rebuild")]
    Build(commands::BuildArgs),
    /// Run a composite search/list/infer query against a store.
    Query(commands::QueryArgs),
    /// Generate factual and similar-product vulnerability alerts.
    Alert(commands::AlertArgs),
    /// Score retrieval models against similarity groups.
    Eval(commands::EvalArgs),
    /// Train embeddings from a corpus without building a store.
    Train(commands::TrainArgs),
    /// Train a relation classifier and propose new triples.
    Predict(commands::PredictArgs),
    /// Validate a store and describe an entity.
    Inspect(commands::InspectArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Build(args) => commands::build(args, cli.seed),
        Command::Query(args) => commands::query(args),
        Command::Alert(args) => commands::alert(args),
        Command::Eval(args) => commands::eval(args, cli.seed, cli.threads),
        Command::Train(args) => commands::train(args, cli.seed),
        Command::Predict(args) => commands::predict(args, cli.seed),
        Command::Inspect(args) => commands::inspect(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
