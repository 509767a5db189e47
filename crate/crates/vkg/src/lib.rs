//! Hybrid knowledge representation: a triple store and a vector-embedding
//! space over the same entities, linked by `vkg:hasVector` relations.
//!
//! The crate covers the full pipeline: corpus ingestion and entity/relation
//! extraction ([`ingest`]), embedding training from text or graph walks
//! ([`train`]), graph/vector linking and graph-filtered similarity search
//! ([`store`]), composite `search`/`list`/`infer` queries ([`query`]),
//! rule-driven vulnerability alerting ([`alert`]), relation prediction from
//! entity vectors ([`relpred`]), and retrieval evaluation ([`eval`]).

pub mod alert;
pub mod eval;
pub mod ingest;
pub mod kg;
pub mod numeric;
pub mod pipeline;
pub mod query;
pub mod relpred;
pub mod store;
pub mod train;
pub mod vec;

pub use kg::{Iri, KnowledgeGraph, Object, Triple};
pub use store::VkgStore;
pub use vec::VectorSpace;
