//! Tool discovery: embed a documentation corpus, retrieve the closest tools
//! for a free-text query, and materialize them on a live MCP server.
//!
//! The recall harness scores documentation strategies against a benchmark
//! of paraphrased queries.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod index;
pub mod recall;
pub mod server;

pub use corpus::{load_benchmark, load_corpus, BenchmarkCase, ToolDocument};
pub use embed::{cosine, Embedder, EmbeddingVector, TrigramEmbedder};
pub use error::DiscoveryError;
pub use index::{build_index, retrieve, DocStrategy, VectorIndex};
pub use recall::{evaluate_recall, RecallReport};
pub use server::{DiscoveryServer, MATERIALIZED_PREFIX};
