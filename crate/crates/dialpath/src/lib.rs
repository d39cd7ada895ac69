//! Reasoning-path learning over compositional semantic graphs of dialogue
//! context.
//!
//! A dialogue is a sequence of question/answer turns grounded on a visual
//! feature grid. For the current turn, the library builds a turn-level
//! semantic graph from lexical-span overlap, derives oracle reasoning paths
//! by coverage of the expected answer, trains a transformer path decoder
//! whose output distribution is masked by the graph adjacency, and
//! propagates multimodal features along graph and path to a small answer
//! decoder. Everything runs at desk scale on synthetic corpora with a
//! self-contained f64 autodiff core.
//!
//! The pipeline, module by module:
//!
//! - [`dialogue`] — turns, corpora, tokenization, JSONL ingestion.
//! - [`spans`] — rule-based coreference resolution and lexical-span
//!   extraction behind a pluggable [`spans::SpanExtractor`] trait.
//! - [`embeddings`] — word-vector tables, span embedding, cosine
//!   similarity, the `is_similar` edge predicate.
//! - [`graph`] — semantic graph construction (compositional, global and
//!   fully-connected variants; bidirectional or temporally ordered edges).
//! - [`oracle`] — exhaustive path enumeration and ground-truth path
//!   selection by answer-span coverage.
//! - [`nn`] — dense-tensor reverse-mode autodiff, transformer blocks,
//!   masked softmax, Adam with warm-up, losses, checkpoints.
//! - [`pathgen`] — the trainable path decoder with adjacency-masked
//!   decoding, greedy and beam inference, supervised training.
//! - [`propagation`] — turn-conditioned visual attention, GCN message
//!   passing, path traversal encoding and the answer decoder.
//! - [`harness`] — synthetic corpus generation with planted paths,
//!   baseline path strategies, evaluation metrics and run logging.
//!
//! Runnable walkthroughs live under `examples/`; the `dialpath` binary is a
//! thin front-end over [`harness`].

pub mod dialogue;
pub mod embeddings;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod pathgen;
pub mod propagation;
pub mod spans;

pub use dialogue::{Corpus, Dialogue, DialogueContext, DialogueTurn, Vocabulary};
pub use embeddings::EmbeddingTable;
pub use graph::{GraphConfig, GraphDirection, GraphSemantics, SemanticGraph};
pub use oracle::ReasoningPath;
pub use spans::{LexicalSpan, RuleSpanExtractor, SpanExtractionConfig, SpanExtractor, SpanKind};
