//! Path strategy baselines on the golden dialogue: last-n, random and
//! oracle, next to the full candidate enumeration.
//!
//! ```bash
//! cargo run --example baselines
//! ```

use dialpath::dialogue::{context_at, load_corpus};
use dialpath::embeddings::EmbeddingTable;
use dialpath::graph::{build_graph, GraphConfig};
use dialpath::harness::{baseline_path, PathStrategy};
use dialpath::oracle::enumerate_paths;
use dialpath::spans::{RuleSpanExtractor, SpanExtractor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = load_corpus(&root.join("fixtures/fig1.jsonl")).expect("bundled fixture");
    let table = EmbeddingTable::load(&root.join("fixtures/fig1_vectors.txt")).expect("vectors");
    let dialogue = &corpus.dialogues[0];
    let t = dialogue.len();
    let (ctx, cur) = context_at(dialogue, t).expect("final turn");
    let extractor = RuleSpanExtractor::default();
    let graph = build_graph(&ctx, &cur, &GraphConfig::default(), &extractor, &table);
    let answer_spans = extractor.extract_spans_of_tokens(&cur.answer, t);

    println!("candidates:");
    for p in enumerate_paths(&graph, t) {
        println!("  {p}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (label, strategy) in [
        ("last_1", PathStrategy::LastN(1)),
        ("last_3", PathStrategy::LastN(3)),
        ("random", PathStrategy::Random),
        ("random", PathStrategy::Random),
        ("oracle", PathStrategy::Oracle),
    ] {
        let path = baseline_path(
            strategy,
            &graph,
            t,
            Some(&answer_spans),
            &table,
            0.6,
            &mut rng,
        );
        println!("{label:>7}: {path}");
    }
}
