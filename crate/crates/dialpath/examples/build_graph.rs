//! Build the semantic graph of the bundled golden dialogue at its final
//! turn, print the adjacency and edge provenance, and enumerate the
//! reasoning-path candidates.
//!
//! ```bash
//! cargo run --example build_graph
//! ```

use dialpath::dialogue::{context_at, load_corpus};
use dialpath::embeddings::EmbeddingTable;
use dialpath::graph::{build_graph, GraphConfig};
use dialpath::oracle::{enumerate_paths, select_ground_truth};
use dialpath::spans::{RuleSpanExtractor, SpanExtractor};
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = load_corpus(&root.join("fixtures/fig1.jsonl")).expect("bundled fixture");
    let table = EmbeddingTable::load(&root.join("fixtures/fig1_vectors.txt")).expect("vectors");
    let dialogue = &corpus.dialogues[0];
    let (ctx, cur) = context_at(dialogue, dialogue.len()).expect("final turn");

    let extractor = RuleSpanExtractor::default();
    let cfg = GraphConfig::default();
    let graph = build_graph(&ctx, &cur, &cfg, &extractor, &table);

    println!("nodes: {:?}", graph.nodes());
    println!("adjacency (row = from, col = to):");
    for (i, row) in graph.adjacency().iter().enumerate() {
        println!("  turn {} -> {:?}", i + 1, row);
    }
    println!("\nedge provenance:");
    for ((from, to), pairs) in &graph.edge_provenance {
        for (a, b) in pairs {
            println!("  {from} -> {to}: {:?} ~ {:?}", a.text(), b.text());
        }
    }

    let t = dialogue.len();
    let paths = enumerate_paths(&graph, t);
    println!("\npath candidates from turn {t}:");
    for p in &paths {
        println!("  {p}");
    }

    let answer_spans = extractor.extract_spans_of_tokens(&cur.answer, t);
    println!(
        "\nanswer spans: {:?}",
        answer_spans.iter().map(|s| s.text()).collect::<Vec<_>>()
    );
    let gt = select_ground_truth(&paths, &answer_spans, &graph, &table, cfg.tau, 7);
    println!(
        "ground-truth path: {} (coverage {} of {} candidates)",
        gt.path, gt.score, gt.candidates
    );

    println!("\nDOT export:\n{}", graph.to_dot());
}
