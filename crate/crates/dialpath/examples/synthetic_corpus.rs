//! Generate a small synthetic benchmark and show what is planted: the
//! dialogue text, the gold reasoning paths and the hop histogram.
//!
//! ```bash
//! cargo run --example synthetic_corpus
//! ```

use dialpath::harness::{gen_synthetic_corpus, SyntheticCorpusConfig};
use std::collections::BTreeMap;

fn main() {
    let cfg = SyntheticCorpusConfig {
        n_train: 8,
        n_val: 2,
        seed: 7,
        ..SyntheticCorpusConfig::default()
    };
    let bench = gen_synthetic_corpus(&cfg).expect("valid config");

    let mut hops: BTreeMap<usize, usize> = BTreeMap::new();
    for g in bench.gold.values() {
        *hops.entry(g.hops).or_default() += 1;
    }
    println!(
        "generated {} train / {} val dialogues, hop histogram {:?}\n",
        bench.train.len(),
        bench.val.len(),
        hops
    );

    for dialogue in bench.train.dialogues.iter().take(3) {
        let gold = &bench.gold[&dialogue.id];
        println!("dialogue {} ({} hops, gold path {:?})", dialogue.id, gold.hops, gold.path);
        for turn in &dialogue.turns {
            let marker = if gold.path.contains(&turn.turn_index) {
                "*"
            } else {
                " "
            };
            println!("  {marker}{:>2} Q: {}", turn.turn_index, turn.question.join(" "));
            println!("   {marker}  A: {}", turn.answer.join(" "));
        }
        println!();
    }

    println!(
        "embedding table: {} tokens of dimension {}; {} visual grids of {} regions",
        bench.table.len(),
        bench.table.dim(),
        bench.grids.len(),
        bench.grids.values().next().map(|g| g.regions).unwrap_or(0)
    );
}
