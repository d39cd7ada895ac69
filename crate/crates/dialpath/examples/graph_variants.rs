//! Compare graph constructions (compositional, global, fully-connected)
//! by training a path generator on each and reporting held-out exact
//! match. Uses a reduced corpus so the sweep finishes quickly; the
//! acceptance suite runs the full-size version.
//!
//! ```bash
//! cargo run --release --example graph_variants
//! ```

use dialpath::graph::GraphSemantics;
use dialpath::harness::{gen_synthetic_corpus, graph_variant_run, SyntheticCorpusConfig};
use dialpath::pathgen::{PathGenConfig, PathTrainConfig};

fn main() {
    let cfg = SyntheticCorpusConfig {
        n_train: 150,
        n_val: 50,
        seed: 7,
        ..SyntheticCorpusConfig::default()
    };
    let bench = gen_synthetic_corpus(&cfg).expect("valid config");
    let tcfg = PathTrainConfig {
        epochs: 10,
        seed: 7,
        target_val_exact: None,
        ..PathTrainConfig::default()
    };

    println!("semantics        val-exact  epochs");
    for semantics in [
        GraphSemantics::Compositional,
        GraphSemantics::Global,
        GraphSemantics::FullyConnected,
    ] {
        let (report, em) =
            graph_variant_run(&bench, semantics, PathGenConfig::default(), &tcfg)
                .expect("training completes");
        println!("{semantics:<16?} {em:>9.3}  {:>6}", report.epochs_run);
    }
}
