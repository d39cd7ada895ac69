//! Train the reasoning-path decoder on the default synthetic benchmark
//! and report held-out exact match for greedy and beam decoding.
//!
//! ```bash
//! cargo run --release --example train_path_generator
//! ```

use dialpath::graph::GraphConfig;
use dialpath::harness::{
    gen_synthetic_corpus, prepare_benchmark, train_benchmark_path_generator,
    SyntheticCorpusConfig,
};
use dialpath::pathgen::{exact_match, DecodeMode, PathGenConfig, PathTrainConfig};
use std::time::Instant;

fn main() {
    let cfg = SyntheticCorpusConfig::default();
    println!(
        "generating benchmark: {} train / {} val dialogues, seed {}",
        cfg.n_train, cfg.n_val, cfg.seed
    );
    let bench = gen_synthetic_corpus(&cfg).expect("valid default config");
    let prepared = prepare_benchmark(bench, GraphConfig::default(), cfg.seed);
    println!(
        "oracle recovered the planted path on {:.1}% of train dialogues",
        prepared.train_stats.recovery_rate() * 100.0
    );

    let tcfg = PathTrainConfig {
        target_val_exact: Some(0.95),
        ..PathTrainConfig::default()
    };
    let start = Instant::now();
    let (model, report) =
        train_benchmark_path_generator(&prepared, PathGenConfig::default(), &tcfg)
            .expect("training converges");
    let elapsed = start.elapsed();
    for (epoch, ((loss, em), tf)) in report
        .train_loss
        .iter()
        .zip(&report.val_exact)
        .zip(&report.val_teacher_forced)
        .enumerate()
    {
        println!(
            "epoch {:>2}: train loss {loss:.4}  val exact {em:.3}  teacher-forced {tf:.3}",
            epoch + 1
        );
    }
    println!(
        "trained {} epochs in {:.1}s, final val exact match {:.3}",
        report.epochs_run,
        elapsed.as_secs_f64(),
        report.final_val_exact()
    );

    let beam = exact_match(&model, &prepared.val_examples, DecodeMode::Beam(5))
        .expect("beam decoding");
    println!(
        "greedy {:.3} vs beam(5) {:.3} exact match (difference {:.3})",
        report.final_val_exact(),
        beam,
        (report.final_val_exact() - beam).abs()
    );
}
