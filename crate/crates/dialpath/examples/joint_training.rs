//! Jointly train the path generator and the multimodal answer decoder,
//! then compare answer accuracy when the traversal stream is fed by
//! learned, oracle, fixed last-n and random paths.
//!
//! ```bash
//! cargo run --release --example joint_training
//! ```

use dialpath::graph::GraphConfig;
use dialpath::harness::{
    build_joint_examples, evaluate_strategy, gen_synthetic_corpus, prepare_benchmark,
    PathStrategy, SyntheticCorpusConfig,
};
use dialpath::pathgen::{PathGenConfig, PathGeneratorModel};
use dialpath::propagation::{train_joint, JointTrainConfig, PropagationConfig, PropagationModel};
use std::time::Instant;

fn main() {
    // optional overrides: joint_training [n_train] [epochs]
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let cfg = SyntheticCorpusConfig {
        n_train,
        ..SyntheticCorpusConfig::default()
    };
    let bench = gen_synthetic_corpus(&cfg).expect("valid default config");
    let prepared = prepare_benchmark(bench, GraphConfig::default(), cfg.seed);
    let train = build_joint_examples(
        &prepared.bench.train,
        &prepared.vocab,
        &prepared.bench.grids,
        prepared.train_examples.clone(),
    )
    .expect("grids cover the corpus");
    let val = build_joint_examples(
        &prepared.bench.val,
        &prepared.vocab,
        &prepared.bench.grids,
        prepared.val_examples.clone(),
    )
    .expect("grids cover the corpus");

    let path_model =
        PathGeneratorModel::new(prepared.vocab.len(), PathGenConfig::default(), 17);
    let prop_model =
        PropagationModel::new(prepared.vocab.len(), PropagationConfig::default(), 18);
    let jcfg = JointTrainConfig {
        epochs,
        ..JointTrainConfig::default()
    };
    println!(
        "joint training: {} train / {} val examples, {} epochs",
        train.len(),
        val.len(),
        jcfg.epochs
    );
    let start = Instant::now();
    let report = train_joint(
        &path_model,
        &prop_model,
        &train,
        &val,
        &prepared.bench.table,
        &jcfg,
    )
    .expect("training converges");
    for (epoch, (tl, vl)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        println!("epoch {:>2}: train loss {tl:.4}  val loss {vl:.4}", epoch + 1);
    }
    println!(
        "trained {} epochs in {:.0}s; best validation epoch {}",
        report.epochs_run,
        start.elapsed().as_secs_f64(),
        report.best_epoch
    );

    let strategies: Vec<(&str, Option<PathStrategy>)> = vec![
        ("oracle", Some(PathStrategy::Oracle)),
        ("learned", None),
        ("last_1", Some(PathStrategy::LastN(1))),
        ("random", Some(PathStrategy::Random)),
    ];
    println!("\nstrategy     answer-acc   path-EM   edge-F1   BLEU-4");
    for (name, strategy) in strategies {
        let outcome = evaluate_strategy(
            name,
            strategy.as_ref(),
            &path_model,
            &prop_model,
            &val,
            &prepared.bench.table,
            &prepared.vocab,
            &prepared.bench.gold,
            0.6,
            41,
        )
        .expect("evaluation succeeds");
        let per_hop: Vec<String> = outcome
            .report
            .per_hop
            .iter()
            .map(|(hops, b)| format!("{hops}h {:.2}", b.answer_token_accuracy))
            .collect();
        println!(
            "{:<12} {:>8.3}   {:>7.3}   {:>7.3}   {:>6.3}   [{}]",
            outcome.strategy,
            outcome.answer_accuracy,
            outcome.report.path_exact_match,
            outcome.report.edge_f1,
            outcome.report.bleu[3],
            per_hop.join(", ")
        );
    }
}
