//! Benchmark harness: synthetic corpora, the example-building pipeline,
//! baseline strategies, strategy comparison, evaluation metrics and run
//! logging. The `dialpath` binary is a thin front-end over this module.

pub mod baselines;
pub mod bleu;
pub mod eval;
pub mod synth;

pub use baselines::{baseline_path, PathStrategy};
pub use bleu::corpus_bleu;
pub use eval::{evaluate, EvalError, EvalReport, GoldRecord, HopBreakdown, PredictionRecord};
pub use synth::{gen_synthetic_corpus, PlantedGold, SynthError, SyntheticBenchmark, SyntheticCorpusConfig};

use crate::dialogue::{context_at, load_corpus, save_corpus, Corpus, DialogueError, Vocabulary};
use crate::embeddings::{EmbeddingError, EmbeddingTable};
use crate::graph::{build_configured, GraphConfig, GraphSemantics};
use crate::nn::checkpoint::ContainerError;
use crate::nn::NnError;
use crate::oracle::{enumerate_paths, tied_best, ReasoningPath};
use crate::pathgen::{
    exact_match, train_path_generator, DecodeMode, PathExample, PathGenConfig, PathGeneratorModel,
    PathTrainConfig, PathTrainReport,
};
use crate::propagation::{
    answer_accuracy_with_paths, load_grids, save_grids, JointExample, PropagationModel,
    VisualFeatureGrid,
};
use crate::spans::{RuleSpanExtractor, SpanExtractionConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut x = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 31;
    x.wrapping_mul(0x94D0_49BB_1331_11EB)
}

// ---------------------------------------------------------------------------
// Benchmark files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BenchmarkMeta {
    config: SyntheticCorpusConfig,
    attributes: Vec<String>,
    entities: Vec<String>,
}

/// Write a generated benchmark as a directory: `train.jsonl`, `val.jsonl`,
/// `vectors.txt`, `grids.dpvg`, `gold.jsonl`, `meta.json`.
pub fn write_benchmark(
    dir: &Path,
    bench: &SyntheticBenchmark,
    cfg: &SyntheticCorpusConfig,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    save_corpus(&bench.train, &dir.join("train.jsonl"))?;
    save_corpus(&bench.val, &dir.join("val.jsonl"))?;
    bench.table.save(&dir.join("vectors.txt"))?;
    let grids: Vec<VisualFeatureGrid> = bench.grids.values().cloned().collect();
    save_grids(&dir.join("grids.dpvg"), &grids)?;
    let gold_path = dir.join("gold.jsonl");
    let mut gold_lines = String::new();
    for g in bench.gold.values() {
        gold_lines.push_str(&serde_json::to_string(g).expect("serializable gold"));
        gold_lines.push('\n');
    }
    std::fs::write(&gold_path, gold_lines).map_err(io_err(&gold_path))?;
    let meta = BenchmarkMeta {
        config: cfg.clone(),
        attributes: bench.attributes.clone(),
        entities: bench.entities.clone(),
    };
    let meta_path = dir.join("meta.json");
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("serializable meta"),
    )
    .map_err(io_err(&meta_path))?;
    Ok(())
}

pub fn load_benchmark(dir: &Path) -> Result<SyntheticBenchmark, HarnessError> {
    let train = load_corpus(&dir.join("train.jsonl"))?;
    let val = load_corpus(&dir.join("val.jsonl"))?;
    let table = EmbeddingTable::load(&dir.join("vectors.txt"))?;
    let grids: BTreeMap<String, VisualFeatureGrid> = load_grids(&dir.join("grids.dpvg"))?
        .into_iter()
        .map(|g| (g.source_id.clone(), g))
        .collect();
    let gold_path = dir.join("gold.jsonl");
    let gold_text = std::fs::read_to_string(&gold_path).map_err(io_err(&gold_path))?;
    let mut gold = BTreeMap::new();
    for line in gold_text.lines().filter(|l| !l.trim().is_empty()) {
        let g: PlantedGold = serde_json::from_str(line)
            .map_err(|e| HarnessError::Invalid(format!("gold.jsonl: {e}")))?;
        gold.insert(g.dialogue_id.clone(), g);
    }
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: BenchmarkMeta = serde_json::from_str(&meta_text)
        .map_err(|e| HarnessError::Invalid(format!("meta.json: {e}")))?;
    Ok(SyntheticBenchmark {
        train,
        val,
        gold,
        grids,
        table,
        attributes: meta.attributes,
        entities: meta.entities,
    })
}

// ---------------------------------------------------------------------------
// Example-building pipeline
// ---------------------------------------------------------------------------

/// Span extractor whose adjective lexicon covers the generated attribute
/// words.
pub fn extractor_with_attributes(attributes: &[String]) -> RuleSpanExtractor {
    let mut cfg = SpanExtractionConfig::default();
    cfg.adjectives.extend(attributes.iter().cloned());
    RuleSpanExtractor::new(cfg)
}

pub fn benchmark_vocab(bench: &SyntheticBenchmark) -> Vocabulary {
    let mut tokens: Vec<&str> = Vec::new();
    for corpus in [&bench.train, &bench.val] {
        for d in &corpus.dialogues {
            for t in &d.turns {
                tokens.extend(t.question.iter().map(|s| s.as_str()));
                tokens.extend(t.answer.iter().map(|s| s.as_str()));
            }
        }
    }
    Vocabulary::build(tokens)
}

/// Oracle/planted agreement statistics from example building.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleStats {
    pub total: usize,
    pub planted_recovered: usize,
    pub mismatches: Vec<String>,
}

impl OracleStats {
    pub fn recovery_rate(&self) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        self.planted_recovered as f64 / self.total as f64
    }
}

/// Build path-decoder examples for every dialogue at its final turn:
/// construct the configured graph, enumerate candidates, select the oracle
/// path (canonical and tied set). When planted supervision is available it
/// is compared against the oracle for the self-consistency statistics.
pub fn build_path_examples(
    corpus: &Corpus,
    vocab: &Vocabulary,
    extractor: &RuleSpanExtractor,
    table: &EmbeddingTable,
    graph_cfg: &GraphConfig,
    seed: u64,
    planted: Option<&BTreeMap<String, PlantedGold>>,
) -> (Vec<PathExample>, OracleStats) {
    let mut examples = Vec::with_capacity(corpus.len());
    let mut stats = OracleStats::default();
    for (idx, dialogue) in corpus.dialogues.iter().enumerate() {
        let t = dialogue.len();
        let (ctx, cur) = context_at(dialogue, t).expect("final turn exists");
        let graph = build_configured(&ctx, &cur, graph_cfg, extractor, table);
        let answer_spans = extractor.extract_spans_of_tokens(&cur.answer, t);
        let paths = enumerate_paths(&graph, t);
        let (tied, _score) = tied_best(&paths, &answer_spans, &graph, table, graph_cfg.tau);
        let canon_seed = mix(seed, idx as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(canon_seed);
        let gold = tied[rng.gen_range(0..tied.len())].clone();

        if let Some(planted_map) = planted {
            stats.total += 1;
            let planted_path = &planted_map[&dialogue.id];
            if gold.turns == planted_path.path {
                stats.planted_recovered += 1;
            } else if stats.mismatches.len() < 10 {
                stats.mismatches.push(format!(
                    "{}: oracle {:?} vs planted {:?}",
                    dialogue.id, gold.turns, planted_path.path
                ));
            }
        }

        let context = ctx
            .turns
            .iter()
            .map(|turn| (turn.turn_index, vocab.encode(&turn.all_tokens())))
            .collect();
        examples.push(PathExample {
            dialogue_id: dialogue.id.clone(),
            turn: t,
            question_ids: vocab.encode(&cur.question),
            context,
            graph,
            gold,
            gold_tied: tied,
        });
    }
    (examples, stats)
}

/// One line of `dialpath oracle-paths` output.
#[derive(Debug, Clone, Serialize)]
pub struct OraclePathRecord {
    pub dialogue: String,
    pub turn: usize,
    pub path: Vec<usize>,
    pub score: usize,
    pub candidates: usize,
}

/// Build the graph for a dialogue's final turn and select its oracle path.
pub fn enumerate_and_select(
    dialogue: &crate::dialogue::Dialogue,
    extractor: &RuleSpanExtractor,
    table: &EmbeddingTable,
    tau: f64,
    seed: u64,
) -> Result<OraclePathRecord, HarnessError> {
    let t = dialogue.len();
    let (ctx, cur) = context_at(dialogue, t)?;
    let graph_cfg = GraphConfig {
        tau,
        ..GraphConfig::default()
    };
    let graph = build_configured(&ctx, &cur, &graph_cfg, extractor, table);
    let answer_spans = extractor.extract_spans_of_tokens(&cur.answer, t);
    let paths = enumerate_paths(&graph, t);
    let gt = crate::oracle::select_ground_truth(
        &paths,
        &answer_spans,
        &graph,
        table,
        tau,
        mix(seed, fxhash(&dialogue.id)),
    );
    Ok(OraclePathRecord {
        dialogue: dialogue.id.clone(),
        turn: t,
        path: gt.path.turns,
        score: gt.score,
        candidates: gt.candidates,
    })
}

fn fxhash(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Wrap path examples with answers and grids for joint training.
pub fn build_joint_examples(
    corpus: &Corpus,
    vocab: &Vocabulary,
    grids: &BTreeMap<String, VisualFeatureGrid>,
    path_examples: Vec<PathExample>,
) -> Result<Vec<JointExample>, HarnessError> {
    let mut out = Vec::with_capacity(path_examples.len());
    for ex in path_examples {
        let dialogue = corpus
            .get(&ex.dialogue_id)
            .ok_or_else(|| HarnessError::Invalid(format!("unknown dialogue {}", ex.dialogue_id)))?;
        let video_ref = dialogue
            .video_ref
            .as_ref()
            .ok_or_else(|| HarnessError::Invalid(format!("{} has no video_ref", ex.dialogue_id)))?;
        let grid = grids
            .get(video_ref)
            .ok_or_else(|| HarnessError::Invalid(format!("no grid for {video_ref}")))?
            .clone();
        let answer = &dialogue.turns[ex.turn - 1].answer;
        out.push(JointExample {
            answer_ids: vocab.encode(answer),
            grid,
            path: ex,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct StrategyOutcome {
    pub strategy: String,
    /// Teacher-forced answer-token accuracy with the strategy's paths fed
    /// into the traversal stream.
    pub answer_accuracy: f64,
    /// Full report (path metrics + generated-answer metrics).
    pub report: EvalReport,
}

pub fn strategy_name(s: &PathStrategy) -> String {
    match s {
        PathStrategy::LastN(n) => format!("last_{n}"),
        PathStrategy::Random => "random".into(),
        PathStrategy::Oracle => "oracle".into(),
    }
}

fn paths_for_strategy(
    strategy: Option<&PathStrategy>,
    path_model: &PathGeneratorModel,
    examples: &[JointExample],
    table: &EmbeddingTable,
    tau: f64,
    seed: u64,
    decode: DecodeMode,
) -> Result<Vec<ReasoningPath>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let path = match strategy {
            None => path_model.generate_path(&ex.path, decode)?.0,
            Some(PathStrategy::Oracle) => ex.path.gold.clone(),
            Some(s) => {
                let spans: Vec<crate::spans::LexicalSpan> = Vec::new();
                baseline_path(
                    *s,
                    &ex.path.graph,
                    ex.path.turn,
                    Some(&spans),
                    table,
                    tau,
                    &mut rng,
                )
            }
        };
        out.push(path);
    }
    Ok(out)
}

/// Evaluate one path source end to end: teacher-forced answer accuracy
/// plus the full metric report over generated answers.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_strategy(
    name: &str,
    strategy: Option<&PathStrategy>,
    path_model: &PathGeneratorModel,
    prop_model: &PropagationModel,
    examples: &[JointExample],
    table: &EmbeddingTable,
    vocab: &Vocabulary,
    gold: &BTreeMap<String, PlantedGold>,
    tau: f64,
    seed: u64,
) -> Result<StrategyOutcome, HarnessError> {
    let paths = paths_for_strategy(
        strategy,
        path_model,
        examples,
        table,
        tau,
        seed,
        DecodeMode::Greedy,
    )?;
    let answer_accuracy = answer_accuracy_with_paths(
        path_model,
        prop_model,
        examples,
        table,
        crate::propagation::PathSource::Gold,
        Some(&paths),
    )?;
    let mut predictions = Vec::with_capacity(examples.len());
    let mut gold_records = Vec::with_capacity(examples.len());
    for (ex, path) in examples.iter().zip(&paths) {
        let m_tilde = prop_model.propagate(&ex.path.graph, &ex.grid, table, &mut None)?;
        let g_tilde = prop_model.traverse_path(&m_tilde, &ex.path.graph, path, &mut None)?;
        let generated = prop_model.generate_answer(&ex.path.question_ids, &m_tilde, &g_tilde)?;
        predictions.push(PredictionRecord {
            dialogue_id: ex.path.dialogue_id.clone(),
            turn: ex.path.turn,
            path: path.clone(),
            answer_tokens: vocab.decode(&generated),
        });
        let planted = &gold[&ex.path.dialogue_id];
        gold_records.push(GoldRecord {
            dialogue_id: ex.path.dialogue_id.clone(),
            turn: ex.path.turn,
            path: ex.path.gold.clone(),
            answer_tokens: vocab.decode(&ex.answer_ids),
            hops: planted.hops,
        });
    }
    let report = evaluate(&predictions, &gold_records)?;
    Ok(StrategyOutcome {
        strategy: name.to_string(),
        answer_accuracy,
        report,
    })
}

// ---------------------------------------------------------------------------
// Benchmark drivers
// ---------------------------------------------------------------------------

/// Everything the training-based commands and tests need in one place.
pub struct PreparedBenchmark {
    pub bench: SyntheticBenchmark,
    pub vocab: Vocabulary,
    pub extractor: RuleSpanExtractor,
    pub graph_cfg: GraphConfig,
    pub train_examples: Vec<PathExample>,
    pub val_examples: Vec<PathExample>,
    pub train_stats: OracleStats,
    pub val_stats: OracleStats,
}

pub fn prepare_benchmark(
    bench: SyntheticBenchmark,
    graph_cfg: GraphConfig,
    seed: u64,
) -> PreparedBenchmark {
    let vocab = benchmark_vocab(&bench);
    let extractor = extractor_with_attributes(&bench.attributes);
    let (train_examples, train_stats) = build_path_examples(
        &bench.train,
        &vocab,
        &extractor,
        &bench.table,
        &graph_cfg,
        mix(seed, 101),
        Some(&bench.gold),
    );
    let (val_examples, val_stats) = build_path_examples(
        &bench.val,
        &vocab,
        &extractor,
        &bench.table,
        &graph_cfg,
        mix(seed, 202),
        Some(&bench.gold),
    );
    PreparedBenchmark {
        bench,
        vocab,
        extractor,
        graph_cfg,
        train_examples,
        val_examples,
        train_stats,
        val_stats,
    }
}

/// Train a fresh path generator on a prepared benchmark.
pub fn train_benchmark_path_generator(
    prepared: &PreparedBenchmark,
    pg_cfg: PathGenConfig,
    tcfg: &PathTrainConfig,
) -> Result<(PathGeneratorModel, PathTrainReport), HarnessError> {
    let model = PathGeneratorModel::new(prepared.vocab.len(), pg_cfg, mix(tcfg.seed, 7));
    let report = train_path_generator(
        &model,
        &prepared.train_examples,
        &prepared.val_examples,
        tcfg,
    )?;
    Ok((model, report))
}

/// One graph-variant ablation row: train a path generator on graphs of the
/// given semantics and report held-out exact match.
pub fn graph_variant_run(
    bench: &SyntheticBenchmark,
    semantics: GraphSemantics,
    pg_cfg: PathGenConfig,
    tcfg: &PathTrainConfig,
) -> Result<(PathTrainReport, f64), HarnessError> {
    let graph_cfg = GraphConfig {
        semantics,
        ..GraphConfig::default()
    };
    let bench_copy = SyntheticBenchmark {
        train: bench.train.clone(),
        val: bench.val.clone(),
        gold: bench.gold.clone(),
        grids: bench.grids.clone(),
        table: bench.table.clone(),
        attributes: bench.attributes.clone(),
        entities: bench.entities.clone(),
    };
    let prepared = prepare_benchmark(bench_copy, graph_cfg, tcfg.seed);
    let (model, report) = train_benchmark_path_generator(&prepared, pg_cfg, tcfg)?;
    let em = exact_match(&model, &prepared.val_examples, DecodeMode::Greedy)?;
    Ok((report, em))
}

// ---------------------------------------------------------------------------
// Run logging and flat config files
// ---------------------------------------------------------------------------

pub const SEED_ENV_VAR: &str = "DIALPATH_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Write `run_log.json` into the output directory so a run can be
/// replayed bit-for-bit from its recorded config and seed.
pub fn write_run_log(dir: &Path, log: &RunLog) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("run_log.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(log).expect("serializable run log"),
    )
    .map_err(io_err(&path))?;
    Ok(path)
}

/// Flat `key = value` config files; `#` starts a comment.
pub fn parse_flat_config(text: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            out.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    out
}

/// Seed precedence: CLI flag, then `DIALPATH_SEED`, then the config file,
/// then the default.
pub fn resolve_seed(cli: Option<u64>, file_cfg: Option<u64>, default: u64) -> u64 {
    if let Some(s) = cli {
        return s;
    }
    if let Ok(env) = std::env::var(SEED_ENV_VAR) {
        if let Ok(s) = env.parse::<u64>() {
            return s;
        }
    }
    file_cfg.unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_bench() -> SyntheticBenchmark {
        let cfg = SyntheticCorpusConfig {
            n_train: 40,
            n_val: 12,
            ..SyntheticCorpusConfig::default()
        };
        gen_synthetic_corpus(&cfg).unwrap()
    }

    #[test]
    fn benchmark_roundtrip_and_determinism() {
        let cfg = SyntheticCorpusConfig {
            n_train: 10,
            n_val: 4,
            ..SyntheticCorpusConfig::default()
        };
        let bench = gen_synthetic_corpus(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let d1 = dir.path().join("one");
        let d2 = dir.path().join("two");
        write_benchmark(&d1, &bench, &cfg).unwrap();
        write_benchmark(&d2, &bench, &cfg).unwrap();
        for file in ["train.jsonl", "val.jsonl", "vectors.txt", "grids.dpvg", "gold.jsonl", "meta.json"] {
            let a = std::fs::read(d1.join(file)).unwrap();
            let b = std::fs::read(d2.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical writes");
        }
        let loaded = load_benchmark(&d1).unwrap();
        assert_eq!(loaded.train, bench.train);
        assert_eq!(loaded.val, bench.val);
        assert_eq!(loaded.grids, bench.grids);
        assert_eq!(loaded.gold.len(), bench.gold.len());
    }

    #[test]
    fn oracle_recovers_planted_paths() {
        let bench = small_bench();
        let prepared = prepare_benchmark(bench, GraphConfig::default(), 7);
        let rate = prepared.train_stats.recovery_rate();
        assert!(
            rate >= 0.98,
            "planted-path recovery {rate}: {:?}",
            prepared.train_stats.mismatches
        );
        assert!(prepared.val_stats.recovery_rate() >= 0.98);
        // every supervision path is graph-valid
        for ex in prepared.train_examples.iter().chain(&prepared.val_examples) {
            assert!(ex.gold.is_valid_in(&ex.graph));
        }
    }

    #[test]
    fn flat_config_and_seed_resolution() {
        let cfg = parse_flat_config("a = 1\n# comment\nseed = 42\nname= x y # tail\n\n");
        assert_eq!(cfg["a"], "1");
        assert_eq!(cfg["seed"], "42");
        assert_eq!(cfg["name"], "x y");
        assert_eq!(resolve_seed(Some(5), Some(9), 7), 5);
        assert_eq!(resolve_seed(None, Some(9), 7), 9);
        assert_eq!(resolve_seed(None, None, 7), 7);
    }

    #[test]
    fn strategy_paths_shapes() {
        let bench = small_bench();
        let prepared = prepare_benchmark(bench, GraphConfig::default(), 7);
        let pg_cfg = PathGenConfig {
            d: 16,
            heads: 2,
            dropout: 0.0,
            ..PathGenConfig::default()
        };
        let model = PathGeneratorModel::new(prepared.vocab.len(), pg_cfg, 1);
        let joint = build_joint_examples(
            &prepared.bench.val,
            &prepared.vocab,
            &prepared.bench.grids,
            prepared.val_examples.clone(),
        )
        .unwrap();
        for strategy in [None, Some(PathStrategy::Random), Some(PathStrategy::LastN(1)), Some(PathStrategy::Oracle)] {
            let paths = paths_for_strategy(
                strategy.as_ref(),
                &model,
                &joint,
                &prepared.bench.table,
                0.6,
                3,
                DecodeMode::Greedy,
            )
            .unwrap();
            assert_eq!(paths.len(), joint.len());
            for (ex, p) in joint.iter().zip(&paths) {
                assert_eq!(p.current_turn(), ex.path.turn);
                if !matches!(strategy, Some(PathStrategy::LastN(_))) {
                    assert!(p.is_valid_in(&ex.path.graph));
                }
            }
        }
    }
}
