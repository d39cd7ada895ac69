//! Thin command-line front-end over the `dialpath` library: synthetic
//! corpus generation, graph inspection, oracle paths, training, decoding
//! and evaluation. Every run that writes a directory also writes a
//! `run_log.json` capturing the resolved config and seed; replaying a
//! command from that log reproduces its outputs byte for byte.

use clap::{Parser, Subcommand, ValueEnum};
use dialpath::dialogue::{context_at, load_corpus, Corpus};
use dialpath::embeddings::EmbeddingTable;
use dialpath::graph::{build_configured, GraphConfig, GraphDirection, GraphSemantics};
use dialpath::harness::{
    build_joint_examples, enumerate_and_select, evaluate_strategy, extractor_with_attributes,
    gen_synthetic_corpus, load_benchmark, parse_flat_config, prepare_benchmark, resolve_seed,
    strategy_name, train_benchmark_path_generator, write_benchmark, write_run_log, HarnessError,
    PathStrategy, RunLog, SyntheticCorpusConfig,
};
use dialpath::pathgen::{DecodeMode, PathGenConfig, PathGeneratorModel, PathTrainConfig};
use dialpath::propagation::{train_joint, JointTrainConfig, PropagationConfig, PropagationModel};
use dialpath::spans::{RuleSpanExtractor, SpanExtractionConfig};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dialpath", version, about = "Reasoning paths over semantic dialogue graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark directory with planted paths.
    GenCorpus(GenCorpusArgs),
    /// Build and print the semantic graph of one dialogue turn.
    BuildGraph(BuildGraphArgs),
    /// Derive oracle reasoning paths for every dialogue (JSONL).
    OraclePaths(OraclePathsArgs),
    /// Train the path generator on a benchmark directory.
    TrainPaths(TrainPathsArgs),
    /// Jointly train the path generator and the answer decoder.
    TrainJoint(TrainJointArgs),
    /// Decode reasoning paths with a trained model (JSONL with per-step
    /// probabilities).
    DecodePath(DecodePathArgs),
    /// Evaluate a path strategy end to end on the validation split.
    Evaluate(EvaluateArgs),
    /// Summarize a benchmark directory or one dialogue.
    Inspect(InspectArgs),
}

#[derive(clap::Args)]
struct GenCorpusArgs {
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    /// RNG seed (DIALPATH_SEED applies when the flag is absent).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training dialogues.
    #[arg(short, long)]
    n: Option<usize>,
    /// Number of validation dialogues.
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    turns_min: Option<usize>,
    #[arg(long)]
    turns_max: Option<usize>,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    attributes: Option<usize>,
    /// Hop distribution as `p1,p2,p3`.
    #[arg(long)]
    hops: Option<String>,
    #[arg(long)]
    distractor_rate: Option<f64>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    grid_regions: Option<usize>,
    /// Word-vector / visual-token dimension.
    #[arg(long)]
    dw: Option<usize>,
    /// Flat key=value config file; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Compositional,
    Global,
    FullyConnected,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Bidirect,
    Todirect,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Dot,
}

#[derive(clap::Args)]
struct BuildGraphArgs {
    /// Benchmark directory (alternative to --file/--embeddings).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Raw JSONL corpus file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Word-vector file for --file mode.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    dialogue: String,
    /// 1-based turn; defaults to the final turn.
    #[arg(long)]
    turn: Option<usize>,
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    #[arg(long, value_enum, default_value_t = SemanticsArg::Compositional)]
    semantics: SemanticsArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::Bidirect)]
    direction: DirectionArg,
    /// Debug: store TODirect edges in the literal forward orientation.
    #[arg(long)]
    todirect_forward: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Optional lexicon overrides, one token per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    pronouns: Option<PathBuf>,
    #[arg(long)]
    verbs: Option<PathBuf>,
    #[arg(long)]
    adjectives: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OraclePathsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL file (stdout when absent).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainPathsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint output path.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Early-stop target for validation exact match.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainJointArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for both checkpoints and the report.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DecodePathArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Decode one dialogue (all validation dialogues when absent).
    #[arg(long)]
    dialogue: Option<String>,
    /// 1-based turn; defaults to the final turn.
    #[arg(long)]
    turn: Option<usize>,
    /// Beam width (greedy when absent).
    #[arg(long)]
    beam: Option<usize>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory produced by train-joint (path.dpck + prop.dpck).
    #[arg(long)]
    joint: PathBuf,
    /// learned | oracle | random | last_N
    #[arg(long, default_value = "learned")]
    strategy: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct InspectArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    dialogue: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCorpus(args) => gen_corpus(args),
        Command::BuildGraph(args) => build_graph_cmd(args),
        Command::OraclePaths(args) => oracle_paths(args),
        Command::TrainPaths(args) => train_paths(args),
        Command::TrainJoint(args) => train_joint_cmd(args),
        Command::DecodePath(args) => decode_path(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Inspect(args) => inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, HarnessError> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| HarnessError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(parse_flat_config(&text))
        }
    }
}

fn cfg_get<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Option<T> {
    cfg.get(key).and_then(|v| v.parse().ok())
}

fn argv() -> Vec<String> {
    std::env::args().collect()
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn gen_corpus(args: GenCorpusArgs) -> Result<(), HarnessError> {
    let file_cfg = read_config(&args.config)?;
    let defaults = SyntheticCorpusConfig::default();
    let seed = resolve_seed(args.seed, cfg_get(&file_cfg, "seed"), defaults.seed);
    let hops = match args.hops.as_deref().or(file_cfg.get("hops").map(|s| s.as_str())) {
        None => defaults.hop_distribution,
        Some(spec) => {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| HarnessError::Invalid(format!("bad hop distribution {spec:?}")))?;
            if parts.len() != 3 {
                return Err(HarnessError::Invalid(
                    "hop distribution needs exactly three probabilities".into(),
                ));
            }
            [parts[0], parts[1], parts[2]]
        }
    };
    let cfg = SyntheticCorpusConfig {
        n_train: args.n.or(cfg_get(&file_cfg, "n")).unwrap_or(defaults.n_train),
        n_val: args.val.or(cfg_get(&file_cfg, "val")).unwrap_or(defaults.n_val),
        turns_min: args
            .turns_min
            .or(cfg_get(&file_cfg, "turns_min"))
            .unwrap_or(defaults.turns_min),
        turns_max: args
            .turns_max
            .or(cfg_get(&file_cfg, "turns_max"))
            .unwrap_or(defaults.turns_max),
        entity_pool: args
            .entities
            .or(cfg_get(&file_cfg, "entities"))
            .unwrap_or(defaults.entity_pool),
        attribute_pool: args
            .attributes
            .or(cfg_get(&file_cfg, "attributes"))
            .unwrap_or(defaults.attribute_pool),
        hop_distribution: hops,
        distractor_rate: args
            .distractor_rate
            .or(cfg_get(&file_cfg, "distractor_rate"))
            .unwrap_or(defaults.distractor_rate),
        vocab_size: args
            .vocab_size
            .or(cfg_get(&file_cfg, "vocab_size"))
            .unwrap_or(defaults.vocab_size),
        grid_regions: args
            .grid_regions
            .or(cfg_get(&file_cfg, "grid_regions"))
            .unwrap_or(defaults.grid_regions),
        d_w: args.dw.or(cfg_get(&file_cfg, "dw")).unwrap_or(defaults.d_w),
        seed,
    };
    let bench = gen_synthetic_corpus(&cfg)?;
    write_benchmark(&args.out, &bench, &cfg)?;
    write_run_log(
        &args.out,
        &RunLog {
            command: "gen-corpus".into(),
            argv: argv(),
            seed,
            config: serde_json::to_value(&cfg).expect("serializable config"),
        },
    )?;
    println!(
        "wrote {} train / {} val dialogues to {}",
        bench.train.len(),
        bench.val.len(),
        args.out.display()
    );
    Ok(())
}

struct CorpusBundle {
    corpus: Corpus,
    table: EmbeddingTable,
    extractor: RuleSpanExtractor,
}

fn load_corpus_bundle(args: &BuildGraphArgs) -> Result<CorpusBundle, HarnessError> {
    if let Some(dir) = &args.corpus {
        let bench = load_benchmark(dir)?;
        let extractor = extractor_with_attributes(&bench.attributes);
        let mut all = bench.train;
        all.dialogues.extend(bench.val.dialogues);
        return Ok(CorpusBundle {
            corpus: all,
            table: bench.table,
            extractor,
        });
    }
    let (Some(file), Some(vectors)) = (&args.file, &args.embeddings) else {
        return Err(HarnessError::Invalid(
            "provide --corpus DIR or both --file and --embeddings".into(),
        ));
    };
    let corpus = load_corpus(file)?;
    let table = EmbeddingTable::load(vectors)?;
    let mut lexicons = SpanExtractionConfig::default();
    let load_lexicon = |p: &PathBuf| {
        SpanExtractionConfig::load_lexicon(p).map_err(|source| HarnessError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    if let Some(p) = &args.stopwords {
        lexicons.stopwords = load_lexicon(p)?;
    }
    if let Some(p) = &args.pronouns {
        lexicons.pronouns = load_lexicon(p)?;
    }
    if let Some(p) = &args.verbs {
        lexicons.verbs = load_lexicon(p)?;
    }
    if let Some(p) = &args.adjectives {
        lexicons.adjectives = load_lexicon(p)?;
    }
    Ok(CorpusBundle {
        corpus,
        table,
        extractor: RuleSpanExtractor::new(lexicons),
    })
}

fn build_graph_cmd(args: BuildGraphArgs) -> Result<(), HarnessError> {
    let bundle = load_corpus_bundle(&args)?;
    let dialogue = bundle
        .corpus
        .get(&args.dialogue)
        .ok_or_else(|| HarnessError::Invalid(format!("unknown dialogue {:?}", args.dialogue)))?;
    let t = args.turn.unwrap_or_else(|| dialogue.len());
    let (ctx, cur) = context_at(dialogue, t)?;
    let graph_cfg = GraphConfig {
        semantics: match args.semantics {
            SemanticsArg::Compositional => GraphSemantics::Compositional,
            SemanticsArg::Global => GraphSemantics::Global,
            SemanticsArg::FullyConnected => GraphSemantics::FullyConnected,
        },
        direction: match args.direction {
            DirectionArg::Bidirect => GraphDirection::BiDirect,
            DirectionArg::Todirect => GraphDirection::TODirect,
        },
        tau: args.tau,
        todirect_forward: args.todirect_forward,
    };
    let graph = build_configured(&ctx, &cur, &graph_cfg, &bundle.extractor, &bundle.table);
    match args.format {
        FormatArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&graph.to_json()).expect("serializable graph")
        ),
        FormatArg::Dot => print!("{}", graph.to_dot()),
    }
    Ok(())
}

fn oracle_paths(args: OraclePathsArgs) -> Result<(), HarnessError> {
    let bench = load_benchmark(&args.corpus)?;
    let seed = resolve_seed(args.seed, None, 7);
    let extractor = extractor_with_attributes(&bench.attributes);
    let mut lines = String::new();
    for corpus in [&bench.train, &bench.val] {
        for dialogue in &corpus.dialogues {
            let record = enumerate_and_select(dialogue, &extractor, &bench.table, args.tau, seed)?;
            lines.push_str(&serde_json::to_string(&record).expect("serializable record"));
            lines.push('\n');
        }
    }
    match &args.out {
        Some(path) => write_text(path, &lines)?,
        None => print!("{lines}"),
    }
    Ok(())
}

fn train_paths(args: TrainPathsArgs) -> Result<(), HarnessError> {
    let file_cfg = read_config(&args.config)?;
    let defaults = PathTrainConfig::default();
    let seed = resolve_seed(args.seed, cfg_get(&file_cfg, "seed"), defaults.seed);
    let tcfg = PathTrainConfig {
        epochs: args
            .epochs
            .or(cfg_get(&file_cfg, "epochs"))
            .unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(cfg_get(&file_cfg, "batch_size"))
            .unwrap_or(defaults.batch_size),
        base_lr: args.lr.or(cfg_get(&file_cfg, "lr")).unwrap_or(defaults.base_lr),
        warmup_epochs: args
            .warmup_epochs
            .or(cfg_get(&file_cfg, "warmup_epochs"))
            .unwrap_or(defaults.warmup_epochs),
        seed,
        target_val_exact: args.target.or(cfg_get(&file_cfg, "target")),
    };
    let bench = load_benchmark(&args.corpus)?;
    let prepared = prepare_benchmark(bench, GraphConfig::default(), seed);
    let (model, report) =
        train_benchmark_path_generator(&prepared, PathGenConfig::default(), &tcfg)?;
    model.save(&args.out)?;
    let report_json = serde_json::to_string_pretty(&report).expect("serializable report");
    write_text(&args.out.with_extension("report.json"), &report_json)?;
    if let Some(dir) = args.out.parent() {
        write_run_log(
            dir,
            &RunLog {
                command: "train-paths".into(),
                argv: argv(),
                seed,
                config: serde_json::to_value(&tcfg).expect("serializable config"),
            },
        )?;
    }
    println!("{report_json}");
    Ok(())
}

fn train_joint_cmd(args: TrainJointArgs) -> Result<(), HarnessError> {
    let file_cfg = read_config(&args.config)?;
    let defaults = JointTrainConfig::default();
    let seed = resolve_seed(args.seed, cfg_get(&file_cfg, "seed"), defaults.seed);
    let jcfg = JointTrainConfig {
        epochs: args
            .epochs
            .or(cfg_get(&file_cfg, "epochs"))
            .unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(cfg_get(&file_cfg, "batch_size"))
            .unwrap_or(defaults.batch_size),
        base_lr: args.lr.or(cfg_get(&file_cfg, "lr")).unwrap_or(defaults.base_lr),
        warmup_epochs: args
            .warmup_epochs
            .or(cfg_get(&file_cfg, "warmup_epochs"))
            .unwrap_or(defaults.warmup_epochs),
        seed,
    };
    let bench = load_benchmark(&args.corpus)?;
    let prepared = prepare_benchmark(bench, GraphConfig::default(), seed);
    let train = build_joint_examples(
        &prepared.bench.train,
        &prepared.vocab,
        &prepared.bench.grids,
        prepared.train_examples.clone(),
    )?;
    let val = build_joint_examples(
        &prepared.bench.val,
        &prepared.vocab,
        &prepared.bench.grids,
        prepared.val_examples.clone(),
    )?;
    let path_model = PathGeneratorModel::new(
        prepared.vocab.len(),
        PathGenConfig::default(),
        seed.wrapping_add(1),
    );
    let prop_model = PropagationModel::new(
        prepared.vocab.len(),
        PropagationConfig::default(),
        seed.wrapping_add(2),
    );
    let report = train_joint(
        &path_model,
        &prop_model,
        &train,
        &val,
        &prepared.bench.table,
        &jcfg,
    )?;
    std::fs::create_dir_all(&args.out).map_err(|source| HarnessError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    path_model.save(&args.out.join("path.dpck"))?;
    prop_model.save(&args.out.join("prop.dpck"))?;
    let report_json = serde_json::to_string_pretty(&report).expect("serializable report");
    write_text(&args.out.join("report.json"), &report_json)?;
    write_run_log(
        &args.out,
        &RunLog {
            command: "train-joint".into(),
            argv: argv(),
            seed,
            config: serde_json::to_value(&jcfg).expect("serializable config"),
        },
    )?;
    println!("{report_json}");
    Ok(())
}

fn decode_path(args: DecodePathArgs) -> Result<(), HarnessError> {
    let bench = load_benchmark(&args.corpus)?;
    let model = PathGeneratorModel::load(&args.model)?;
    let prepared = prepare_benchmark(bench, GraphConfig::default(), 7);
    if prepared.vocab.len() != model.vocab_size() {
        return Err(HarnessError::Invalid(format!(
            "model vocabulary {} does not match corpus vocabulary {}",
            model.vocab_size(),
            prepared.vocab.len()
        )));
    }
    let mode = match args.beam {
        Some(k) => DecodeMode::Beam(k),
        None => DecodeMode::Greedy,
    };
    let all: Vec<&dialpath::pathgen::PathExample> = prepared
        .train_examples
        .iter()
        .chain(&prepared.val_examples)
        .collect();
    let mut examples: Vec<&dialpath::pathgen::PathExample> = Vec::new();
    match &args.dialogue {
        Some(id) => {
            let ex = all
                .iter()
                .find(|e| &e.dialogue_id == id)
                .ok_or_else(|| HarnessError::Invalid(format!("unknown dialogue {id:?}")))?;
            if let Some(t) = args.turn {
                if t != ex.turn {
                    return Err(HarnessError::Invalid(format!(
                        "decoding runs at the final turn {} (got --turn {t})",
                        ex.turn
                    )));
                }
            }
            examples.push(ex);
        }
        None => examples.extend(prepared.val_examples.iter()),
    }
    let mut lines = String::new();
    for ex in examples {
        let (path, steps) = model.generate_path(ex, mode)?;
        let record = serde_json::json!({
            "dialogue": ex.dialogue_id,
            "turn": ex.turn,
            "path": path.turns,
            "terminated": path.terminated,
            "steps": steps,
        });
        lines.push_str(&record.to_string());
        lines.push('\n');
    }
    match &args.out {
        Some(path) => write_text(path, &lines)?,
        None => print!("{lines}"),
    }
    Ok(())
}

fn parse_strategy(spec: &str) -> Result<Option<PathStrategy>, HarnessError> {
    match spec {
        "learned" => Ok(None),
        "oracle" => Ok(Some(PathStrategy::Oracle)),
        "random" => Ok(Some(PathStrategy::Random)),
        other => {
            if let Some(n) = other.strip_prefix("last_") {
                let n: usize = n
                    .parse()
                    .map_err(|_| HarnessError::Invalid(format!("bad strategy {other:?}")))?;
                return Ok(Some(PathStrategy::LastN(n)));
            }
            Err(HarnessError::Invalid(format!(
                "unknown strategy {other:?}; use learned|oracle|random|last_N"
            )))
        }
    }
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<(), HarnessError> {
    let bench = load_benchmark(&args.corpus)?;
    let seed = resolve_seed(args.seed, None, 7);
    let prepared = prepare_benchmark(bench, GraphConfig::default(), seed);
    let path_model = PathGeneratorModel::load(&args.joint.join("path.dpck"))?;
    let prop_model = PropagationModel::load(&args.joint.join("prop.dpck"))?;
    let val = build_joint_examples(
        &prepared.bench.val,
        &prepared.vocab,
        &prepared.bench.grids,
        prepared.val_examples.clone(),
    )?;
    let strategy = parse_strategy(&args.strategy)?;
    let name = strategy
        .as_ref()
        .map(strategy_name)
        .unwrap_or_else(|| "learned".into());
    let outcome = evaluate_strategy(
        &name,
        strategy.as_ref(),
        &path_model,
        &prop_model,
        &val,
        &prepared.bench.table,
        &prepared.vocab,
        &prepared.bench.gold,
        0.6,
        seed,
    )?;
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome).expect("serializable outcome")
    );
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<(), HarnessError> {
    let bench = load_benchmark(&args.corpus)?;
    match &args.dialogue {
        Some(id) => {
            let dialogue = bench
                .train
                .get(id)
                .or_else(|| bench.val.get(id))
                .ok_or_else(|| HarnessError::Invalid(format!("unknown dialogue {id:?}")))?;
            println!("dialogue {id} ({} turns)", dialogue.len());
            for turn in &dialogue.turns {
                println!("  {:>2} Q: {}", turn.turn_index, turn.question.join(" "));
                println!("     A: {}", turn.answer.join(" "));
            }
            let gold = &bench.gold[id];
            println!("gold path: {:?} ({} hops)", gold.path, gold.hops);
        }
        None => {
            let mut hops: BTreeMap<usize, usize> = BTreeMap::new();
            for g in bench.gold.values() {
                *hops.entry(g.hops).or_default() += 1;
            }
            println!(
                "train {} / val {} dialogues; grids {}; embedding dim {}",
                bench.train.len(),
                bench.val.len(),
                bench.grids.len(),
                bench.table.dim()
            );
            println!("hop histogram: {hops:?}");
        }
    }
    Ok(())
}
