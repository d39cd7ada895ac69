//! Multimodal feature propagation: turn representations, turn-conditioned
//! visual attention, GCN message passing over the semantic graph, path
//! traversal encoding, and the answer decoder fed by both streams.
//!
//! Dimension convention: turns are rows throughout, so turn
//! representations `V`, turn-dependent visual features `M` and the GCN
//! output are `|V| x d` matrices whose row order follows the ascending
//! graph nodes.
//!
//! The answer decoder is a two-block auto-regressive transformer. Each
//! block chains causal self-attention, attention over the question
//! encoding, and two separate context-attention layers over the
//! graph-propagated stream and the path-traversal stream.

use crate::embeddings::EmbeddingTable;
use crate::graph::SemanticGraph;
use crate::nn::blocks::{
    causal_mask, pos_encode, transformer_block, transformer_block_with_probs, TrainMode,
};
use crate::nn::checkpoint::{read_container, write_container, ContainerError, GRID_MAGIC};
use crate::nn::{
    adam_step_many, backward, cross_entropy_with_label_smoothing, AdamOptions, AdamState,
    AttentionBlockParams, LrSchedule, NnError, Param, ParamSet, Tensor,
};
use crate::oracle::ReasoningPath;
use crate::pathgen::{DecodeMode, PathExample, PathGeneratorModel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::rc::Rc;

/// A two-dimensional visual feature grid: `regions x d_v` token matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeatureGrid {
    pub source_id: String,
    pub regions: usize,
    pub d_v: usize,
    pub tokens: Vec<f64>,
}

impl VisualFeatureGrid {
    pub fn new(source_id: &str, regions: usize, d_v: usize, tokens: Vec<f64>) -> Self {
        assert!(regions >= 1, "grid needs at least one region");
        assert_eq!(tokens.len(), regions * d_v);
        assert!(tokens.iter().all(|v| v.is_finite()), "grid must be finite");
        VisualFeatureGrid {
            source_id: source_id.to_string(),
            regions,
            d_v,
            tokens,
        }
    }

    pub fn region(&self, idx: usize) -> &[f64] {
        &self.tokens[idx * self.d_v..(idx + 1) * self.d_v]
    }
}

/// Write grids keyed by their source id into the binary container format.
pub fn save_grids(path: &Path, grids: &[VisualFeatureGrid]) -> Result<(), ContainerError> {
    let arrays: Vec<(String, usize, usize, Vec<f64>)> = grids
        .iter()
        .map(|g| (g.source_id.clone(), g.regions, g.d_v, g.tokens.clone()))
        .collect();
    let d_v = grids.first().map(|g| g.d_v).unwrap_or(0);
    write_container(path, GRID_MAGIC, &serde_json::json!({ "d_v": d_v }), &arrays)
}

pub fn load_grids(path: &Path) -> Result<Vec<VisualFeatureGrid>, ContainerError> {
    let container = read_container(path, GRID_MAGIC)?;
    Ok(container
        .arrays
        .into_iter()
        .map(|(name, rows, cols, data)| VisualFeatureGrid::new(&name, rows, cols, data))
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub d: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Word-vector dimension feeding turn representations.
    pub d_w: usize,
    /// Visual token dimension.
    pub d_v: usize,
    pub gcn_layers: usize,
    pub decoder_blocks: usize,
    pub max_answer_len: usize,
    pub label_smoothing: f64,
    /// Ablations: skip message passing / zero the path stream.
    pub use_gcn: bool,
    pub use_path: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            d: 128,
            heads: 2,
            dropout: 0.2,
            d_w: 48,
            d_v: 48,
            gcn_layers: 1,
            decoder_blocks: 2,
            max_answer_len: 12,
            label_smoothing: 0.1,
            use_gcn: true,
            use_path: true,
        }
    }
}

struct GcnLayer {
    f_w1: Rc<Param>,
    f_b1: Rc<Param>,
    f_w2: Rc<Param>,
    f_b2: Rc<Param>,
    g_w1: Rc<Param>,
    g_b1: Rc<Param>,
    g_w2: Rc<Param>,
    g_b2: Rc<Param>,
}

impl GcnLayer {
    fn new(ps: &mut ParamSet, prefix: &str, d: usize, rng: &mut ChaCha8Rng) -> Self {
        let name = |s: &str| format!("{prefix}.{s}");
        GcnLayer {
            f_w1: ps.add(&name("f_w1"), 2 * d, d, rng),
            f_b1: ps.add_const(&name("f_b1"), 1, d, 0.0),
            f_w2: ps.add(&name("f_w2"), d, d, rng),
            f_b2: ps.add_const(&name("f_b2"), 1, d, 0.0),
            g_w1: ps.add(&name("g_w1"), 3 * d, d, rng),
            g_b1: ps.add_const(&name("g_b1"), 1, d, 0.0),
            g_w2: ps.add(&name("g_w2"), d, d, rng),
            g_b2: ps.add_const(&name("g_b2"), 1, d, 0.0),
        }
    }

    fn mlp_f(&self, x: &Tensor) -> Tensor {
        x.matmul(&self.f_w1.tensor())
            .add_row(&self.f_b1.tensor())
            .relu()
            .matmul(&self.f_w2.tensor())
            .add_row(&self.f_b2.tensor())
    }

    fn mlp_g(&self, x: &Tensor) -> Tensor {
        x.matmul(&self.g_w1.tensor())
            .add_row(&self.g_b1.tensor())
            .relu()
            .matmul(&self.g_w2.tensor())
            .add_row(&self.g_b2.tensor())
    }
}

struct DecoderBlock {
    self_block: AttentionBlockParams,
    q_block: AttentionBlockParams,
    m_block: AttentionBlockParams,
    g_block: AttentionBlockParams,
}

impl DecoderBlock {
    fn new(ps: &mut ParamSet, prefix: &str, d: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        DecoderBlock {
            self_block: AttentionBlockParams::new(ps, &format!("{prefix}.self"), d, heads, rng),
            q_block: AttentionBlockParams::new(ps, &format!("{prefix}.q"), d, heads, rng),
            m_block: AttentionBlockParams::new(ps, &format!("{prefix}.m"), d, heads, rng),
            g_block: AttentionBlockParams::new(ps, &format!("{prefix}.g"), d, heads, rng),
        }
    }
}

pub struct PropagationModel {
    pub cfg: PropagationConfig,
    pub params: ParamSet,
    w_turn: Rc<Param>,
    w_vis: Rc<Param>,
    vis_block: AttentionBlockParams,
    gcn: Vec<GcnLayer>,
    path_block: AttentionBlockParams,
    ans_token_embed: Rc<Param>,
    decoder: Vec<DecoderBlock>,
    w_out: Rc<Param>,
}

impl PropagationModel {
    pub fn new(vocab_size: usize, cfg: PropagationConfig, seed: u64) -> Self {
        assert!(cfg.gcn_layers >= 1 && cfg.gcn_layers <= 3);
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d;
        let w_turn = ps.add("w_turn", cfg.d_w, d, &mut rng);
        let w_vis = ps.add("w_vis", cfg.d_v, d, &mut rng);
        let vis_block = AttentionBlockParams::new(&mut ps, "vis", d, cfg.heads, &mut rng);
        let gcn = (0..cfg.gcn_layers)
            .map(|i| GcnLayer::new(&mut ps, &format!("gcn{i}"), d, &mut rng))
            .collect();
        let path_block = AttentionBlockParams::new(&mut ps, "path", d, cfg.heads, &mut rng);
        let ans_token_embed = ps.add("ans_token_embed", vocab_size, d, &mut rng);
        let decoder = (0..cfg.decoder_blocks)
            .map(|i| DecoderBlock::new(&mut ps, &format!("dec{i}"), d, cfg.heads, &mut rng))
            .collect();
        let w_out = ps.add("w_out", d, vocab_size, &mut rng);
        PropagationModel {
            cfg,
            params: ps,
            w_turn,
            w_vis,
            vis_block,
            gcn,
            path_block,
            ans_token_embed,
            decoder,
            w_out,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.ans_token_embed.rows()
    }

    /// Persist weights and hyperparameters as a checkpoint container.
    pub fn save(&self, path: &Path) -> Result<(), ContainerError> {
        let hp = serde_json::json!({
            "kind": "propagation",
            "vocab_size": self.vocab_size(),
            "cfg": self.cfg,
        });
        crate::nn::checkpoint::save_params(path, &self.params, &hp)
    }

    pub fn load(path: &Path) -> Result<Self, ContainerError> {
        let container =
            read_container(path, crate::nn::checkpoint::CHECKPOINT_MAGIC)?;
        let hp = &container.hyperparams;
        if hp["kind"] != "propagation" {
            return Err(ContainerError::Header(format!(
                "expected a propagation checkpoint, found kind {}",
                hp["kind"]
            )));
        }
        let vocab_size = hp["vocab_size"]
            .as_u64()
            .ok_or_else(|| ContainerError::Header("missing vocab_size".into()))?
            as usize;
        let cfg: PropagationConfig = serde_json::from_value(hp["cfg"].clone())
            .map_err(|e| ContainerError::Header(e.to_string()))?;
        let model = PropagationModel::new(vocab_size, cfg, 0);
        crate::nn::checkpoint::load_params(path, &model.params)?;
        Ok(model)
    }

    /// Mean-pooled token embeddings per graph node, projected to width `d`.
    /// Rows follow the ascending node order.
    pub fn turn_representations(&self, graph: &SemanticGraph, table: &EmbeddingTable) -> Tensor {
        let mut rows = Vec::new();
        for &node in graph.nodes() {
            let tokens = graph
                .node_tokens
                .get(&node)
                .unwrap_or_else(|| panic!("graph node {node} has no tokens"));
            rows.extend(table.embed_tokens(tokens));
        }
        let v_w = Tensor::constant(graph.node_count(), self.cfg.d_w, rows);
        v_w.matmul(&self.w_turn.tensor())
    }

    /// Turn-dependent visual features `M`: every turn queries the grid
    /// tokens through one attention block.
    pub fn visual_attention(
        &self,
        v: &Tensor,
        grid: &VisualFeatureGrid,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        Ok(self.visual_attention_with_probs(v, grid, mode)?.0)
    }

    /// As [`visual_attention`](Self::visual_attention), also returning the
    /// per-head attention probabilities (`|V| x regions`).
    pub fn visual_attention_with_probs(
        &self,
        v: &Tensor,
        grid: &VisualFeatureGrid,
        mode: &mut Option<TrainMode>,
    ) -> Result<(Tensor, Vec<Tensor>), NnError> {
        if grid.regions == 0 {
            return Err(NnError::EmptyInput("visual grid has no regions".into()));
        }
        let tokens = Tensor::constant(grid.regions, grid.d_v, grid.tokens.clone());
        let projected = tokens.matmul(&self.w_vis.tensor());
        transformer_block_with_probs(v, &projected, &projected, &self.vis_block, None, mode)
    }

    /// Message passing: per-node neighbor aggregate, global mean, node
    /// refresh. One layer per configured depth.
    pub fn gcn_update(&self, m: &Tensor, graph: &SemanticGraph) -> Tensor {
        let nodes = graph.nodes();
        let n = nodes.len();
        assert_eq!(m.rows(), n, "one row per graph node");
        let mut current = m.clone();
        for layer in &self.gcn {
            // stack every (node, neighbor) pair, run f once, then average
            // each node's slice
            let mut pair_rows = Vec::new();
            let mut counts = Vec::with_capacity(n);
            for (k, &node) in nodes.iter().enumerate() {
                let mut count = 0;
                for (j, &other) in nodes.iter().enumerate() {
                    if graph.has_edge(node, other) {
                        let pair = current.row_slice(k, 1).concat_cols(&current.row_slice(j, 1));
                        pair_rows.push(pair);
                        count += 1;
                    }
                }
                assert!(count > 0, "self-loops guarantee a neighbor");
                counts.push(count);
            }
            let f_out = layer.mlp_f(&Tensor::stack_rows(&pair_rows));
            let mut offset = 0;
            let mut aggregates = Vec::with_capacity(n);
            for &count in &counts {
                aggregates.push(f_out.row_slice(offset, count).mean_rows());
                offset += count;
            }
            let e_nodes = Tensor::stack_rows(&aggregates);
            let e_global = e_nodes.mean_rows();
            let mut refreshed = Vec::with_capacity(n);
            for k in 0..n {
                let input = current
                    .row_slice(k, 1)
                    .concat_cols(&e_nodes.row_slice(k, 1))
                    .concat_cols(&e_global);
                refreshed.push(layer.mlp_g(&input));
            }
            current = Tensor::stack_rows(&refreshed);
        }
        current
    }

    /// Graph nodes to propagated features: turn representations, visual
    /// attention, then message passing (unless ablated).
    pub fn propagate(
        &self,
        graph: &SemanticGraph,
        grid: &VisualFeatureGrid,
        table: &EmbeddingTable,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        let v = self.turn_representations(graph, table);
        let m = self.visual_attention(&v, grid, mode)?;
        Ok(if self.cfg.use_gcn {
            self.gcn_update(&m, graph)
        } else {
            m
        })
    }

    /// Gather propagated rows along the path and encode them sequentially
    /// (positional encoding breaks direction symmetry).
    pub fn traverse_path(
        &self,
        m_tilde: &Tensor,
        graph: &SemanticGraph,
        path: &ReasoningPath,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        let nodes = graph.nodes();
        let mut row_ids = Vec::with_capacity(path.turns.len());
        for &turn in &path.turns {
            let idx = nodes
                .iter()
                .position(|&n| n == turn)
                .ok_or(NnError::NodeNotInGraph { turn })?;
            row_ids.push(idx);
        }
        let gathered = {
            let parts: Vec<Tensor> = row_ids.iter().map(|&i| m_tilde.row_slice(i, 1)).collect();
            Tensor::stack_rows(&parts)
        };
        let g = gathered.add(&pos_encode(row_ids.len(), self.cfg.d)?);
        transformer_block(&g, &g, &g, &self.path_block, None, mode)
    }

    /// Rows of `m_tilde` gathered in path order, before the sequence
    /// encoder (gather semantics are part of the contract).
    pub fn gather_path_rows(
        &self,
        m_tilde: &Tensor,
        graph: &SemanticGraph,
        path: &ReasoningPath,
    ) -> Result<Tensor, NnError> {
        let nodes = graph.nodes();
        let mut parts = Vec::new();
        for &turn in &path.turns {
            let idx = nodes
                .iter()
                .position(|&n| n == turn)
                .ok_or(NnError::NodeNotInGraph { turn })?;
            parts.push(m_tilde.row_slice(idx, 1));
        }
        Ok(Tensor::stack_rows(&parts))
    }

    fn encode_question(&self, question_ids: &[usize]) -> Result<Tensor, NnError> {
        if question_ids.is_empty() {
            return Err(NnError::EmptyInput("question has no tokens".into()));
        }
        Ok(self
            .ans_token_embed
            .tensor()
            .gather_rows(question_ids)
            .add(&pos_encode(question_ids.len(), self.cfg.d)?))
    }

    /// Path stream for the decoder, honoring the `use_path` ablation.
    fn path_stream(
        &self,
        m_tilde: &Tensor,
        graph: &SemanticGraph,
        path: &ReasoningPath,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        if self.cfg.use_path {
            self.traverse_path(m_tilde, graph, path, mode)
        } else {
            Ok(Tensor::zeros(1, self.cfg.d))
        }
    }

    fn decoder_forward(
        &self,
        input_ids: &[usize],
        q_enc: &Tensor,
        m_tilde: &Tensor,
        g_tilde: &Tensor,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        let mut x = self
            .ans_token_embed
            .tensor()
            .gather_rows(input_ids)
            .add(&pos_encode(input_ids.len(), self.cfg.d)?);
        let mask = causal_mask(input_ids.len());
        for block in &self.decoder {
            x = transformer_block(&x, &x, &x, &block.self_block, Some(&mask), mode)?;
            x = transformer_block(&x, q_enc, q_enc, &block.q_block, None, mode)?;
            x = transformer_block(&x, m_tilde, m_tilde, &block.m_block, None, mode)?;
            x = transformer_block(&x, g_tilde, g_tilde, &block.g_block, None, mode)?;
        }
        Ok(x.matmul(&self.w_out.tensor()))
    }

    /// Teacher-forced smoothed cross entropy of the gold answer.
    pub fn answer_loss(
        &self,
        question_ids: &[usize],
        answer_ids: &[usize],
        m_tilde: &Tensor,
        g_tilde: &Tensor,
        mode: &mut Option<TrainMode>,
    ) -> Result<Tensor, NnError> {
        let q_enc = self.encode_question(question_ids)?;
        let (input, targets) = teacher_forcing_pair(answer_ids);
        let logits = self.decoder_forward(&input, &q_enc, m_tilde, g_tilde, mode)?;
        cross_entropy_with_label_smoothing(&logits, &targets, self.cfg.label_smoothing)
    }

    /// Teacher-forced per-token argmax accuracy (EOS position included).
    pub fn answer_token_accuracy(
        &self,
        question_ids: &[usize],
        answer_ids: &[usize],
        m_tilde: &Tensor,
        g_tilde: &Tensor,
    ) -> Result<(usize, usize), NnError> {
        let q_enc = self.encode_question(question_ids)?;
        let (input, targets) = teacher_forcing_pair(answer_ids);
        let logits = self.decoder_forward(&input, &q_enc, m_tilde, g_tilde, &mut None)?;
        let mut hits = 0;
        for (pos, &target) in targets.iter().enumerate() {
            let row = logits.row(pos);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(j, _)| j)
                .expect("non-empty vocabulary");
            if argmax == target {
                hits += 1;
            }
        }
        Ok((hits, targets.len()))
    }

    /// Greedy answer generation over the vocabulary.
    pub fn generate_answer(
        &self,
        question_ids: &[usize],
        m_tilde: &Tensor,
        g_tilde: &Tensor,
    ) -> Result<Vec<usize>, NnError> {
        let q_enc = self.encode_question(question_ids)?;
        let mut input = vec![crate::dialogue::BOS_ID];
        let mut out = Vec::new();
        for _ in 0..self.cfg.max_answer_len {
            let logits = self.decoder_forward(&input, &q_enc, m_tilde, g_tilde, &mut None)?;
            let row = logits.row(input.len() - 1);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(j, _)| j)
                .expect("non-empty vocabulary");
            if argmax == crate::dialogue::EOS_ID {
                break;
            }
            out.push(argmax);
            input.push(argmax);
        }
        Ok(out)
    }
}

/// Decoder input (BOS-shifted) and target (EOS-terminated) id sequences.
fn teacher_forcing_pair(answer_ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut input = Vec::with_capacity(answer_ids.len() + 1);
    input.push(crate::dialogue::BOS_ID);
    input.extend_from_slice(answer_ids);
    let mut targets = answer_ids.to_vec();
    targets.push(crate::dialogue::EOS_ID);
    (input, targets)
}

// ---------------------------------------------------------------------------
// Joint training
// ---------------------------------------------------------------------------

/// A full training example: path supervision plus the gold answer and the
/// visual grid.
#[derive(Debug, Clone)]
pub struct JointExample {
    pub path: PathExample,
    pub answer_ids: Vec<usize>,
    pub grid: VisualFeatureGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub seed: u64,
}

impl Default for JointTrainConfig {
    fn default() -> Self {
        JointTrainConfig {
            epochs: 35,
            batch_size: 16,
            base_lr: 2e-3,
            warmup_epochs: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct JointTrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) whose validation loss selected the kept weights.
    pub best_epoch: usize,
}

/// Source of the path fed to `traverse_path` at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSource {
    Gold,
    Generated(DecodeMode),
}

/// Joint loss of one example: path generation objective plus answer
/// objective, with the gold path teacher-forced into the traversal.
pub fn joint_loss(
    path_model: &PathGeneratorModel,
    prop_model: &PropagationModel,
    example: &JointExample,
    table: &EmbeddingTable,
    mode: &mut Option<TrainMode>,
) -> Result<Tensor, NnError> {
    let path_loss = path_model.teacher_forced_loss(&example.path, &example.path.gold, mode)?;
    let m_tilde = prop_model.propagate(&example.path.graph, &example.grid, table, mode)?;
    let g_tilde = prop_model.path_stream(&m_tilde, &example.path.graph, &example.path.gold, mode)?;
    let answer_loss = prop_model.answer_loss(
        &example.path.question_ids,
        &example.answer_ids,
        &m_tilde,
        &g_tilde,
        mode,
    )?;
    Ok(path_loss.add(&answer_loss))
}

/// Mean validation joint loss (evaluation mode, gold paths).
pub fn validation_loss(
    path_model: &PathGeneratorModel,
    prop_model: &PropagationModel,
    examples: &[JointExample],
    table: &EmbeddingTable,
) -> Result<f64, NnError> {
    let mut total = 0.0;
    for ex in examples {
        total += joint_loss(path_model, prop_model, ex, table, &mut None)?.scalar();
    }
    Ok(total / examples.len().max(1) as f64)
}

/// Jointly optimize both objectives with Adam + warm-up; the returned
/// models carry the weights of the best validation epoch.
pub fn train_joint(
    path_model: &PathGeneratorModel,
    prop_model: &PropagationModel,
    train: &[JointExample],
    val: &[JointExample],
    table: &EmbeddingTable,
    jcfg: &JointTrainConfig,
) -> Result<JointTrainReport, NnError> {
    assert!(!train.is_empty(), "training set must be non-empty");
    let steps_per_epoch = train.len().div_ceil(jcfg.batch_size) as u64;
    let schedule = LrSchedule {
        base_lr: jcfg.base_lr,
        warmup_steps: (jcfg.warmup_epochs as u64 * steps_per_epoch).max(1),
    };
    let opts = AdamOptions::new(schedule);
    let mut state = AdamState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(jcfg.seed);
    let mut report = JointTrainReport::default();
    let mut best: Option<(f64, _, _)> = None;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..jcfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for (step, batch) in order.chunks(jcfg.batch_size).enumerate() {
            let mut loss_sum: Option<Tensor> = None;
            for &idx in batch {
                let mut mode = Some(TrainMode {
                    dropout: prop_model.cfg.dropout,
                    rng: &mut rng,
                });
                let loss = joint_loss(path_model, prop_model, &train[idx], table, &mut mode)?;
                loss_sum = Some(match loss_sum {
                    Some(acc) => acc.add(&loss),
                    None => loss,
                });
            }
            let loss = loss_sum
                .expect("non-empty batch")
                .scale(1.0 / batch.len() as f64);
            let loss_value = loss.scalar();
            if !loss_value.is_finite() {
                return Err(NnError::Divergence(format!(
                    "joint loss is not finite at epoch {epoch} step {step}"
                )));
            }
            let grads = backward(&loss)?;
            adam_step_many(&[&path_model.params, &prop_model.params], &grads, &mut state, &opts)?;
            epoch_loss += loss_value;
            batches += 1.0;
        }
        report.train_loss.push(epoch_loss / batches);
        report.epochs_run = epoch + 1;

        let vl = validation_loss(path_model, prop_model, val, table)?;
        report.val_loss.push(vl);
        let improved = best.as_ref().map(|(b, _, _)| vl < *b).unwrap_or(true);
        if improved {
            best = Some((vl, path_model.params.snapshot(), prop_model.params.snapshot()));
            report.best_epoch = epoch + 1;
        }
    }
    if let Some((_, path_snap, prop_snap)) = best {
        path_model.params.restore(&path_snap);
        prop_model.params.restore(&prop_snap);
    }
    Ok(report)
}

/// Corpus-level answer token accuracy with the path stream fed from the
/// chosen source; `provided` overrides the source per example when given.
pub fn answer_accuracy_with_paths(
    path_model: &PathGeneratorModel,
    prop_model: &PropagationModel,
    examples: &[JointExample],
    table: &EmbeddingTable,
    source: PathSource,
    provided: Option<&[ReasoningPath]>,
) -> Result<f64, NnError> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, ex) in examples.iter().enumerate() {
        let path = match provided {
            Some(paths) => paths[i].clone(),
            None => match source {
                PathSource::Gold => ex.path.gold.clone(),
                PathSource::Generated(mode) => path_model.generate_path(&ex.path, mode)?.0,
            },
        };
        let m_tilde = prop_model.propagate(&ex.path.graph, &ex.grid, table, &mut None)?;
        let g_tilde = prop_model.path_stream(&m_tilde, &ex.path.graph, &path, &mut None)?;
        let (h, t) = prop_model.answer_token_accuracy(
            &ex.path.question_ids,
            &ex.answer_ids,
            &m_tilde,
            &g_tilde,
        )?;
        hits += h;
        total += t;
    }
    Ok(hits as f64 / total.max(1) as f64)
}
