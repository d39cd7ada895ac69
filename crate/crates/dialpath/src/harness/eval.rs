//! Evaluation: path exact match, edge precision/recall/F1, answer token
//! accuracy, BLEU, and a per-hop breakdown.

use super::bleu::corpus_bleu;
use crate::oracle::ReasoningPath;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/gold mismatch: {0}")]
    Misaligned(String),
}

/// One system output: the decoded path and the generated answer tokens.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionRecord {
    pub dialogue_id: String,
    pub turn: usize,
    pub path: ReasoningPath,
    pub answer_tokens: Vec<String>,
}

/// Reference: the gold path, gold answer, and the hop count of the
/// planted chain.
#[derive(Debug, Clone, Serialize)]
pub struct GoldRecord {
    pub dialogue_id: String,
    pub turn: usize,
    pub path: ReasoningPath,
    pub answer_tokens: Vec<String>,
    pub hops: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HopBreakdown {
    pub count: usize,
    pub path_exact_match: f64,
    pub answer_token_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub examples: usize,
    pub path_exact_match: f64,
    pub edge_precision: f64,
    pub edge_recall: f64,
    pub edge_f1: f64,
    pub answer_token_accuracy: f64,
    /// BLEU-1..4 with the smoothing documented in the metric module.
    pub bleu: [f64; 4],
    pub per_hop: BTreeMap<usize, HopBreakdown>,
}

impl EvalReport {
    pub fn validate(&self) {
        let rates = [
            self.path_exact_match,
            self.edge_precision,
            self.edge_recall,
            self.edge_f1,
            self.answer_token_accuracy,
        ];
        for r in rates.iter().chain(self.bleu.iter()) {
            assert!((0.0..=1.0).contains(r), "rate {r} outside [0, 1]");
        }
    }
}

/// Position-aligned token matches over the longer of the two sequences.
fn token_accuracy(pred: &[String], gold: &[String]) -> (usize, usize) {
    let hits = pred.iter().zip(gold).filter(|(a, b)| a == b).count();
    (hits, pred.len().max(gold.len()).max(1))
}

/// Aggregate metrics over aligned prediction/gold sets. Exact match
/// requires full sequence equality including termination; edge scores are
/// micro-averaged over consecutive-pair sets.
pub fn evaluate(
    predictions: &[PredictionRecord],
    gold: &[GoldRecord],
) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::Misaligned(format!(
            "{} predictions vs {} gold records",
            predictions.len(),
            gold.len()
        )));
    }
    for (p, g) in predictions.iter().zip(gold) {
        if p.dialogue_id != g.dialogue_id || p.turn != g.turn {
            return Err(EvalError::Misaligned(format!(
                "prediction for {}@{} paired with gold {}@{}",
                p.dialogue_id, p.turn, g.dialogue_id, g.turn
            )));
        }
    }
    if predictions.is_empty() {
        return Err(EvalError::Misaligned("empty evaluation set".into()));
    }

    struct Partial {
        exact: usize,
        edge_tp: usize,
        edge_pred: usize,
        edge_gold: usize,
        tok_hits: usize,
        tok_total: usize,
    }
    let partials: Vec<(usize, Partial)> = predictions
        .par_iter()
        .zip(gold.par_iter())
        .map(|(p, g)| {
            let exact =
                usize::from(p.path.terminated == g.path.terminated && p.path.turns == g.path.turns);
            let pred_edges: BTreeSet<(usize, usize)> = p.path.edges().into_iter().collect();
            let gold_edges: BTreeSet<(usize, usize)> = g.path.edges().into_iter().collect();
            let (tok_hits, tok_total) = token_accuracy(&p.answer_tokens, &g.answer_tokens);
            (
                g.hops,
                Partial {
                    exact,
                    edge_tp: pred_edges.intersection(&gold_edges).count(),
                    edge_pred: pred_edges.len(),
                    edge_gold: gold_edges.len(),
                    tok_hits,
                    tok_total,
                },
            )
        })
        .collect();

    let n = predictions.len() as f64;
    let mut exact = 0usize;
    let (mut tp, mut pred_total, mut gold_total) = (0usize, 0usize, 0usize);
    let (mut tok_hits, mut tok_total) = (0usize, 0usize);
    let mut per_hop_raw: BTreeMap<usize, (usize, usize, usize, usize)> = BTreeMap::new();
    for (hops, part) in &partials {
        exact += part.exact;
        tp += part.edge_tp;
        pred_total += part.edge_pred;
        gold_total += part.edge_gold;
        tok_hits += part.tok_hits;
        tok_total += part.tok_total;
        let entry = per_hop_raw.entry(*hops).or_default();
        entry.0 += 1;
        entry.1 += part.exact;
        entry.2 += part.tok_hits;
        entry.3 += part.tok_total;
    }
    let precision = if pred_total == 0 {
        if gold_total == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / pred_total as f64
    };
    let recall = if gold_total == 0 {
        1.0
    } else {
        tp as f64 / gold_total as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    let candidates: Vec<Vec<String>> = predictions.iter().map(|p| p.answer_tokens.clone()).collect();
    let references: Vec<Vec<String>> = gold.iter().map(|g| g.answer_tokens.clone()).collect();
    let bleu_scores = corpus_bleu(&candidates, &references, 4);

    let per_hop = per_hop_raw
        .into_iter()
        .map(|(hops, (count, ex, th, tt))| {
            (
                hops,
                HopBreakdown {
                    count,
                    path_exact_match: ex as f64 / count as f64,
                    answer_token_accuracy: th as f64 / tt.max(1) as f64,
                },
            )
        })
        .collect();

    let report = EvalReport {
        examples: predictions.len(),
        path_exact_match: exact as f64 / n,
        edge_precision: precision,
        edge_recall: recall,
        edge_f1: f1,
        answer_token_accuracy: tok_hits as f64 / tok_total.max(1) as f64,
        bleu: [
            bleu_scores[0],
            bleu_scores[1],
            bleu_scores[2],
            bleu_scores[3],
        ],
        per_hop,
    };
    report.validate();
    Ok(report)
}
