//! Turn-level semantic graphs over a dialogue context.
//!
//! A graph is rebuilt per (dialogue, turn): nodes are the context turns
//! plus the current turn, and edges come from one of three semantics:
//!
//! - compositional: cross-turn lexical-span pairs passing `is_similar`,
//! - global: whole-turn mean-embedding cosine against the threshold,
//! - fully connected: every ordered pair of distinct turns.
//!
//! Every node carries a self-loop. `BiDirect` stores both directions of a
//! licensed edge; `TODirect` stores only the backward direction
//! (later turn to earlier turn) so decoding can walk the adjacency row of
//! the current node directly. The literal forward orientation is available
//! behind [`GraphConfig::todirect_forward`] for comparison.

use crate::dialogue::{DialogueContext, DialogueTurn};
use crate::embeddings::{cosine, is_similar, EmbeddingTable};
use crate::spans::{LexicalSpan, SpanExtractor, SpanKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSemantics {
    Compositional,
    Global,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphDirection {
    BiDirect,
    TODirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub semantics: GraphSemantics,
    pub direction: GraphDirection,
    pub tau: f64,
    /// Debug orientation for TODirect: store earlier-to-later edges
    /// instead of the backward default.
    pub todirect_forward: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            semantics: GraphSemantics::Compositional,
            direction: GraphDirection::BiDirect,
            tau: 0.6,
            todirect_forward: false,
        }
    }
}

/// Turn-level graph with span provenance for licensed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    pub current_turn: usize,
    nodes: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
    pub span_map: BTreeMap<usize, Vec<LexicalSpan>>,
    /// Coreference-resolved tokens per node (the current turn contributes
    /// only its question).
    pub node_tokens: BTreeMap<usize, Vec<String>>,
    pub edge_provenance: BTreeMap<(usize, usize), Vec<(LexicalSpan, LexicalSpan)>>,
}

impl SemanticGraph {
    fn new(current_turn: usize, nodes: Vec<usize>) -> Self {
        let mut edges = BTreeSet::new();
        for &n in &nodes {
            edges.insert((n, n));
        }
        SemanticGraph {
            current_turn,
            nodes,
            edges,
            span_map: BTreeMap::new(),
            node_tokens: BTreeMap::new(),
            edge_provenance: BTreeMap::new(),
        }
    }

    /// Assemble a graph from explicit edges; self-loops are added for every
    /// node. Useful for tests and synthetic benchmarks.
    pub fn from_edges(
        current_turn: usize,
        nodes: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut graph = SemanticGraph::new(current_turn, nodes);
        for (from, to) in edges {
            graph.insert_edge(from, to);
        }
        graph
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Out-neighbors of a node, ascending, self excluded.
    pub fn neighbors(&self, from: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .copied()
            .filter(|&to| to != from && self.has_edge(from, to))
            .collect()
    }

    fn insert_edge(&mut self, from: usize, to: usize) {
        self.edges.insert((from, to));
    }

    fn record_provenance(&mut self, from: usize, to: usize, a: &LexicalSpan, b: &LexicalSpan) {
        self.edge_provenance
            .entry((from, to))
            .or_default()
            .push((a.clone(), b.clone()));
    }

    /// Dense 0/1 adjacency with self-loops; row/column `i` is turn `i+1`.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.nodes.len();
        let index: BTreeMap<usize, usize> =
            self.nodes.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut a = vec![vec![0u8; n]; n];
        for &(from, to) in &self.edges {
            a[index[&from]][index[&to]] = 1;
        }
        a
    }

    pub fn to_json(&self) -> serde_json::Value {
        let spans: BTreeMap<String, Vec<serde_json::Value>> = self
            .span_map
            .iter()
            .map(|(turn, spans)| {
                (
                    turn.to_string(),
                    spans
                        .iter()
                        .map(|s| {
                            serde_json::json!({"tokens": s.tokens, "kind": s.kind.to_string()})
                        })
                        .collect(),
                )
            })
            .collect();
        let provenance: Vec<serde_json::Value> = self
            .edge_provenance
            .iter()
            .map(|((from, to), pairs)| {
                serde_json::json!({
                    "from": from,
                    "to": to,
                    "pairs": pairs
                        .iter()
                        .map(|(a, b)| serde_json::json!([a.tokens, b.tokens]))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "current_turn": self.current_turn,
            "nodes": self.nodes,
            "edges": self.edges.iter().collect::<Vec<_>>(),
            "adjacency": self.adjacency(),
            "spans": spans,
            "provenance": provenance,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph semantic_graph {\n");
        for &n in &self.nodes {
            let label = self
                .span_map
                .get(&n)
                .map(|spans| {
                    spans
                        .iter()
                        .map(|s| s.text())
                        .collect::<Vec<_>>()
                        .join(", ")
                })
                .unwrap_or_default();
            let _ = writeln!(out, "  t{n} [label=\"turn {n}\\n{label}\"];");
        }
        for &(from, to) in &self.edges {
            if from != to {
                let _ = writeln!(out, "  t{from} -> t{to};");
            }
        }
        out.push_str("}\n");
        out
    }
}

fn resolved_turns(
    context: &DialogueContext,
    current: &DialogueTurn,
    extractor: &dyn SpanExtractor,
) -> Vec<DialogueTurn> {
    let mut turns: Vec<DialogueTurn> = context.turns.clone();
    turns.push(current.question_only());
    extractor.resolve_coreferences(&turns)
}

fn directed_insert(
    graph: &mut SemanticGraph,
    cfg: &GraphConfig,
    earlier: usize,
    later: usize,
) -> Vec<(usize, usize)> {
    match cfg.direction {
        GraphDirection::BiDirect => {
            graph.insert_edge(earlier, later);
            graph.insert_edge(later, earlier);
            vec![(earlier, later), (later, earlier)]
        }
        GraphDirection::TODirect => {
            let edge = if cfg.todirect_forward {
                (earlier, later)
            } else {
                (later, earlier)
            };
            graph.insert_edge(edge.0, edge.1);
            vec![edge]
        }
    }
}

/// Compositional construction: span-level similarity licenses turn edges.
pub fn build_graph(
    context: &DialogueContext,
    current: &DialogueTurn,
    cfg: &GraphConfig,
    extractor: &dyn SpanExtractor,
    table: &EmbeddingTable,
) -> SemanticGraph {
    assert_eq!(
        cfg.semantics,
        GraphSemantics::Compositional,
        "build_graph requires compositional semantics"
    );
    let resolved = resolved_turns(context, current, extractor);
    let nodes: Vec<usize> = resolved.iter().map(|t| t.turn_index).collect();
    let mut graph = SemanticGraph::new(current.turn_index, nodes);
    for turn in &resolved {
        graph
            .node_tokens
            .insert(turn.turn_index, turn.all_tokens());
        graph
            .span_map
            .insert(turn.turn_index, extractor.extract_spans(turn));
    }
    let turns: Vec<usize> = graph.nodes.clone();
    for (ai, &a) in turns.iter().enumerate() {
        for &b in &turns[ai + 1..] {
            let spans_a = graph.span_map[&a].clone();
            let spans_b = graph.span_map[&b].clone();
            for sa in &spans_a {
                for sb in &spans_b {
                    if is_similar(sa, sb, table, cfg.tau) {
                        for (from, to) in directed_insert(&mut graph, cfg, a, b) {
                            // provenance pairs stored in edge direction
                            if from == a {
                                graph.record_provenance(from, to, sa, sb);
                            } else {
                                graph.record_provenance(from, to, sb, sa);
                            }
                        }
                    }
                }
            }
        }
    }
    graph
}

/// Global construction: whole-turn mean embeddings against the threshold.
pub fn build_global_graph(
    context: &DialogueContext,
    current: &DialogueTurn,
    cfg: &GraphConfig,
    extractor: &dyn SpanExtractor,
    table: &EmbeddingTable,
) -> SemanticGraph {
    assert_eq!(
        cfg.semantics,
        GraphSemantics::Global,
        "build_global_graph requires global semantics"
    );
    let resolved = resolved_turns(context, current, extractor);
    let nodes: Vec<usize> = resolved.iter().map(|t| t.turn_index).collect();
    let mut graph = SemanticGraph::new(current.turn_index, nodes);
    let mut embeddings: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut whole_spans: BTreeMap<usize, LexicalSpan> = BTreeMap::new();
    for turn in &resolved {
        let tokens = turn.all_tokens();
        embeddings.insert(turn.turn_index, table.embed_tokens(&tokens));
        whole_spans.insert(
            turn.turn_index,
            LexicalSpan::new(turn.turn_index, tokens.clone(), SpanKind::Entity),
        );
        graph.node_tokens.insert(turn.turn_index, tokens);
        graph
            .span_map
            .insert(turn.turn_index, extractor.extract_spans(turn));
    }
    let turns: Vec<usize> = graph.nodes.clone();
    for (ai, &a) in turns.iter().enumerate() {
        for &b in &turns[ai + 1..] {
            let sim = whole_spans[&a].tokens == whole_spans[&b].tokens
                || cosine(&embeddings[&a], &embeddings[&b])
                    .map(|c| c >= cfg.tau)
                    .unwrap_or(false);
            if sim {
                let (sa, sb) = (whole_spans[&a].clone(), whole_spans[&b].clone());
                for (from, to) in directed_insert(&mut graph, cfg, a, b) {
                    if from == a {
                        graph.record_provenance(from, to, &sa, &sb);
                    } else {
                        graph.record_provenance(from, to, &sb, &sa);
                    }
                }
            }
        }
    }
    graph
}

/// Fully-connected construction: every ordered pair of distinct turns.
pub fn build_fully_connected(
    context: &DialogueContext,
    current: &DialogueTurn,
    cfg: &GraphConfig,
    extractor: &dyn SpanExtractor,
) -> SemanticGraph {
    let resolved = resolved_turns(context, current, extractor);
    let nodes: Vec<usize> = resolved.iter().map(|t| t.turn_index).collect();
    let mut graph = SemanticGraph::new(current.turn_index, nodes);
    for turn in &resolved {
        graph
            .node_tokens
            .insert(turn.turn_index, turn.all_tokens());
        graph
            .span_map
            .insert(turn.turn_index, extractor.extract_spans(turn));
    }
    let turns: Vec<usize> = graph.nodes.clone();
    for (ai, &a) in turns.iter().enumerate() {
        for &b in &turns[ai + 1..] {
            directed_insert(&mut graph, cfg, a, b);
        }
    }
    graph
}

/// Dispatch on the configured semantics.
pub fn build_configured(
    context: &DialogueContext,
    current: &DialogueTurn,
    cfg: &GraphConfig,
    extractor: &dyn SpanExtractor,
    table: &EmbeddingTable,
) -> SemanticGraph {
    match cfg.semantics {
        GraphSemantics::Compositional => build_graph(context, current, cfg, extractor, table),
        GraphSemantics::Global => build_global_graph(context, current, cfg, extractor, table),
        GraphSemantics::FullyConnected => build_fully_connected(context, current, cfg, extractor),
    }
}
