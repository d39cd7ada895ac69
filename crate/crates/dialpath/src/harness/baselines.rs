//! Fixed and random path strategies compared against the learned
//! generator.

use crate::embeddings::EmbeddingTable;
use crate::graph::SemanticGraph;
use crate::oracle::{enumerate_paths, select_ground_truth, ReasoningPath};
use crate::spans::LexicalSpan;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStrategy {
    /// The last `n` turns regardless of graph structure:
    /// `{t, t-1, ..., max(1, t-n)}`.
    LastN(usize),
    /// Uniformly random graph-valid decreasing path.
    Random,
    /// Coverage-argmax oracle path (requires answer spans).
    Oracle,
}

/// Produce a baseline path for the current turn. `answer_spans` is only
/// consulted by the oracle strategy.
pub fn baseline_path(
    strategy: PathStrategy,
    graph: &SemanticGraph,
    t: usize,
    answer_spans: Option<&[LexicalSpan]>,
    table: &EmbeddingTable,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> ReasoningPath {
    match strategy {
        PathStrategy::LastN(n) => {
            assert!((1..=10).contains(&n), "last-n with n in 1..=10");
            let lo = t.saturating_sub(n).max(1);
            let turns: Vec<usize> = (lo..=t).rev().collect();
            ReasoningPath::new(turns, true)
        }
        PathStrategy::Random => {
            let paths = enumerate_paths(graph, t);
            paths
                .choose(rng)
                .expect("the trivial path always exists")
                .clone()
        }
        PathStrategy::Oracle => {
            let spans = answer_spans.expect("oracle strategy needs answer spans");
            let paths = enumerate_paths(graph, t);
            select_ground_truth(&paths, spans, graph, table, tau, rng.gen()).path
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::OovStrategy;
    use rand::SeedableRng;

    #[test]
    fn last_n_formula() {
        let g = SemanticGraph::from_edges(5, (1..=5).collect(), []);
        let t = EmbeddingTable::new(4, OovStrategy::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = baseline_path(PathStrategy::LastN(1), &g, 5, None, &t, 0.6, &mut rng);
        assert_eq!(p.turns, vec![5, 4]);
        // clamped at turn 1
        let g3 = SemanticGraph::from_edges(3, (1..=3).collect(), []);
        let p = baseline_path(PathStrategy::LastN(10), &g3, 3, None, &t, 0.6, &mut rng);
        assert_eq!(p.turns, vec![3, 2, 1]);
    }

    #[test]
    fn random_paths_valid_and_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let table = EmbeddingTable::new(4, OovStrategy::Zero);
        for _ in 0..200 {
            let n = rng.gen_range(2..=8usize);
            let mut edges = Vec::new();
            for i in 1..=n {
                for j in 1..=n {
                    if i != j && rng.gen_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            let g = SemanticGraph::from_edges(n, (1..=n).collect(), edges);
            for _ in 0..50 {
                let p = baseline_path(PathStrategy::Random, &g, n, None, &table, 0.6, &mut rng);
                assert!(p.is_valid_in(&g));
            }
        }
    }

    #[test]
    fn random_covers_the_path_space() {
        // graph with exactly three valid paths: [3], [3,2], [3,2,1]
        let g = SemanticGraph::from_edges(3, vec![1, 2, 3], [(3, 2), (2, 1)]);
        let table = EmbeddingTable::new(4, OovStrategy::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let p = baseline_path(PathStrategy::Random, &g, 3, None, &table, 0.6, &mut rng);
            seen.insert(p.turns);
        }
        assert_eq!(seen.len(), 3);
    }
}
