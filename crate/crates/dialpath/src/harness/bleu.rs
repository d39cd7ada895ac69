//! Corpus-level BLEU with clipped n-gram precision, a brevity penalty and
//! add-one smoothing on orders above unigram.
//!
//! Smoothing rule: for n >= 2, both the clipped match count and the
//! candidate n-gram total get +1. Identical candidate/reference pairs
//! still score exactly 1.0 at every order. The brevity penalty is
//! `exp(1 - r/c)` when the candidate corpus is shorter than the
//! reference corpus, 1 otherwise.

use std::collections::HashMap;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU-1..=max_n for a corpus of single-reference pairs.
pub fn corpus_bleu(
    candidates: &[Vec<String>],
    references: &[Vec<String>],
    max_n: usize,
) -> Vec<f64> {
    assert_eq!(
        candidates.len(),
        references.len(),
        "one reference per candidate"
    );
    assert!(max_n >= 1);
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (cand, reference) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for n in 1..=max_n {
            let cand_counts = ngram_counts(cand, n);
            let ref_counts = ngram_counts(reference, n);
            for (gram, &count) in &cand_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
            totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }
    let bp = if cand_len == 0 {
        0.0
    } else if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    let precision = |n: usize| -> f64 {
        let (m, t) = (matches[n - 1], totals[n - 1]);
        if n == 1 {
            if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            }
        } else {
            (m + 1) as f64 / (t + 1) as f64
        }
    };
    (1..=max_n)
        .map(|order| {
            let mut log_sum = 0.0;
            for n in 1..=order {
                let p = precision(n);
                if p == 0.0 {
                    return 0.0;
                }
                log_sum += p.ln();
            }
            bp * (log_sum / order as f64).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(|t| t.to_string()).collect()
    }

    #[test]
    fn identical_sentences_score_one() {
        let c = vec![toks("the bag is red")];
        let scores = corpus_bleu(&c, &c, 4);
        for s in scores {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bleu1_of_identical_single_sentence() {
        let c = vec![toks("hello world")];
        assert!((corpus_bleu(&c, &c, 1)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_sentences_score_zero_unigram() {
        let c = vec![toks("aa bb cc")];
        let r = vec![toks("dd ee ff")];
        let scores = corpus_bleu(&c, &r, 4);
        assert_eq!(scores[0], 0.0);
    }

    #[test]
    fn matches_independent_reference_implementation() {
        // frozen from tests/oracles/bleu_oracle.py on this fixture pair
        let c = vec![
            toks("the woman is sewing a black bag"),
            toks("yes i see one"),
        ];
        let r = vec![
            toks("the woman is sewing a bag and the bag is black"),
            toks("yes i see one"),
        ];
        let scores = corpus_bleu(&c, &r, 4);
        let expected = [
            ORACLE_BLEU[0],
            ORACLE_BLEU[1],
            ORACLE_BLEU[2],
            ORACLE_BLEU[3],
        ];
        for (got, want) in scores.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    const ORACLE_BLEU: [f64; 4] = [
        0.6951439283988788,
        0.6217556312184558,
        0.5863070962977946,
        0.5528276185357668,
    ];

    #[test]
    fn shorter_candidate_is_penalized() {
        let c = vec![toks("the bag")];
        let r = vec![toks("the bag is red and big")];
        let scores = corpus_bleu(&c, &r, 1);
        assert!(scores[0] < 1.0);
        assert!(scores[0] > 0.0);
    }
}
