//! Lexical-span extraction: a deterministic, rule-based stand-in for a
//! coreference resolver plus dependency parser.
//!
//! The pipeline has two stages behind the pluggable [`SpanExtractor`]
//! trait so a heavier backend can be swapped in:
//!
//! 1. [`resolve_coreferences`](RuleSpanExtractor::resolve_coreferences) —
//!    each pronoun is replaced by `the <head>` where `<head>` is the
//!    nearest preceding noun of compatible form: `he`/`she` bind person
//!    nouns, `it` binds non-person singular nouns, `they`/`them` bind
//!    plural-looking nouns. Candidates from the segment currently being
//!    resolved are excluded (an answer may bind nouns of its own question,
//!    a question only nouns of earlier turns). Pronouns without a
//!    compatible antecedent are left unchanged, which makes the pass
//!    idempotent.
//! 2. [`extract_spans`](RuleSpanExtractor::extract_spans) — the question
//!    and answer are concatenated, then chunked into maximal runs of
//!    content tokens (everything that is not a stopword, pronoun or
//!    punctuation). Runs longer than the configured maximum are split into
//!    consecutive windows. Span kinds come from a small POS lexicon:
//!    verb cues (or an `-ing` suffix) mark actions, all-adjective chunks
//!    mark attributes, everything else is an entity.
//!
//! Lexicons can be overridden from plain-text files, one token per line.

use crate::dialogue::DialogueTurn;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

/// Coarse span taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Entity,
    Action,
    Attribute,
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpanKind::Entity => write!(f, "entity"),
            SpanKind::Action => write!(f, "action"),
            SpanKind::Attribute => write!(f, "attribute"),
        }
    }
}

/// A contiguous span of content tokens from one turn.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LexicalSpan {
    pub turn_index: usize,
    pub tokens: Vec<String>,
    pub kind: SpanKind,
}

impl LexicalSpan {
    pub fn new(turn_index: usize, tokens: Vec<String>, kind: SpanKind) -> Self {
        assert!(!tokens.is_empty(), "span tokens must be non-empty");
        LexicalSpan {
            turn_index,
            tokens,
            kind,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for LexicalSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})@{}", self.text(), self.kind, self.turn_index)
    }
}

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "am", "was", "were", "be", "been", "being", "do", "does",
    "did", "done", "has", "have", "had", "having", "will", "would", "can", "could", "should",
    "may", "might", "must", "what", "who", "whom", "whose", "where", "when", "why", "how",
    "which", "there", "here", "this", "that", "these", "those", "i", "you", "we", "me", "us",
    "my", "your", "our", "yes", "no", "not", "and", "or", "but", "if", "then", "than", "so",
    "too", "very", "of", "in", "on", "at", "to", "from", "with", "for", "as", "by", "about",
    "into", "onto", "over", "under", "near", "beside", "behind", "after", "before", "between",
    "through", "up", "down", "out", "off", "again", "once", "just", "only", "all", "any",
    "both", "each", "few", "more", "most", "other", "some", "such", "own", "same", "one",
    "two", "like", "look", "looks", "see", "saw", "seen", "think", "thinks", "thought",
    "know", "knows", "knew", "want", "wants", "seems", "seem", "seemed", "thing", "things",
    "someone", "something", "anyone", "anything", "somewhere", "anywhere", "maybe", "really",
    "still", "also", "now", "well", "fine", "okay", "ok", "oh", "sure", "right", "video",
    "loudly", "quietly", "slowly", "quickly", "spot", "'s",
];

const DEFAULT_PRONOUNS: &[&str] = &[
    "he", "she", "it", "him", "her", "they", "them", "his", "its", "their",
];

const DEFAULT_VERBS: &[&str] = &[
    "walk", "walks", "walked", "run", "runs", "ran", "sit", "sits", "sat", "stand", "stands",
    "stood", "enter", "enters", "entered", "open", "opens", "opened", "close", "closes",
    "closed", "hold", "holds", "held", "sew", "sews", "eat", "eats", "ate", "drink", "drinks",
    "drank", "read", "reads", "write", "writes", "wrote", "play", "plays", "played", "bark",
    "barks", "barked", "laugh", "laughs", "laughed", "jump", "jumps", "jumped", "dance",
    "dances", "danced", "cook", "cooks", "cooked", "clean", "cleans", "cleaned", "talk",
    "talks", "talked", "smile", "smiles", "smiled", "wave", "waves", "waved", "purr", "purrs",
    "fly", "flies", "flew", "chase", "chases", "chased", "hide", "hides", "hid", "pick",
    "picks", "picked", "find", "finds", "found", "come", "comes", "came", "go", "goes",
    "went", "sleep", "sleeps", "slept", "wear", "wears", "wore",
];

const DEFAULT_ADJECTIVES: &[&str] = &[
    "red", "blue", "green", "black", "white", "yellow", "brown", "gray", "grey", "orange",
    "purple", "pink", "color", "colors", "small", "big", "large", "tiny", "huge", "old",
    "new", "young", "tall", "short", "happy", "sad", "angry", "bright", "dark", "soft",
    "hard", "warm", "cold", "round", "fast", "slow", "heavy", "light", "empty", "full",
    "nice", "open",
];

const PERSON_NOUNS: &[&str] = &[
    "man", "woman", "boy", "girl", "person", "child", "kid", "lady", "guy", "player",
    "speaker", "mother", "father",
];

/// Lexicon-backed configuration for the rule extractor.
#[derive(Debug, Clone)]
pub struct SpanExtractionConfig {
    pub stopwords: BTreeSet<String>,
    pub pronouns: BTreeSet<String>,
    pub verbs: BTreeSet<String>,
    pub adjectives: BTreeSet<String>,
    pub person_nouns: BTreeSet<String>,
    pub max_span_len: usize,
}

fn set_of(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for SpanExtractionConfig {
    fn default() -> Self {
        SpanExtractionConfig {
            stopwords: set_of(DEFAULT_STOPWORDS),
            pronouns: set_of(DEFAULT_PRONOUNS),
            verbs: set_of(DEFAULT_VERBS),
            adjectives: set_of(DEFAULT_ADJECTIVES),
            person_nouns: set_of(PERSON_NOUNS),
            max_span_len: 4,
        }
    }
}

impl SpanExtractionConfig {
    /// Load one lexicon file: plain text, one token per line, `#` comments.
    pub fn load_lexicon(path: &Path) -> std::io::Result<BTreeSet<String>> {
        let text = std::fs::read_to_string(path)?;
        Ok(text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_string())
            .collect())
    }

    fn is_stopword(&self, tok: &str) -> bool {
        self.stopwords.contains(tok)
    }

    fn is_pronoun(&self, tok: &str) -> bool {
        self.pronouns.contains(tok)
    }

    fn is_punct(&self, tok: &str) -> bool {
        tok.chars().next().map(|c| !c.is_alphanumeric()).unwrap_or(true)
    }

    fn is_content(&self, tok: &str) -> bool {
        !self.is_stopword(tok) && !self.is_pronoun(tok) && !self.is_punct(tok)
    }

    fn is_verb_like(&self, tok: &str) -> bool {
        self.verbs.contains(tok)
            || (tok.len() > 4 && tok.ends_with("ing") && !self.adjectives.contains(tok))
    }

    fn is_noun(&self, tok: &str) -> bool {
        self.is_content(tok) && !self.is_verb_like(tok) && !self.adjectives.contains(tok)
    }

    fn is_plural_noun(&self, tok: &str) -> bool {
        self.is_noun(tok) && tok.len() > 3 && tok.ends_with('s')
    }
}

/// Pluggable span-extraction backend.
pub trait SpanExtractor {
    /// Replace pronouns by their antecedents across a turn sequence.
    fn resolve_coreferences(&self, turns: &[DialogueTurn]) -> Vec<DialogueTurn>;
    /// Extract deduplicated lexical spans from one (resolved) turn.
    fn extract_spans(&self, turn: &DialogueTurn) -> Vec<LexicalSpan>;
}

/// The default deterministic rule pipeline.
#[derive(Debug, Clone, Default)]
pub struct RuleSpanExtractor {
    pub cfg: SpanExtractionConfig,
}

impl RuleSpanExtractor {
    pub fn new(cfg: SpanExtractionConfig) -> Self {
        RuleSpanExtractor { cfg }
    }

    /// Span extraction over an arbitrary token slice (used for answer-only
    /// spans, where no question tokens participate).
    pub fn extract_spans_of_tokens(&self, tokens: &[String], turn_index: usize) -> Vec<LexicalSpan> {
        let cfg = &self.cfg;
        let mut spans: Vec<LexicalSpan> = Vec::new();
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, spans: &mut Vec<LexicalSpan>| {
            while !run.is_empty() {
                let take = run.len().min(cfg.max_span_len);
                let chunk: Vec<String> = run.drain(..take).collect();
                let kind = self.classify(&chunk);
                let span = LexicalSpan::new(turn_index, chunk, kind);
                if !spans.contains(&span) {
                    spans.push(span);
                }
            }
        };
        for tok in tokens {
            if cfg.is_content(tok) {
                run.push(tok.clone());
            } else {
                flush(&mut run, &mut spans);
            }
        }
        flush(&mut run, &mut spans);
        spans
    }

    fn classify(&self, tokens: &[String]) -> SpanKind {
        if tokens.iter().any(|t| self.cfg.is_verb_like(t)) {
            SpanKind::Action
        } else if tokens.iter().all(|t| self.cfg.adjectives.contains(t)) {
            SpanKind::Attribute
        } else {
            SpanKind::Entity
        }
    }

    fn resolve_segment(
        &self,
        tokens: &[String],
        candidates: &[Antecedent],
    ) -> (Vec<String>, Vec<Antecedent>) {
        let cfg = &self.cfg;
        let mut out = Vec::with_capacity(tokens.len());
        let mut found: Vec<Antecedent> = Vec::new();
        for tok in tokens {
            if cfg.is_pronoun(tok) {
                // Candidates from this same segment are deliberately not
                // visible; antecedent search looks at preceding text only.
                match nearest_compatible(tok, candidates, cfg) {
                    Some(head) => {
                        out.push("the".to_string());
                        out.push(head);
                    }
                    None => out.push(tok.clone()),
                }
            } else {
                if cfg.is_noun(tok) {
                    found.push(Antecedent {
                        head: tok.clone(),
                        person: cfg.person_nouns.contains(tok),
                        plural: cfg.is_plural_noun(tok),
                    });
                }
                out.push(tok.clone());
            }
        }
        (out, found)
    }
}

#[derive(Debug, Clone)]
struct Antecedent {
    head: String,
    person: bool,
    plural: bool,
}

fn nearest_compatible(
    pronoun: &str,
    candidates: &[Antecedent],
    _cfg: &SpanExtractionConfig,
) -> Option<String> {
    let pick = |pred: &dyn Fn(&Antecedent) -> bool| {
        candidates.iter().rev().find(|a| pred(a)).map(|a| a.head.clone())
    };
    match pronoun {
        "he" | "she" | "him" | "her" | "his" => pick(&|a| a.person && !a.plural),
        "it" | "its" => pick(&|a| !a.person && !a.plural),
        "they" | "them" | "their" => pick(&|a| a.plural),
        _ => pick(&|a| !a.plural),
    }
}

impl SpanExtractor for RuleSpanExtractor {
    fn resolve_coreferences(&self, turns: &[DialogueTurn]) -> Vec<DialogueTurn> {
        let mut candidates: Vec<Antecedent> = Vec::new();
        let mut out = Vec::with_capacity(turns.len());
        for turn in turns {
            let (q, q_found) = self.resolve_segment(&turn.question, &candidates);
            candidates.extend(q_found);
            let (a, a_found) = self.resolve_segment(&turn.answer, &candidates);
            candidates.extend(a_found);
            out.push(DialogueTurn {
                turn_index: turn.turn_index,
                question: q,
                answer: a,
            });
        }
        out
    }

    fn extract_spans(&self, turn: &DialogueTurn) -> Vec<LexicalSpan> {
        self.extract_spans_of_tokens(&turn.all_tokens(), turn.turn_index)
    }
}
