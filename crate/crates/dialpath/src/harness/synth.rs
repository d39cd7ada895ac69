//! Synthetic dialogue corpora with planted reasoning chains.
//!
//! Each dialogue ends in a current question whose answer depends on spans
//! found along a known chain of earlier turns:
//!
//! - 1 hop: `is there a {E} in the video ?` — the answer (`yes i see one` /
//!   `no i do not see one`) carries no spans and depends on whether the
//!   entity's signature was planted in the visual grid, so the gold path
//!   stays `[t]`.
//! - 2 hops: the question names a bridge entity whose attribute fact lives
//!   in one earlier turn; the answer is the attribute pair.
//! - 3 hops: the question asks about "the thing beside" the bridge entity;
//!   a bridge turn links it to a second entity whose attribute fact lives
//!   deeper in the context.
//!
//! Decoy turns make the graph non-trivial: one shares the question's decoy
//! entity, one echoes the bridge entity without carrying answer content.
//! Remaining turns are pure distractors over entities unique to that turn,
//! so they stay disconnected. Chain positions are recency-biased, matching
//! the short-hop structure of real dialogue benchmarks.
//!
//! Word vectors are generated per corpus: entity/attribute words get
//! mutually quasi-orthogonal unit vectors (rejection sampled), so span
//! similarity reduces to exact lexical match at the default threshold and
//! the planted graph is exactly recoverable. Grid regions carry entity
//! signature vectors (the entity's own word vector) plus noise.

use crate::dialogue::{Corpus, Dialogue, DialogueTurn};
use crate::embeddings::{cosine, EmbeddingTable, OovStrategy};
use crate::oracle::ReasoningPath;
use crate::propagation::VisualFeatureGrid;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("hop distribution must sum to 1, got {0}")]
    InvalidDistribution(f64),
    #[error("infeasible config: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub n_train: usize,
    pub n_val: usize,
    /// Inclusive range of turns per dialogue; the last turn is current.
    pub turns_min: usize,
    pub turns_max: usize,
    pub entity_pool: usize,
    pub attribute_pool: usize,
    /// Probabilities of 1-, 2- and 3-hop questions.
    pub hop_distribution: [f64; 3],
    /// Probability that a filler turn is a pure distractor rather than a
    /// decoy (decoys share an entity with the question or the bridge).
    pub distractor_rate: f64,
    /// Upper bound on generated vocabulary (template + entity + attribute
    /// words).
    pub vocab_size: usize,
    pub grid_regions: usize,
    /// Word-vector and visual-token dimension.
    pub d_w: usize,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            n_train: 500,
            n_val: 100,
            turns_min: 4,
            turns_max: 8,
            entity_pool: 24,
            attribute_pool: 12,
            hop_distribution: [0.1, 0.55, 0.35],
            distractor_rate: 0.4,
            vocab_size: 160,
            grid_regions: 12,
            d_w: 48,
            seed: 7,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let sum: f64 = self.hop_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::InvalidDistribution(sum));
        }
        if self.hop_distribution.iter().any(|&p| p < 0.0) {
            return Err(SynthError::InvalidDistribution(sum));
        }
        let max_hops = (1..=3)
            .filter(|&k| self.hop_distribution[k - 1] > 0.0)
            .max()
            .unwrap_or(1);
        if self.turns_min < max_hops {
            return Err(SynthError::Infeasible(format!(
                "{max_hops}-hop chains do not fit in {} turns",
                self.turns_min
            )));
        }
        if self.turns_min < 1 || self.turns_max < self.turns_min {
            return Err(SynthError::Infeasible("empty turn range".into()));
        }
        if self.turns_max > crate::dialogue::DEFAULT_MAX_TURNS {
            return Err(SynthError::Infeasible(format!(
                "turns_max {} exceeds the dialogue maximum",
                self.turns_max
            )));
        }
        if self.entity_pool < self.turns_max + 2 {
            return Err(SynthError::Infeasible(format!(
                "entity pool {} too small for {} turns",
                self.entity_pool, self.turns_max
            )));
        }
        if self.attribute_pool < 2 || self.grid_regions < 4 {
            return Err(SynthError::Infeasible("pools too small".into()));
        }
        let needed = self.entity_pool + self.attribute_pool + TEMPLATE_WORDS.len();
        if needed > self.vocab_size {
            return Err(SynthError::Infeasible(format!(
                "vocabulary budget {} below the {needed} generated words",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

const TEMPLATE_WORDS: &[&str] = &[
    "is", "there", "a", "in", "the", "video", "?", "yes", "i", "see", "one", "no", "do", "not",
    "what", "color", "near", "thing", "beside", "does", "look", "like", "you", "think", "seems",
    "fine", "ok", "maybe", "it", "can", "about", "know", "somewhere",
];

/// Per-dialogue supervision emitted alongside the corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedGold {
    pub dialogue_id: String,
    pub turn: usize,
    pub path: Vec<usize>,
    pub hops: usize,
}

/// A generated benchmark: train/val corpora sharing one vocabulary,
/// embedding table and grid collection.
pub struct SyntheticBenchmark {
    pub train: Corpus,
    pub val: Corpus,
    pub gold: BTreeMap<String, PlantedGold>,
    pub grids: BTreeMap<String, VisualFeatureGrid>,
    pub table: EmbeddingTable,
    /// Generated attribute words (extend the adjective lexicon so span
    /// kinds classify them as attributes).
    pub attributes: Vec<String>,
    pub entities: Vec<String>,
}

impl PlantedGold {
    pub fn reasoning_path(&self) -> ReasoningPath {
        ReasoningPath::new(self.path.clone(), true)
    }
}

fn mix(a: u64, b: u64, c: u64) -> u64 {
    let mut x = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(c);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 29)
}

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).expect("non-empty"));
        w.push(*VOWELS.choose(rng).expect("non-empty"));
    }
    w
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Generate pool words with mutually quasi-orthogonal vectors so exact
/// lexical match is the only similarity source at the default threshold.
fn gen_pool(
    rng: &mut ChaCha8Rng,
    count: usize,
    taken: &mut BTreeSet<String>,
    table: &mut EmbeddingTable,
    anchors: &mut Vec<Vec<f64>>,
    d: usize,
) -> Vec<String> {
    let lexicon_guard = crate::spans::SpanExtractionConfig::default();
    let mut words = Vec::with_capacity(count);
    while words.len() < count {
        let w = pseudo_word(rng, if words.len() % 3 == 0 { 3 } else { 2 });
        if taken.contains(&w)
            || lexicon_guard.stopwords.contains(&w)
            || lexicon_guard.pronouns.contains(&w)
            || lexicon_guard.verbs.contains(&w)
            || lexicon_guard.adjectives.contains(&w)
            || lexicon_guard.person_nouns.contains(&w)
        {
            continue;
        }
        let mut vector = unit_vector(rng, d);
        let mut tries = 0;
        while anchors
            .iter()
            .any(|a| cosine(a, &vector).expect("same dim").abs() >= 0.35)
        {
            vector = unit_vector(rng, d);
            tries += 1;
            assert!(tries < 10_000, "vector rejection sampling stuck");
        }
        taken.insert(w.clone());
        table.insert(&w, vector.clone());
        anchors.push(vector);
        words.push(w);
    }
    words
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FillerRole {
    DecoyQuestionEntity,
    EchoBridgeEntity,
    PureDistractor,
}

pub fn gen_synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<SyntheticBenchmark, SynthError> {
    cfg.validate()?;
    let d = cfg.d_w;

    // vocabulary and vectors are shared across both splits
    let mut word_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0xE0, 0));
    let mut table = EmbeddingTable::new(d, OovStrategy::HashProjection);
    let mut taken: BTreeSet<String> = TEMPLATE_WORDS.iter().map(|w| w.to_string()).collect();
    let mut anchors: Vec<Vec<f64>> = Vec::new();
    // "color" is the one content-bearing template word; anchor it so no
    // generated vector collides with it
    let color_vec = unit_vector(&mut word_rng, d);
    table.insert("color", color_vec.clone());
    anchors.push(color_vec);
    let entities = gen_pool(&mut word_rng, cfg.entity_pool, &mut taken, &mut table, &mut anchors, d);
    let attributes = gen_pool(
        &mut word_rng,
        cfg.attribute_pool,
        &mut taken,
        &mut table,
        &mut anchors,
        d,
    );
    for w in TEMPLATE_WORDS {
        if *w != "color" && !table.contains(w) {
            table.insert(w, unit_vector(&mut word_rng, d));
        }
    }

    let mut gold = BTreeMap::new();
    let mut grids = BTreeMap::new();
    let mut splits = Vec::new();
    for (split_salt, split_name, count) in [(1u64, "train", cfg.n_train), (2u64, "val", cfg.n_val)]
    {
        let mut dialogues = Vec::with_capacity(count);
        for idx in 0..count {
            let id = format!("{split_name}{idx:04}");
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, split_salt, idx as u64));
            let (dialogue, planted, grid) =
                gen_dialogue(cfg, &id, &entities, &attributes, &table, &mut rng);
            gold.insert(id.clone(), planted);
            grids.insert(grid.source_id.clone(), grid);
            dialogues.push(dialogue);
        }
        splits.push(Corpus { dialogues });
    }
    let val = splits.pop().expect("two splits");
    let train = splits.pop().expect("two splits");
    Ok(SyntheticBenchmark {
        train,
        val,
        gold,
        grids,
        table,
        attributes,
        entities,
    })
}

fn sample_hops(rng: &mut ChaCha8Rng, dist: &[f64; 3]) -> usize {
    let weighted = WeightedIndex::new(dist.iter().copied()).expect("validated distribution");
    weighted.sample(rng) + 1
}

/// Recency-biased position pick from `lo..=hi`: the latest slot gets 0.75,
/// the one before 0.15, the rest share the remainder uniformly. Real
/// dialogue chains hop mostly to recent turns; the bias also separates the
/// fixed last-n baselines from random walks.
fn pick_position(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    assert!(lo <= hi);
    let candidates: Vec<usize> = (lo..=hi).rev().collect();
    if candidates.len() == 1 {
        return candidates[0];
    }
    let mut weights = vec![0.0; candidates.len()];
    weights[0] = 0.75;
    weights[1] = 0.15;
    if candidates.len() > 2 {
        let rest = 0.10 / (candidates.len() - 2) as f64;
        for w in weights.iter_mut().skip(2) {
            *w = rest;
        }
    } else {
        weights[1] += 0.10;
    }
    let weighted = WeightedIndex::new(weights).expect("positive weights");
    candidates[weighted.sample(rng)]
}

fn gen_dialogue(
    cfg: &SyntheticCorpusConfig,
    id: &str,
    entities: &[String],
    attributes: &[String],
    table: &EmbeddingTable,
    rng: &mut ChaCha8Rng,
) -> (Dialogue, PlantedGold, VisualFeatureGrid) {
    let t_count = rng.gen_range(cfg.turns_min..=cfg.turns_max);
    let hops = loop {
        let k = sample_hops(rng, &cfg.hop_distribution);
        if t_count >= k {
            break k;
        }
    };

    let mut entity_order: Vec<&String> = entities.iter().collect();
    entity_order.shuffle(rng);
    let mut next_entity = entity_order.into_iter();
    let mut fresh = || next_entity.next().expect("entity pool validated").clone();

    let e_main = fresh(); // E0 for 1-hop, bridge entity otherwise
    let e_deep = fresh(); // second chain entity (3-hop)
    let e_decoy = fresh();
    // one attribute per chain: mean-pooled turn representations are
    // order-free, so multi-attribute answers would not be decodable
    let attr = &attributes[rng.gen_range(0..attributes.len())];

    // chain positions, recency biased
    let (j1, j2) = match hops {
        1 => (None, None),
        2 => (Some(pick_position(rng, 1, t_count - 1)), None),
        _ => {
            let j1 = pick_position(rng, 2, t_count - 1);
            let j2 = pick_position(rng, 1, j1 - 1);
            (Some(j1), Some(j2))
        }
    };

    // assign filler roles
    let mut filler_slots: Vec<usize> = (1..t_count)
        .filter(|p| Some(*p) != j1 && Some(*p) != j2)
        .collect();
    filler_slots.shuffle(rng);
    // decoys repeat the question's side entity and interconnect, forming a
    // dead-end web that dilutes random walks; one echo repeats the bridge
    // entity so the decoder must discriminate between two lexically equal
    // first hops
    let mut quota: Vec<FillerRole> = if hops == 1 {
        vec![
            FillerRole::DecoyQuestionEntity,
            FillerRole::DecoyQuestionEntity,
        ]
    } else {
        vec![
            FillerRole::DecoyQuestionEntity,
            FillerRole::EchoBridgeEntity,
            FillerRole::DecoyQuestionEntity,
            FillerRole::DecoyQuestionEntity,
        ]
    };
    let mut roles: BTreeMap<usize, (FillerRole, String)> = BTreeMap::new();
    for &slot in &filler_slots {
        let role = if !quota.is_empty() && !rng.gen_bool(cfg.distractor_rate) {
            quota.remove(0)
        } else {
            FillerRole::PureDistractor
        };
        let entity = match role {
            // the 1-hop decoy repeats the questioned entity itself so the
            // graph has an edge the decoder must learn to skip
            FillerRole::DecoyQuestionEntity if hops == 1 => e_main.clone(),
            FillerRole::DecoyQuestionEntity => e_decoy.clone(),
            FillerRole::EchoBridgeEntity => e_main.clone(),
            FillerRole::PureDistractor => fresh(),
        };
        roles.insert(slot, (role, entity));
    }

    let entity_present = hops > 1 || rng.gen_bool(0.5);

    // build turn text
    let mut turns = Vec::with_capacity(t_count);
    for pos in 1..=t_count {
        let (q, a) = if pos == t_count {
            current_turn_text(hops, &e_main, &e_deep, &e_decoy, attr, entity_present)
        } else if Some(pos) == j1 && hops == 2 {
            (
                format!("what does the {e_main} look like ?"),
                format!("the {e_main} is {attr}"),
            )
        } else if Some(pos) == j1 && hops == 3 {
            (
                format!("what is beside the {e_main} ?"),
                format!("the {e_deep} is beside the {e_main}"),
            )
        } else if Some(pos) == j2 {
            (
                format!("what does the {e_deep} look like ?"),
                format!("the {e_deep} is {attr}"),
            )
        } else {
            let (role, entity) = &roles[&pos];
            filler_turn_text(*role, entity, rng)
        };
        turns.push(DialogueTurn::new(pos, &q, &a));
    }

    // visual grid: plant signatures of the chain entities (and the decoy);
    // for 1-hop dialogues the questioned entity appears iff the answer is
    // yes
    let mut planted: Vec<&String> = Vec::new();
    if hops == 1 {
        if entity_present {
            // redundant planting makes presence detection robust
            planted.push(&e_main);
            planted.push(&e_main);
        }
    } else {
        planted.push(&e_main);
        planted.push(&e_decoy);
        if hops == 3 {
            planted.push(&e_deep);
        }
    }
    let mut region_ids: Vec<usize> = (0..cfg.grid_regions).collect();
    region_ids.shuffle(rng);
    let mut tokens = Vec::with_capacity(cfg.grid_regions * cfg.d_w);
    for _ in 0..cfg.grid_regions {
        tokens.extend(unit_vector(rng, cfg.d_w).into_iter().map(|x| x * 0.12));
    }
    for (slot, entity) in region_ids.iter().zip(&planted) {
        let signature = table.vector(entity);
        let noise = unit_vector(rng, cfg.d_w);
        for (j, (s, n)) in signature.iter().zip(&noise).enumerate() {
            tokens[slot * cfg.d_w + j] = s + 0.1 * n;
        }
    }
    let video_ref = format!("{id}_vid");
    let grid = VisualFeatureGrid::new(&video_ref, cfg.grid_regions, cfg.d_w, tokens);

    let mut path = vec![t_count];
    if let Some(j) = j1 {
        path.push(j);
    }
    if let Some(j) = j2 {
        path.push(j);
    }
    let planted_gold = PlantedGold {
        dialogue_id: id.to_string(),
        turn: t_count,
        path,
        hops,
    };
    let dialogue = Dialogue {
        id: id.to_string(),
        turns,
        video_ref: Some(video_ref),
    };
    (dialogue, planted_gold, grid)
}

fn current_turn_text(
    hops: usize,
    e_main: &str,
    e_deep: &str,
    e_decoy: &str,
    attr: &str,
    entity_present: bool,
) -> (String, String) {
    match hops {
        1 => (
            format!("is there a {e_main} in the video ?"),
            if entity_present { "yes" } else { "no" }.to_string(),
        ),
        2 => (
            format!("what color is the {e_main} near the {e_decoy} ?"),
            attr.to_string(),
        ),
        _ => (
            format!("what color is the thing beside the {e_main} near the {e_decoy} ?"),
            format!("the {e_deep} is {attr}"),
        ),
    }
}

fn filler_turn_text(role: FillerRole, entity: &str, rng: &mut ChaCha8Rng) -> (String, String) {
    match role {
        FillerRole::DecoyQuestionEntity => match rng.gen_range(0..3) {
            0 => (
                format!("do you see a {entity} ?"),
                format!("yes there is a {entity} there"),
            ),
            1 => (
                format!("is there a {entity} ?"),
                format!("i think i see a {entity}"),
            ),
            _ => (
                format!("can you see the {entity} ?"),
                format!("yes the {entity} is there"),
            ),
        },
        FillerRole::EchoBridgeEntity => (
            format!("is the {entity} in the video ?"),
            format!("i think the {entity} is there"),
        ),
        FillerRole::PureDistractor => match rng.gen_range(0..4) {
            0 => (
                format!("do you like the {entity} ?"),
                format!("the {entity} seems fine"),
            ),
            1 => (format!("is the {entity} ok ?"), "maybe it is ok".to_string()),
            2 => (
                format!("can you see a {entity} ?"),
                format!("there is a {entity} somewhere"),
            ),
            _ => (
                format!("what about the {entity} ?"),
                format!("i do not know about the {entity}"),
            ),
        },
    }
}
