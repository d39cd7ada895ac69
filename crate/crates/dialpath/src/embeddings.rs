//! Word-vector tables, span embedding and the `is_similar` predicate that
//! drives semantic-graph edge construction.
//!
//! Vector files are plain text, one `token v1 v2 ... vd` line each. A span
//! embeds as the arithmetic mean of its token vectors. Out-of-vocabulary
//! tokens either embed to zero or to a deterministic pseudo-random unit
//! vector derived from the token bytes (FNV-1a seed into ChaCha8), which is
//! stable across runs, processes and platforms.

use crate::spans::LexicalSpan;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse component {component:?}")]
    Parse { line: usize, component: String },
    #[error("line {line}: expected {expected} components, got {got}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: vector has a non-finite component")]
    NonFinite { line: usize },
    #[error("cosine of vectors with dimensions {left} and {right}")]
    CosineDimension { left: usize, right: usize },
}

/// How tokens without a stored vector embed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovStrategy {
    /// Deterministic pseudo-random unit vector seeded by the token bytes.
    HashProjection,
    /// All-zeros vector (still counted in span means).
    Zero,
}

/// A fixed word-vector table of dimension `dim`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    pub oov: OovStrategy,
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov: OovStrategy) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            oov,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector dimension mismatch");
        self.vectors.insert(token.to_string(), vector);
    }

    /// Load a vector file. The first line fixes the dimension.
    pub fn load(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
        let text = std::fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a token");
            let mut vector = Vec::new();
            for component in parts {
                let v: f64 = component.parse().map_err(|_| EmbeddingError::Parse {
                    line: lineno,
                    component: component.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(EmbeddingError::NonFinite { line: lineno });
                }
                vector.push(v);
            }
            match &mut table {
                None => {
                    if vector.is_empty() {
                        return Err(EmbeddingError::DimensionMismatch {
                            line: lineno,
                            expected: 1,
                            got: 0,
                        });
                    }
                    let mut t = EmbeddingTable::new(vector.len(), OovStrategy::HashProjection);
                    t.insert(token, vector);
                    table = Some(t);
                }
                Some(t) => {
                    if vector.len() != t.dim {
                        return Err(EmbeddingError::DimensionMismatch {
                            line: lineno,
                            expected: t.dim,
                            got: vector.len(),
                        });
                    }
                    t.insert(token, vector);
                }
            }
        }
        table.ok_or(EmbeddingError::DimensionMismatch {
            line: 0,
            expected: 1,
            got: 0,
        })
    }

    /// Save in the same text format (tokens sorted, deterministic bytes).
    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut out = String::new();
        for t in tokens {
            out.push_str(t);
            for v in &self.vectors[t] {
                out.push(' ');
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Vector for one token, applying the OOV strategy when absent.
    pub fn vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.vectors.get(token) {
            return v.clone();
        }
        match self.oov {
            OovStrategy::Zero => vec![0.0; self.dim],
            OovStrategy::HashProjection => hash_projection(token, self.dim),
        }
    }

    /// Mean of the token vectors; zero vector for an empty slice.
    pub fn embed_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        if tokens.is_empty() {
            return acc;
        }
        for tok in tokens {
            let v = self.vector(tok);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x;
            }
        }
        let n = tokens.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        acc
    }

    pub fn embed_span(&self, span: &LexicalSpan) -> Vec<f64> {
        self.embed_tokens(&span.tokens)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic pseudo-random unit vector for an OOV token.
pub fn hash_projection(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token.as_bytes()));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::CosineDimension {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Edge predicate: token-identical spans always match; otherwise cosine of
/// the span means against the threshold.
pub fn is_similar(a: &LexicalSpan, b: &LexicalSpan, table: &EmbeddingTable, tau: f64) -> bool {
    if a.tokens == b.tokens {
        return true;
    }
    let ea = table.embed_span(a);
    let eb = table.embed_span(b);
    cosine(&ea, &eb).map(|c| c >= tau).unwrap_or(false)
}
