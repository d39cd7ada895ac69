//! Transformer attention blocks and the sinusoidal positional encoding.
//!
//! A block is post-layer-norm: multi-head scaled dot-product attention with
//! residual, then a two-layer feed-forward of width `4d` with residual,
//! each followed by layer normalization. Optional attention masks replace
//! disallowed scores with `S_MASKED` before the softmax.

use super::params::{Param, ParamSet};
use super::tensor::Tensor;
use super::NnError;
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

/// Default "very low scalar" substituted for masked scores.
pub const S_MASKED: f64 = -1e9;

pub const LN_EPS: f64 = 1e-5;

/// Dropout context threaded through training forwards; absent at
/// evaluation.
pub struct TrainMode<'a> {
    pub dropout: f64,
    pub rng: &'a mut ChaCha8Rng,
}

pub(crate) fn apply_dropout(x: &Tensor, mode: &mut Option<TrainMode>) -> Tensor {
    match mode {
        Some(m) if m.dropout > 0.0 => x.dropout(m.dropout, m.rng),
        _ => x.clone(),
    }
}

/// Parameters of one attention block.
pub struct AttentionBlockParams {
    pub d: usize,
    pub heads: usize,
    pub wq: Rc<Param>,
    pub wk: Rc<Param>,
    pub wv: Rc<Param>,
    pub wo: Rc<Param>,
    pub ln1_g: Rc<Param>,
    pub ln1_b: Rc<Param>,
    pub ff_w1: Rc<Param>,
    pub ff_b1: Rc<Param>,
    pub ff_w2: Rc<Param>,
    pub ff_b2: Rc<Param>,
    pub ln2_g: Rc<Param>,
    pub ln2_b: Rc<Param>,
}

impl AttentionBlockParams {
    pub fn new(
        ps: &mut ParamSet,
        prefix: &str,
        d: usize,
        heads: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(d % heads == 0, "width {d} not divisible by {heads} heads");
        let name = |suffix: &str| format!("{prefix}.{suffix}");
        AttentionBlockParams {
            d,
            heads,
            wq: ps.add(&name("wq"), d, d, rng),
            wk: ps.add(&name("wk"), d, d, rng),
            wv: ps.add(&name("wv"), d, d, rng),
            wo: ps.add(&name("wo"), d, d, rng),
            ln1_g: ps.add_const(&name("ln1_g"), 1, d, 1.0),
            ln1_b: ps.add_const(&name("ln1_b"), 1, d, 0.0),
            ff_w1: ps.add(&name("ff_w1"), d, 4 * d, rng),
            ff_b1: ps.add_const(&name("ff_b1"), 1, 4 * d, 0.0),
            ff_w2: ps.add(&name("ff_w2"), 4 * d, d, rng),
            ff_b2: ps.add_const(&name("ff_b2"), 1, d, 0.0),
            ln2_g: ps.add_const(&name("ln2_g"), 1, d, 1.0),
            ln2_b: ps.add_const(&name("ln2_b"), 1, d, 0.0),
        }
    }
}

/// Multi-head attention, returning the per-head attention probabilities
/// (each `Lq x Lk`) alongside the output.
pub fn multi_head_attention_with_probs(
    query: &Tensor,
    key: &Tensor,
    value: &Tensor,
    params: &AttentionBlockParams,
    allowed: Option<&[bool]>,
) -> (Tensor, Vec<Tensor>) {
    let d = params.d;
    let dh = d / params.heads;
    let q = query.matmul(&params.wq.tensor());
    let k = key.matmul(&params.wk.tensor());
    let v = value.matmul(&params.wv.tensor());
    let scale = 1.0 / (dh as f64).sqrt();
    let mut head_outputs = Vec::with_capacity(params.heads);
    let mut head_probs = Vec::with_capacity(params.heads);
    for h in 0..params.heads {
        let qh = q.col_slice(h * dh, dh);
        let kh = k.col_slice(h * dh, dh);
        let vh = v.col_slice(h * dh, dh);
        let scores = qh.matmul(&kh.transpose()).scale(scale);
        let probs = match allowed {
            Some(mask) => scores.masked_softmax_rows(mask, S_MASKED),
            None => scores.softmax_rows(),
        };
        head_outputs.push(probs.matmul(&vh));
        head_probs.push(probs);
    }
    let mut concat = head_outputs[0].clone();
    for out in &head_outputs[1..] {
        concat = concat.concat_cols(out);
    }
    (concat.matmul(&params.wo.tensor()), head_probs)
}

pub fn multi_head_attention(
    query: &Tensor,
    key: &Tensor,
    value: &Tensor,
    params: &AttentionBlockParams,
    allowed: Option<&[bool]>,
) -> Tensor {
    multi_head_attention_with_probs(query, key, value, params, allowed).0
}

/// One post-LN transformer block: attention + residual + layer norm, then
/// feed-forward + residual + layer norm. `allowed`, when present, is an
/// `Lq x Lk` row-major keep-mask on attention scores.
pub fn transformer_block(
    query: &Tensor,
    key: &Tensor,
    value: &Tensor,
    params: &AttentionBlockParams,
    allowed: Option<&[bool]>,
    mode: &mut Option<TrainMode>,
) -> Result<Tensor, NnError> {
    transformer_block_with_probs(query, key, value, params, allowed, mode).map(|(out, _)| out)
}

/// [`transformer_block`] that also returns the per-head attention
/// probabilities for inspection.
pub fn transformer_block_with_probs(
    query: &Tensor,
    key: &Tensor,
    value: &Tensor,
    params: &AttentionBlockParams,
    allowed: Option<&[bool]>,
    mode: &mut Option<TrainMode>,
) -> Result<(Tensor, Vec<Tensor>), NnError> {
    let d = params.d;
    for (tensor, what) in [(query, "query"), (key, "key"), (value, "value")] {
        if tensor.cols() != d {
            return Err(NnError::WidthMismatch {
                expected: d,
                got: tensor.cols(),
                context: format!("transformer_block {what} width"),
            });
        }
    }
    if key.rows() != value.rows() {
        return Err(NnError::WidthMismatch {
            expected: key.rows(),
            got: value.rows(),
            context: "transformer_block key/value length".into(),
        });
    }
    if let Some(mask) = allowed {
        if mask.len() != query.rows() * key.rows() {
            return Err(NnError::WidthMismatch {
                expected: query.rows() * key.rows(),
                got: mask.len(),
                context: "transformer_block attention mask".into(),
            });
        }
    }

    let (attn, probs) = multi_head_attention_with_probs(query, key, value, params, allowed);
    let attn = apply_dropout(&attn, mode);
    let x = query
        .add(&attn)
        .layer_norm(&params.ln1_g.tensor(), &params.ln1_b.tensor(), LN_EPS);
    let ff = x
        .matmul(&params.ff_w1.tensor())
        .add_row(&params.ff_b1.tensor())
        .relu()
        .matmul(&params.ff_w2.tensor())
        .add_row(&params.ff_b2.tensor());
    let ff = apply_dropout(&ff, mode);
    let out = x
        .add(&ff)
        .layer_norm(&params.ln2_g.tensor(), &params.ln2_b.tensor(), LN_EPS);
    Ok((out, probs))
}

/// Lower-triangular keep-mask for causal self-attention over `len`
/// positions.
pub fn causal_mask(len: usize) -> Vec<bool> {
    let mut mask = vec![false; len * len];
    for i in 0..len {
        for j in 0..=i {
            mask[i * len + j] = true;
        }
    }
    mask
}

/// Sinusoidal positional encoding table (`len x d`, constant). Pairs of
/// columns hold `sin(pos / 10000^(2i/d))` and `cos(pos / 10000^(2i/d))`.
pub fn pos_encode(len: usize, d: usize) -> Result<Tensor, NnError> {
    if d % 2 != 0 {
        return Err(NnError::OddWidth(d));
    }
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d / 2 {
            let rate = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            let angle = pos as f64 * rate;
            data[pos * d + 2 * i] = angle.sin();
            data[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Tensor::constant(len, d, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn block(d: usize, heads: usize, seed: u64) -> (ParamSet, AttentionBlockParams) {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = AttentionBlockParams::new(&mut ps, "blk", d, heads, &mut rng);
        (ps, params)
    }

    #[test]
    fn shape_contract_single_position() {
        let (_ps, params) = block(4, 1, 3);
        let x = Tensor::constant(1, 4, vec![0.1, -0.2, 0.3, 0.4]);
        let y = transformer_block(&x, &x, &x, &params, None, &mut None).unwrap();
        assert_eq!(y.shape(), (1, 4));
        assert!(y.is_finite());
    }

    #[test]
    fn attention_weights_sum_to_one() {
        let (_ps, params) = block(8, 2, 4);
        let q = Tensor::constant(3, 8, (0..24).map(|i| (i as f64) * 0.05).collect());
        let k = Tensor::constant(5, 8, (0..40).map(|i| (i as f64) * -0.03).collect());
        let (_, probs) = multi_head_attention_with_probs(&q, &k, &k, &params, None);
        assert_eq!(probs.len(), 2);
        for p in probs {
            assert_eq!(p.shape(), (3, 5));
            for i in 0..3 {
                let sum: f64 = p.row(i).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(p.row(i).iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn width_mismatch_rejected() {
        let (_ps, params) = block(4, 1, 5);
        let x = Tensor::constant(1, 6, vec![0.0; 6]);
        assert!(matches!(
            transformer_block(&x, &x, &x, &params, None, &mut None),
            Err(NnError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn causal_mask_shape() {
        let m = causal_mask(3);
        assert_eq!(
            m,
            vec![true, false, false, true, true, false, true, true, true]
        );
    }

    #[test]
    fn pos_encode_known_rows() {
        let pe = pos_encode(3, 4).unwrap();
        // position 0 alternates sin(0)=0, cos(0)=1
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        // position 1, d=4: [sin(1), cos(1), sin(1/100), cos(1/100)]
        let expected = [1f64.sin(), 1f64.cos(), 0.01f64.sin(), 0.01f64.cos()];
        for (a, b) in pe.row(1).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(matches!(pos_encode(2, 5), Err(NnError::OddWidth(5))));
    }

    /// Dual-implementation oracle: a straight-line, loop-based
    /// re-computation of the block forward on a fixed 3x4 input must match
    /// the tape version within 1e-10.
    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let d = 4;
        let (_ps, params) = block(d, 1, 6);
        let input: Vec<f64> = (0..12).map(|i| ((i as f64) * 0.37).sin()).collect();
        let x = Tensor::constant(3, d, input.clone());
        let got = transformer_block(&x, &x, &x, &params, None, &mut None).unwrap();

        // independent re-computation with plain loops
        let w = |p: &Rc<Param>| p.values();
        let mm = |a: &[f64], b: &[f64], m: usize, k: usize, n: usize| {
            let mut c = vec![0.0; m * n];
            for i in 0..m {
                for kk in 0..k {
                    for j in 0..n {
                        c[i * n + j] += a[i * k + kk] * b[kk * n + j];
                    }
                }
            }
            c
        };
        let (m, dd) = (3usize, d);
        let q = mm(&input, &w(&params.wq), m, dd, dd);
        let k = mm(&input, &w(&params.wk), m, dd, dd);
        let v = mm(&input, &w(&params.wv), m, dd, dd);
        let scale = 1.0 / (dd as f64).sqrt();
        let mut probs = vec![0.0; m * m];
        for i in 0..m {
            let mut row = vec![0.0; m];
            for j in 0..m {
                let mut s = 0.0;
                for c in 0..dd {
                    s += q[i * dd + c] * k[j * dd + c];
                }
                row[j] = s * scale;
            }
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - mx).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for j in 0..m {
                probs[i * m + j] = exps[j] / denom;
            }
        }
        let attn = mm(&probs, &v, m, m, dd);
        let attn_o = mm(&attn, &w(&params.wo), m, dd, dd);
        let ln = |x: &[f64], g: &[f64], b: &[f64]| {
            let mut out = vec![0.0; x.len()];
            for i in 0..m {
                let row = &x[i * dd..(i + 1) * dd];
                let mean = row.iter().sum::<f64>() / dd as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dd as f64;
                let inv = 1.0 / (var + LN_EPS).sqrt();
                for j in 0..dd {
                    out[i * dd + j] = (row[j] - mean) * inv * g[j] + b[j];
                }
            }
            out
        };
        let res1: Vec<f64> = input.iter().zip(&attn_o).map(|(a, b)| a + b).collect();
        let x1 = ln(&res1, &w(&params.ln1_g), &w(&params.ln1_b));
        let mut h = mm(&x1, &w(&params.ff_w1), m, dd, 4 * dd);
        let b1 = w(&params.ff_b1);
        for i in 0..m {
            for j in 0..4 * dd {
                h[i * 4 * dd + j] = (h[i * 4 * dd + j] + b1[j]).max(0.0);
            }
        }
        let mut ff = mm(&h, &w(&params.ff_w2), m, 4 * dd, dd);
        let b2 = w(&params.ff_b2);
        for i in 0..m {
            for j in 0..dd {
                ff[i * dd + j] += b2[j];
            }
        }
        let res2: Vec<f64> = x1.iter().zip(&ff).map(|(a, b)| a + b).collect();
        let expected = ln(&res2, &w(&params.ln2_g), &w(&params.ln2_b));

        for (a, b) in got.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
