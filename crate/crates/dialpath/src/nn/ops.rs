//! Differentiable tensor operations. Shape preconditions are programming
//! errors and assert; the spec-level entry points that can fail on user
//! input (masked softmax, losses, blocks) return `Result`.

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use super::NnError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "add: shape mismatch");
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a + b)
            .collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b += g;
                    }
                });
                grads.accumulate(&node.parents[1], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b += g;
                    }
                });
            }),
        )
    }

    /// Broadcast-add a 1 x n row to every row.
    pub fn add_row(&self, row: &Tensor) -> Tensor {
        assert_eq!(row.rows(), 1, "add_row: row vector expected");
        assert_eq!(self.cols(), row.cols(), "add_row: width mismatch");
        let n = self.cols();
        let data = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, a)| a + row.data()[i % n])
            .collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone(), row.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b += g;
                    }
                });
                grads.accumulate(&node.parents[1], |buf| {
                    for (i, g) in out_grad.iter().enumerate() {
                        buf[i % n] += g;
                    }
                });
            }),
        )
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "sub: shape mismatch");
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a - b)
            .collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b += g;
                    }
                });
                grads.accumulate(&node.parents[1], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b -= g;
                    }
                });
            }),
        )
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "mul: shape mismatch");
        let data = self
            .data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| a * b)
            .collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|node, out_grad, grads| {
                let (a, b) = (&node.parents[0], &node.parents[1]);
                let bd = b.data().to_vec();
                grads.accumulate(a, |buf| {
                    for ((x, g), bv) in buf.iter_mut().zip(out_grad).zip(&bd) {
                        *x += g * bv;
                    }
                });
                let ad = a.data().to_vec();
                grads.accumulate(b, |buf| {
                    for ((x, g), av) in buf.iter_mut().zip(out_grad).zip(&ad) {
                        *x += g * av;
                    }
                });
            }),
        )
    }

    pub fn scale(&self, s: f64) -> Tensor {
        let data = self.data().iter().map(|a| a * s).collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (b, g) in buf.iter_mut().zip(out_grad) {
                        *b += g * s;
                    }
                });
            }),
        )
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(
            self.cols(),
            other.rows(),
            "matmul: inner dimensions differ"
        );
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        let mut data = vec![0.0; m * n];
        matmul_acc(self.data(), other.data(), &mut data, m, k, n);
        Tensor::from_op(
            m,
            n,
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |node, out_grad, grads| {
                let (a, b) = (&node.parents[0], &node.parents[1]);
                let bd = b.data().to_vec();
                grads.accumulate(a, |buf| {
                    matmul_nt_acc(out_grad, &bd, buf, m, n, k);
                });
                let ad = a.data().to_vec();
                grads.accumulate(b, |buf| {
                    matmul_tn_acc(&ad, out_grad, buf, m, k, n);
                });
            }),
        )
    }

    pub fn transpose(&self) -> Tensor {
        let (m, n) = self.shape();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.at(i, j);
            }
        }
        Tensor::from_op(
            n,
            m,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        for j in 0..n {
                            buf[i * n + j] += out_grad[j * m + i];
                        }
                    }
                });
            }),
        )
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data().iter().map(|&a| a.max(0.0)).collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone()],
            Box::new(|node, out_grad, grads| {
                let active: Vec<bool> = node.parents[0].data().iter().map(|&x| x > 0.0).collect();
                grads.accumulate(&node.parents[0], |buf| {
                    for ((b, g), a) in buf.iter_mut().zip(out_grad).zip(active) {
                        if a {
                            *b += g;
                        }
                    }
                });
            }),
        )
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&self) -> Tensor {
        let (m, n) = self.shape();
        let allowed = vec![true; m * n];
        self.masked_softmax_rows_internal(&allowed, 0.0)
    }

    /// Row-wise softmax with disallowed entries replaced by `s_masked`
    /// before normalization. Every row must keep at least one allowed
    /// entry (asserted; the public [`masked_softmax`] returns an error).
    pub fn masked_softmax_rows(&self, allowed: &[bool], s_masked: f64) -> Tensor {
        self.masked_softmax_rows_internal(allowed, s_masked)
    }

    fn masked_softmax_rows_internal(&self, allowed: &[bool], s_masked: f64) -> Tensor {
        let (m, n) = self.shape();
        assert_eq!(allowed.len(), m * n, "mask length must match tensor");
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.data()[i * n..(i + 1) * n];
            let arow = &allowed[i * n..(i + 1) * n];
            assert!(
                arow.iter().any(|&a| a),
                "softmax row {i} has all entries masked"
            );
            let logits: Vec<f64> = row
                .iter()
                .zip(arow)
                .map(|(&x, &a)| if a { x } else { s_masked })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &l) in logits.iter().enumerate() {
                let e = (l - max).exp();
                data[i * n + j] = e;
                denom += e;
            }
            for v in &mut data[i * n..(i + 1) * n] {
                *v /= denom;
            }
        }
        let allowed_cap = allowed.to_vec();
        Tensor::from_op(
            m,
            n,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                let p = &node.data;
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        let prow = &p[i * n..(i + 1) * n];
                        let grow = &out_grad[i * n..(i + 1) * n];
                        let dot: f64 = prow.iter().zip(grow).map(|(pv, gv)| pv * gv).sum();
                        for j in 0..n {
                            if allowed_cap[i * n + j] {
                                buf[i * n + j] += prow[j] * (grow[j] - dot);
                            }
                        }
                    }
                });
            }),
        )
    }

    /// Row-wise layer normalization with learnable gain and bias.
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Tensor {
        let (m, n) = self.shape();
        assert_eq!(gain.shape(), (1, n), "layer_norm: gain must be 1 x cols");
        assert_eq!(bias.shape(), (1, n), "layer_norm: bias must be 1 x cols");
        let mut data = vec![0.0; m * n];
        let mut normed = vec![0.0; m * n];
        let mut inv_sigma = vec![0.0; m];
        for i in 0..m {
            let row = &self.data()[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_sigma[i] = inv;
            for j in 0..n {
                let xh = (row[j] - mean) * inv;
                normed[i * n + j] = xh;
                data[i * n + j] = xh * gain.data()[j] + bias.data()[j];
            }
        }
        Tensor::from_op(
            m,
            n,
            data,
            vec![self.clone(), gain.clone(), bias.clone()],
            Box::new(move |node, out_grad, grads| {
                let g = node.parents[1].data().to_vec();
                grads.accumulate(&node.parents[2], |buf| {
                    for i in 0..m {
                        for j in 0..n {
                            buf[j] += out_grad[i * n + j];
                        }
                    }
                });
                grads.accumulate(&node.parents[1], |buf| {
                    for i in 0..m {
                        for j in 0..n {
                            buf[j] += out_grad[i * n + j] * normed[i * n + j];
                        }
                    }
                });
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        let xh = &normed[i * n..(i + 1) * n];
                        let dy: Vec<f64> = (0..n).map(|j| out_grad[i * n + j] * g[j]).collect();
                        let mean_dy = dy.iter().sum::<f64>() / n as f64;
                        let mean_dy_xh =
                            dy.iter().zip(xh).map(|(d, x)| d * x).sum::<f64>() / n as f64;
                        for j in 0..n {
                            buf[i * n + j] +=
                                inv_sigma[i] * (dy[j] - mean_dy - xh[j] * mean_dy_xh);
                        }
                    }
                });
            }),
        )
    }

    /// Select rows of an embedding table (scatter-add gradient).
    pub fn gather_rows(&self, ids: &[usize]) -> Tensor {
        let n = self.cols();
        let mut data = Vec::with_capacity(ids.len() * n);
        for &id in ids {
            assert!(id < self.rows(), "gather_rows: id {id} out of range");
            data.extend_from_slice(self.row(id));
        }
        let ids_cap = ids.to_vec();
        Tensor::from_op(
            ids.len(),
            n,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (i, &id) in ids_cap.iter().enumerate() {
                        for j in 0..n {
                            buf[id * n + j] += out_grad[i * n + j];
                        }
                    }
                });
            }),
        )
    }

    pub fn concat_cols(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rows(), other.rows(), "concat_cols: row mismatch");
        let (m, p, q) = (self.rows(), self.cols(), other.cols());
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Tensor::from_op(
            m,
            p + q,
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        for j in 0..p {
                            buf[i * p + j] += out_grad[i * (p + q) + j];
                        }
                    }
                });
                grads.accumulate(&node.parents[1], |buf| {
                    for i in 0..m {
                        for j in 0..q {
                            buf[i * q + j] += out_grad[i * (p + q) + p + j];
                        }
                    }
                });
            }),
        )
    }

    pub fn col_slice(&self, start: usize, len: usize) -> Tensor {
        let (m, n) = self.shape();
        assert!(start + len <= n, "col_slice out of range");
        let mut data = Vec::with_capacity(m * len);
        for i in 0..m {
            data.extend_from_slice(&self.row(i)[start..start + len]);
        }
        Tensor::from_op(
            m,
            len,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        for j in 0..len {
                            buf[i * n + start + j] += out_grad[i * len + j];
                        }
                    }
                });
            }),
        )
    }

    pub fn row_slice(&self, start: usize, len: usize) -> Tensor {
        let (m, n) = self.shape();
        assert!(start + len <= m, "row_slice out of range");
        let data = self.data()[start * n..(start + len) * n].to_vec();
        Tensor::from_op(
            len,
            n,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (x, g) in buf[start * n..(start + len) * n]
                        .iter_mut()
                        .zip(out_grad)
                    {
                        *x += g;
                    }
                });
            }),
        )
    }

    /// Stack tensors of equal width vertically.
    pub fn stack_rows(parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "stack_rows of nothing");
        let n = parts[0].cols();
        let mut data = Vec::new();
        let mut ranges = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for p in parts {
            assert_eq!(p.cols(), n, "stack_rows: width mismatch");
            data.extend_from_slice(p.data());
            ranges.push((offset, p.rows()));
            offset += p.rows();
        }
        Tensor::from_op(
            offset,
            n,
            data,
            parts.to_vec(),
            Box::new(move |node, out_grad, grads| {
                for (idx, &(row0, rows)) in ranges.iter().enumerate() {
                    grads.accumulate(&node.parents[idx], |buf| {
                        for (x, g) in buf
                            .iter_mut()
                            .zip(&out_grad[row0 * n..(row0 + rows) * n])
                        {
                            *x += g;
                        }
                    });
                }
            }),
        )
    }

    /// Column means: 1 x n from m x n.
    pub fn mean_rows(&self) -> Tensor {
        let (m, n) = self.shape();
        let mut data = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                data[j] += self.at(i, j);
            }
        }
        for v in &mut data {
            *v /= m as f64;
        }
        Tensor::from_op(
            1,
            n,
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for i in 0..m {
                        for j in 0..n {
                            buf[i * n + j] += out_grad[j] / m as f64;
                        }
                    }
                });
            }),
        )
    }

    pub fn sum_all(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(
            1,
            1,
            vec![total],
            vec![self.clone()],
            Box::new(|node, out_grad, grads| {
                let g = out_grad[0];
                grads.accumulate(&node.parents[0], |buf| {
                    for x in buf.iter_mut() {
                        *x += g;
                    }
                });
            }),
        )
    }

    pub fn mean_all(&self) -> Tensor {
        let count = (self.rows() * self.cols()) as f64;
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(
            1,
            1,
            vec![total / count],
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                let g = out_grad[0] / count;
                grads.accumulate(&node.parents[0], |buf| {
                    for x in buf.iter_mut() {
                        *x += g;
                    }
                });
            }),
        )
    }

    /// Inverted dropout; identity when `rate` is zero.
    pub fn dropout(&self, rate: f64, rng: &mut ChaCha8Rng) -> Tensor {
        assert!((0.0..1.0).contains(&rate), "dropout rate in [0, 1)");
        if rate == 0.0 {
            return self.clone();
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..self.rows() * self.cols())
            .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        let data = self
            .data()
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        Tensor::from_op(
            self.rows(),
            self.cols(),
            data,
            vec![self.clone()],
            Box::new(move |node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for ((x, g), m) in buf.iter_mut().zip(out_grad).zip(&mask) {
                        *x += g * m;
                    }
                });
            }),
        )
    }
}

/// Masked softmax over a single distribution: disallowed logits are
/// replaced by `s_masked` before normalization. Errors when every entry is
/// masked.
pub fn masked_softmax(logits: &Tensor, allowed: &[bool], s_masked: f64) -> Result<Tensor, NnError> {
    let count = logits.rows() * logits.cols();
    if allowed.len() != count {
        return Err(NnError::WidthMismatch {
            expected: count,
            got: allowed.len(),
            context: "masked_softmax mask length".into(),
        });
    }
    if !allowed.iter().any(|&a| a) {
        return Err(NnError::AllMasked);
    }
    let flat = if logits.rows() == 1 {
        logits.clone()
    } else {
        // treat any shape as one distribution
        Tensor::from_op(
            1,
            count,
            logits.data().to_vec(),
            vec![logits.clone()],
            Box::new(|node, out_grad, grads| {
                grads.accumulate(&node.parents[0], |buf| {
                    for (x, g) in buf.iter_mut().zip(out_grad) {
                        *x += g;
                    }
                });
            }),
        )
    };
    Ok(flat.masked_softmax_rows(allowed, s_masked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::backward;
    use rand::SeedableRng;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::constant(rows, cols, data.to_vec())
    }

    #[test]
    fn matmul_known_values() {
        let a = t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn softmax_rows_normalize() {
        let x = t(2, 4, &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let p = x.softmax_rows();
        assert_eq!(p.row(0), &[0.25, 0.25, 0.25, 0.25]);
        let s: f64 = p.row(1).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_softmax_limit_case() {
        let x = t(1, 2, &[0.0, 0.0]);
        let p = masked_softmax(&x, &[true, false], -1e9).unwrap();
        assert!((p.data()[0] - 1.0).abs() < 1e-12);
        assert!(p.data()[1] < 1e-12);
    }

    #[test]
    fn masked_softmax_all_masked_errors() {
        let x = t(1, 3, &[1.0, 2.0, 3.0]);
        assert!(matches!(
            masked_softmax(&x, &[false, false, false], -1e9),
            Err(NnError::AllMasked)
        ));
    }

    #[test]
    fn masked_argmax_never_masked() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let n = rng.gen_range(2..12usize);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let mut allowed: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            if !allowed.iter().any(|&a| a) {
                allowed[rng.gen_range(0..n)] = true;
            }
            let p = masked_softmax(&t(1, n, &logits), &allowed, -1e9).unwrap();
            let argmax = p
                .data()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(allowed[argmax], "argmax fell on a masked entry");
            let sum: f64 = p.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (j, &a) in allowed.iter().enumerate() {
                if !a {
                    assert!(p.data()[j] < 1e-8);
                }
            }
        }
    }

    #[test]
    fn gather_and_stack_shapes() {
        let table = t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = table.gather_rows(&[2, 0, 2]);
        assert_eq!(g.data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let s = Tensor::stack_rows(&[g.row_slice(0, 1), g.row_slice(2, 1)]);
        assert_eq!(s.data(), &[5.0, 6.0, 5.0, 6.0]);
    }

    #[test]
    fn dropout_zero_rate_is_identity() {
        let x = t(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = x.dropout(0.0, &mut rng);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn grad_flows_through_composite() {
        let mut ps = crate::nn::ParamSet::new();
        let w = ps.add_from("w", 2, 2, vec![0.5, -0.5, 1.0, 2.0]);
        let x = t(1, 2, &[1.0, 3.0]);
        let y = x.matmul(&w.tensor()).relu().sum_all();
        let grads = backward(&y).unwrap();
        // forward: [0.5 + 3, -0.5 + 6] = [3.5, 5.5], both positive
        let gw = grads.by_id(w.id()).unwrap();
        assert_eq!(gw, &[1.0, 1.0, 3.0, 3.0]);
    }
}
