//! The autodiff tape: immutable 2-D tensors that record their parents and
//! a backward closure, plus reverse-mode gradient accumulation.

use super::NnError;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) type BackwardFn = Box<dyn Fn(&TensorInner, &[f64], &mut Gradients)>;

pub struct TensorInner {
    pub(crate) id: u64,
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
    pub(crate) parents: Vec<Tensor>,
    pub(crate) backward: Option<BackwardFn>,
    pub(crate) requires_grad: bool,
}

/// An immutable row-major matrix on the autodiff tape. Cloning is cheap
/// (reference counted); values never change after construction.
#[derive(Clone)]
pub struct Tensor {
    pub(crate) inner: Rc<TensorInner>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &(self.inner.rows, self.inner.cols))
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl Tensor {
    /// Leaf tensor holding constant data.
    pub fn constant(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Tensor {
            inner: Rc::new(TensorInner {
                id: fresh_id(),
                rows,
                cols,
                data,
                parents: Vec::new(),
                backward: None,
                requires_grad: false,
            }),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor::constant(rows, cols, vec![0.0; rows * cols])
    }

    /// Leaf that participates in gradient accumulation under a fixed id
    /// (used by [`super::params::Param`]).
    pub(crate) fn leaf_with_id(id: u64, rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), rows * cols);
        Tensor {
            inner: Rc::new(TensorInner {
                id,
                rows,
                cols,
                data,
                parents: Vec::new(),
                backward: None,
                requires_grad: true,
            }),
        }
    }

    /// Result of a differentiable op.
    pub(crate) fn from_op(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        assert_eq!(data.len(), rows * cols, "op output length must match shape");
        debug_assert!(
            data.iter().all(|v| v.is_finite()),
            "non-finite value in op output ({rows}x{cols})"
        );
        let requires_grad = parents.iter().any(|p| p.inner.requires_grad);
        Tensor {
            inner: Rc::new(TensorInner {
                id: fresh_id(),
                rows,
                cols,
                data,
                parents,
                backward: if requires_grad { Some(backward) } else { None },
                requires_grad,
            }),
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn rows(&self) -> usize {
        self.inner.rows
    }

    pub fn cols(&self) -> usize {
        self.inner.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inner.rows, self.inner.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.inner.data
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.inner.data[row * self.inner.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.inner.data[row * self.inner.cols..(row + 1) * self.inner.cols]
    }

    /// Value of a 1x1 tensor.
    pub fn scalar(&self) -> f64 {
        assert_eq!(self.shape(), (1, 1), "scalar() on non-scalar tensor");
        self.inner.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.inner.data.iter().all(|v| v.is_finite())
    }
}

/// Gradient buffers accumulated per tensor id.
#[derive(Debug, Default)]
pub struct Gradients {
    map: HashMap<u64, Vec<f64>>,
}

impl Gradients {
    pub fn by_id(&self, id: u64) -> Option<&[f64]> {
        self.map.get(&id).map(|v| v.as_slice())
    }

    pub fn of(&self, tensor: &Tensor) -> Option<&[f64]> {
        self.by_id(tensor.id())
    }

    /// Add a contribution into the buffer for `target`, creating it as
    /// zeros on first touch. No-op when the target does not require grad.
    pub(crate) fn accumulate(&mut self, target: &Tensor, contribution: impl FnOnce(&mut [f64])) {
        if !target.inner.requires_grad {
            return;
        }
        let buf = self
            .map
            .entry(target.inner.id)
            .or_insert_with(|| vec![0.0; target.inner.data.len()]);
        contribution(buf);
    }
}

/// Reverse-mode gradients of a scalar loss with respect to every
/// reachable tensor that requires gradients. Each node's backward runs
/// exactly once, in reverse topological order.
pub fn backward(loss: &Tensor) -> Result<Gradients, NnError> {
    if loss.shape() != (1, 1) {
        return Err(NnError::NonScalarLoss {
            rows: loss.rows(),
            cols: loss.cols(),
        });
    }
    if !loss.inner.requires_grad {
        return Err(NnError::DetachedGraph);
    }

    // Iterative post-order DFS: parents end up before their consumers.
    let mut order: Vec<Tensor> = Vec::new();
    let mut visited: HashSet<u64> = HashSet::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(loss.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
            continue;
        }
        if !visited.insert(node.inner.id) {
            continue;
        }
        stack.push((node.clone(), true));
        for p in &node.inner.parents {
            if p.inner.requires_grad && !visited.contains(&p.inner.id) {
                stack.push((p.clone(), false));
            }
        }
    }

    let mut grads = Gradients::default();
    grads.map.insert(loss.inner.id, vec![1.0]);
    for node in order.iter().rev() {
        let Some(out_grad) = grads.map.get(&node.inner.id).cloned() else {
            continue;
        };
        if let Some(back) = &node.inner.backward {
            back(&node.inner, &out_grad, &mut grads);
        }
    }
    Ok(grads)
}

// ---------------------------------------------------------------------------
// Raw matmul kernels shared by forward and backward passes
// ---------------------------------------------------------------------------

/// c[m x n] += a[m x k] * b[k x n]
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b[kk * n..(kk + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    }
}

/// c[m x k] += a[m x n] * b[k x n]^T
pub(crate) fn matmul_nt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        let crow = &mut c[i * k..(i + 1) * k];
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            let mut acc = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            crow[kk] += acc;
        }
    }
}

/// c[k x n] += a[m x k]^T * b[m x n]
pub(crate) fn matmul_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let crow = &mut c[kk * n..(kk + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamSet;

    #[test]
    fn backward_sum_gives_ones() {
        let mut ps = ParamSet::new();
        let x = ps.add_from("x", 1, 4, vec![1.0, -2.0, 3.0, 0.5]);
        let loss = x.tensor().sum_all();
        let grads = backward(&loss).unwrap();
        assert_eq!(grads.by_id(x.id()).unwrap(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_square_gives_two_x() {
        let mut ps = ParamSet::new();
        let x = ps.add_from("x", 1, 3, vec![1.0, -2.0, 3.0]);
        let t = x.tensor();
        let loss = t.mul(&t).sum_all();
        let grads = backward(&loss).unwrap();
        assert_eq!(grads.by_id(x.id()).unwrap(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn backward_accumulates_once_per_parameter() {
        // x used through two consumers: loss = sum(x) + sum(2 * x)
        let mut ps = ParamSet::new();
        let x = ps.add_from("x", 1, 2, vec![1.0, 1.0]);
        let t = x.tensor();
        let loss = t.sum_all().add(&t.scale(2.0).sum_all());
        let grads = backward(&loss).unwrap();
        assert_eq!(grads.by_id(x.id()).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn detached_graph_is_an_error() {
        let c = Tensor::constant(1, 1, vec![4.0]);
        match backward(&c) {
            Err(NnError::DetachedGraph) => {}
            other => panic!("expected DetachedGraph, got {other:?}"),
        }
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut ps = ParamSet::new();
        let x = ps.add_from("x", 1, 2, vec![1.0, 2.0]);
        assert!(matches!(
            backward(&x.tensor()),
            Err(NnError::NonScalarLoss { .. })
        ));
    }
}
