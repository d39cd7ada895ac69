//! Named trainable parameters. A [`Param`] owns mutable storage and a
//! stable tape id; every forward pass leafs a snapshot tensor under that
//! id, so gradients from [`super::backward`] line up with optimizer state
//! across steps.

use super::tensor::{fresh_id, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

#[derive(Debug)]
pub struct Param {
    id: u64,
    rows: usize,
    cols: usize,
    data: RefCell<Vec<f64>>,
}

impl Param {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot leaf tensor sharing this parameter's id.
    pub fn tensor(&self) -> Tensor {
        Tensor::leaf_with_id(self.id, self.rows, self.cols, self.data.borrow().clone())
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.borrow().clone()
    }

    pub fn set_values(&self, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "parameter shape is fixed");
        *self.data.borrow_mut() = values;
    }

    /// In-place update used by the optimizer.
    pub fn update(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.data.borrow_mut());
    }
}

/// Uniform Glorot range: U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)).
pub fn glorot_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// Registry of named parameters; names are stable and sorted, which makes
/// checkpoints and optimizer traversal deterministic.
#[derive(Debug, Default)]
pub struct ParamSet {
    params: BTreeMap<String, Rc<Param>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Register a Glorot-initialized parameter.
    pub fn add(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> Rc<Param> {
        let data = glorot_uniform(rng, rows, cols);
        self.add_from(name, rows, cols, data)
    }

    /// Register a parameter with explicit initial values.
    pub fn add_from(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) -> Rc<Param> {
        assert_eq!(data.len(), rows * cols);
        assert!(
            !self.params.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        let param = Rc::new(Param {
            id: fresh_id(),
            rows,
            cols,
            data: RefCell::new(data),
        });
        self.params.insert(name.to_string(), Rc::clone(&param));
        param
    }

    /// Constant-initialized parameter (layer-norm gains and biases).
    pub fn add_const(&mut self, name: &str, rows: usize, cols: usize, value: f64) -> Rc<Param> {
        self.add_from(name, rows, cols, vec![value; rows * cols])
    }

    pub fn get(&self, name: &str) -> Option<&Rc<Param>> {
        self.params.get(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.params.values().map(|p| p.len()).sum()
    }

    /// Iterate in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rc<Param>)> {
        self.params.iter()
    }

    /// Copy all values out (checkpointing, best-model tracking).
    pub fn snapshot(&self) -> BTreeMap<String, Vec<f64>> {
        self.params
            .iter()
            .map(|(n, p)| (n.clone(), p.values()))
            .collect()
    }

    /// Restore from a snapshot; names and shapes must match.
    pub fn restore(&self, snapshot: &BTreeMap<String, Vec<f64>>) {
        for (name, values) in snapshot {
            let p = self
                .params
                .get(name)
                .unwrap_or_else(|| panic!("unknown parameter {name:?} in snapshot"));
            p.set_values(values.clone());
        }
    }
}
