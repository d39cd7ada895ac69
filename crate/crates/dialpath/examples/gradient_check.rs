//! Finite-difference gradient checking of the differentiable blocks:
//! attention, GCN layer, losses and the path decoder stack.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use dialpath::graph::SemanticGraph;
use dialpath::nn::blocks::{pos_encode, transformer_block, AttentionBlockParams};
use dialpath::nn::gradcheck::check_gradients;
use dialpath::nn::{cross_entropy_with_label_smoothing, ParamSet, Tensor};
use dialpath::propagation::{PropagationConfig, PropagationModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // one attention block over a 3x8 sequence
    let mut ps = ParamSet::new();
    let block = AttentionBlockParams::new(&mut ps, "block", 8, 2, &mut rng);
    let x = Tensor::constant(3, 8, (0..24).map(|i| (i as f64 * 0.31).sin()).collect());
    let pe = pos_encode(3, 8).expect("even width");
    let report = check_gradients(&ps, 1e-5, || {
        let out = transformer_block(&x.add(&pe), &x, &x, &block, None, &mut None)?;
        Ok(out.mean_all())
    })
    .expect("forward succeeds");
    println!(
        "attention block: {} entries, max relative error {:.2e}",
        report.checked, report.max_rel_error
    );

    // GCN layer over a 3-node chain graph
    let cfg = PropagationConfig {
        d: 8,
        heads: 2,
        dropout: 0.0,
        d_w: 8,
        d_v: 8,
        ..PropagationConfig::default()
    };
    let model = PropagationModel::new(12, cfg, 5);
    let graph = SemanticGraph::from_edges(3, vec![1, 2, 3], [(3, 2), (2, 3), (2, 1), (1, 2)]);
    let m = Tensor::constant(3, 8, (0..24).map(|i| (i as f64 * 0.17).cos()).collect());
    let report = check_gradients(&model.params, 1e-5, || {
        Ok(model.gcn_update(&m, &graph).mean_all())
    })
    .expect("forward succeeds");
    println!(
        "gcn layer:       {} entries, max relative error {:.2e}",
        report.checked, report.max_rel_error
    );

    // smoothed cross entropy through a projection
    let mut ps = ParamSet::new();
    let w = ps.add("w", 8, 5, &mut rng);
    let report = check_gradients(&ps, 1e-5, || {
        cross_entropy_with_label_smoothing(&x.matmul(&w.tensor()), &[1, 0, 4], 0.1)
    })
    .expect("forward succeeds");
    println!(
        "smoothed ce:     {} entries, max relative error {:.2e}",
        report.checked, report.max_rel_error
    );
}
