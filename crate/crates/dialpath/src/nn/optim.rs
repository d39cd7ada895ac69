//! Adam with bias correction under a warm-up-then-inverse-sqrt learning
//! rate: `lr(s) = base * min(s / warmup, sqrt(warmup / s))`, which rises
//! linearly over the warm-up steps, peaks at `base`, then decays.

use super::params::ParamSet;
use super::tensor::Gradients;
use super::NnError;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
}

impl LrSchedule {
    pub fn lr(&self, step: u64) -> f64 {
        let s = step.max(1) as f64;
        let w = self.warmup_steps.max(1) as f64;
        self.base_lr * (s / w).min((w / s).sqrt())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamOptions {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
}

impl AdamOptions {
    pub fn new(schedule: LrSchedule) -> Self {
        AdamOptions {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule,
        }
    }
}

/// First/second moment buffers keyed by parameter id, plus the step count.
#[derive(Debug, Default)]
pub struct AdamState {
    step: u64,
    m: HashMap<u64, Vec<f64>>,
    v: HashMap<u64, Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over every parameter in the set. Parameters without a
/// gradient this step are treated as having zero gradient. Returns the
/// learning rate that was applied.
pub fn adam_step(
    params: &ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    opts: &AdamOptions,
) -> Result<f64, NnError> {
    adam_step_many(&[params], grads, state, opts)
}

/// Adam update spanning several parameter sets under one step counter
/// (joint training of multiple models).
pub fn adam_step_many(
    sets: &[&ParamSet],
    grads: &Gradients,
    state: &mut AdamState,
    opts: &AdamOptions,
) -> Result<f64, NnError> {
    state.step += 1;
    let t = state.step;
    let lr = opts.schedule.lr(t);
    let bc1 = 1.0 - opts.beta1.powi(t as i32);
    let bc2 = 1.0 - opts.beta2.powi(t as i32);
    for (name, param) in sets.iter().flat_map(|s| s.iter()) {
        let grad = grads.by_id(param.id());
        if let Some(g) = grad {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(NnError::NanGradient { name: name.clone() });
            }
        }
        let m = state
            .m
            .entry(param.id())
            .or_insert_with(|| vec![0.0; param.len()]);
        let v = state
            .v
            .entry(param.id())
            .or_insert_with(|| vec![0.0; param.len()]);
        param.update(|values| {
            for i in 0..values.len() {
                let g = grad.map(|g| g[i]).unwrap_or(0.0);
                m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g;
                v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                values[i] -= lr * mhat / (vhat.sqrt() + opts.eps);
            }
        });
    }
    Ok(lr)
}
