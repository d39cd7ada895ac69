//! Central finite-difference gradient checking for any loss expressible as
//! a closure over a parameter set. The forward closure must be
//! deterministic (run blocks in evaluation mode, no dropout).

use super::params::ParamSet;
use super::tensor::{backward, Tensor};
use super::NnError;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Number of scalar entries compared.
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compare analytic gradients against central differences
/// `(f(p + eps) - f(p - eps)) / (2 eps)` for every element of every
/// parameter. Relative error is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn check_gradients(
    params: &ParamSet,
    eps: f64,
    forward: impl Fn() -> Result<Tensor, NnError>,
) -> Result<GradCheckReport, NnError> {
    let loss = forward()?;
    let grads = backward(&loss)?;
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for (name, param) in params.iter() {
        let analytic: Vec<f64> = grads
            .by_id(param.id())
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![0.0; param.len()]);
        for idx in 0..param.len() {
            let original = param.values()[idx];
            param.update(|d| d[idx] = original + eps);
            let up = forward()?.scalar();
            param.update(|d| d[idx] = original - eps);
            let down = forward()?.scalar();
            param.update(|d| d[idx] = original);
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    Ok(report)
}
