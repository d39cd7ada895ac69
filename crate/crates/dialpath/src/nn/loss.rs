//! Fused classification losses: numerically stable log-softmax cross
//! entropy with optional label smoothing, and the adjacency-masked variant
//! used by the path decoder.

use super::tensor::Tensor;
use super::NnError;

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Mean smoothed cross entropy over rows. The smoothed target puts
/// `1 - eps + eps/K` on the label and `eps/K` elsewhere; `eps = 0` is plain
/// cross entropy.
pub fn cross_entropy_with_label_smoothing(
    logits: &Tensor,
    targets: &[usize],
    eps_ls: f64,
) -> Result<Tensor, NnError> {
    let (m, k) = logits.shape();
    assert_eq!(targets.len(), m, "one target per row");
    assert!((0.0..1.0).contains(&eps_ls), "smoothing in [0, 1)");
    if m == 0 {
        return Err(NnError::EmptyInput("cross entropy over zero rows".into()));
    }
    for &t in targets {
        if t >= k {
            return Err(NnError::TargetOutOfRange {
                target: t,
                classes: k,
            });
        }
    }
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        // sum_j y_j * x_j with y = smoothed one-hot
        let uniform: f64 = row.iter().sum::<f64>() * (eps_ls / k as f64);
        let expected = (1.0 - eps_ls) * row[t] + uniform;
        total += lse - expected;
    }
    let loss = total / m as f64;
    let targets_cap = targets.to_vec();
    Ok(Tensor::from_op(
        1,
        1,
        vec![loss],
        vec![logits.clone()],
        Box::new(move |node, out_grad, grads| {
            let logits = &node.parents[0];
            let g = out_grad[0] / m as f64;
            let data = logits.data().to_vec();
            grads.accumulate(logits, |buf| {
                for (i, &t) in targets_cap.iter().enumerate() {
                    let row = &data[i * k..(i + 1) * k];
                    let lse = log_sum_exp(row);
                    for j in 0..k {
                        let p = (row[j] - lse).exp();
                        let y = eps_ls / k as f64 + if j == t { 1.0 - eps_ls } else { 0.0 };
                        buf[i * k + j] += g * (p - y);
                    }
                }
            });
        }),
    ))
}

/// Mean cross entropy where disallowed classes are replaced by `s_masked`
/// before normalization (no smoothing; path labels are few). Targets must
/// be allowed in their own row.
pub fn masked_cross_entropy(
    logits: &Tensor,
    allowed: &[bool],
    targets: &[usize],
    s_masked: f64,
) -> Result<Tensor, NnError> {
    let (m, k) = logits.shape();
    assert_eq!(targets.len(), m, "one target per row");
    if allowed.len() != m * k {
        return Err(NnError::WidthMismatch {
            expected: m * k,
            got: allowed.len(),
            context: "masked cross entropy mask".into(),
        });
    }
    if m == 0 {
        return Err(NnError::EmptyInput("cross entropy over zero rows".into()));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= k {
            return Err(NnError::TargetOutOfRange {
                target: t,
                classes: k,
            });
        }
        assert!(
            allowed[i * k + t],
            "target {t} is masked in row {i}; supervision must be graph-valid"
        );
    }
    let masked_row = |row: &[f64], arow: &[bool]| -> Vec<f64> {
        row.iter()
            .zip(arow)
            .map(|(&x, &a)| if a { x } else { s_masked })
            .collect()
    };
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = masked_row(logits.row(i), &allowed[i * k..(i + 1) * k]);
        total += log_sum_exp(&row) - row[t];
    }
    let loss = total / m as f64;
    let targets_cap = targets.to_vec();
    let allowed_cap = allowed.to_vec();
    Ok(Tensor::from_op(
        1,
        1,
        vec![loss],
        vec![logits.clone()],
        Box::new(move |node, out_grad, grads| {
            let logits = &node.parents[0];
            let g = out_grad[0] / m as f64;
            let data = logits.data().to_vec();
            grads.accumulate(logits, |buf| {
                for (i, &t) in targets_cap.iter().enumerate() {
                    let arow = &allowed_cap[i * k..(i + 1) * k];
                    let row: Vec<f64> = data[i * k..(i + 1) * k]
                        .iter()
                        .zip(arow)
                        .map(|(&x, &a)| if a { x } else { s_masked })
                        .collect();
                    let lse = log_sum_exp(&row);
                    for j in 0..k {
                        if arow[j] {
                            let p = (row[j] - lse).exp();
                            let y = if j == t { 1.0 } else { 0.0 };
                            buf[i * k + j] += g * (p - y);
                        }
                    }
                }
            });
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prediction_gives_ln_k() {
        for k in [2usize, 4, 7] {
            let logits = Tensor::constant(1, k, vec![0.3; k]);
            let loss = cross_entropy_with_label_smoothing(&logits, &[0], 0.0).unwrap();
            assert!((loss.scalar() - (k as f64).ln()).abs() < 1e-12);
            // label smoothing does not change the uniform-prediction loss
            let smoothed = cross_entropy_with_label_smoothing(&logits, &[0], 0.1).unwrap();
            assert!((smoothed.scalar() - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_prediction_near_zero() {
        let logits = Tensor::constant(1, 4, vec![50.0, 0.0, 0.0, 0.0]);
        let loss = cross_entropy_with_label_smoothing(&logits, &[0], 0.0).unwrap();
        assert!(loss.scalar() < 1e-12);
    }

    #[test]
    fn smoothed_value_matches_hand_computation() {
        // frozen from tests/oracles/numeric_oracle.py
        let logits = Tensor::constant(1, 4, vec![0.5, -1.0, 2.0, 0.0]);
        let loss = cross_entropy_with_label_smoothing(&logits, &[2], 0.1).unwrap();
        assert!(
            (loss.scalar() - ORACLE_SMOOTHED_CE).abs() < 1e-10,
            "got {}",
            loss.scalar()
        );
    }

    const ORACLE_SMOOTHED_CE: f64 = 0.504849582389822;

    #[test]
    fn target_out_of_range_errors() {
        let logits = Tensor::constant(1, 3, vec![0.0; 3]);
        assert!(matches!(
            cross_entropy_with_label_smoothing(&logits, &[3], 0.0),
            Err(NnError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn masked_ce_matches_unmasked_when_all_allowed() {
        let logits = Tensor::constant(2, 3, vec![0.1, 0.2, -0.4, 1.0, -1.0, 0.0]);
        let a = masked_cross_entropy(&logits, &[true; 6], &[1, 0], -1e9).unwrap();
        let b = cross_entropy_with_label_smoothing(&logits, &[1, 0], 0.0).unwrap();
        assert!((a.scalar() - b.scalar()).abs() < 1e-12);
    }

    #[test]
    fn masked_ce_ignores_masked_classes() {
        // with one competitor masked away, the target is near-certain
        let logits = Tensor::constant(1, 3, vec![0.0, 10.0, 0.0]);
        let allowed = [true, false, true];
        let loss = masked_cross_entropy(&logits, &allowed, &[0], -1e9).unwrap();
        assert!((loss.scalar() - (2f64).ln()).abs() < 1e-12);
    }
}
