use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Returns `-log softmax(logits)[label]` and its gradient
/// `softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<(f64, Tensor)> {
    let z = logits.data();
    if label >= z.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: z.len(),
        });
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    let log_sum = sum.ln() + max;
    let loss = (log_sum - z[label]).max(0.0);
    let mut grad = softmax(z);
    grad[label] -= 1.0;
    Ok((loss, Tensor::from_vec(grad)))
}
