use crate::error::{Error, Result};

/// Floor applied to `q` inside [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-12;

const NORMALIZATION_TOL: f64 = 1e-9;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy of `logits` against class `label`, with its gradient
/// `softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel {
            label,
            classes: logits.len(),
        });
    }
    let loss = log_sum_exp(logits) - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

fn check_distribution(v: &[f64], name: &str) -> Result<()> {
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidDistribution(format!(
            "{name} has entries outside [0, 1]: {v:?}"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{name} sums to {total}"
        )));
    }
    Ok(())
}

/// `KL(p || q) = sum p log(p / q)` with `0 log 0 = 0` and `q` floored at
/// [`KL_FLOOR`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidDistribution(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let kl = p
        .iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi.max(KL_FLOOR)).ln())
        .sum::<f64>();
    // Rounding can leave a tiny negative value when p == q.
    Ok(kl.max(0.0))
}
