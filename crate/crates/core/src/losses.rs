//! Objective functions and their derivatives with respect to stream outputs.
//!
//! * softmax cross-entropy on the class logits,
//! * the pairwise logistic ranking loss `1 / (1 + exp(s_r - s_s))`, which
//!   vanishes when the sunrise member outscores the sunset member,
//! * the combined pair objective: batch mean of
//!   `ce(R) + ce(S) + lambda * ranking(R, S)`,
//! * contrastive loss on embeddings (squared distance for matching labels,
//!   hinge `max(margin - d^2, 0)` otherwise),
//! * square loss for regression.

use crate::error::{Error, Result};
use crate::network::StreamOutput;

/// A loss total with its named parts.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LossValue {
    pub total: f64,
    pub components: Vec<(&'static str, f64)>,
}

impl LossValue {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

/// Logistic `1 / (1 + exp(x))` evaluated through `exp(-|x|)` so it never overflows.
pub fn logistic_neg(x: f64) -> f64 {
    let z = (-x.abs()).exp();
    if x >= 0.0 {
        z / (1.0 + z)
    } else {
        1.0 / (1.0 + z)
    }
}

fn check_class(logits: &[f64], y: usize) -> Result<()> {
    if y >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {y} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("logits {logits:?}")));
    }
    Ok(())
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// `-log softmax(logits)[y]` with max subtraction.
pub fn softmax_ce(logits: &[f64], y: usize) -> Result<f64> {
    check_class(logits, y)?;
    Ok(log_sum_exp(logits) - logits[y])
}

/// Loss and gradient with respect to the logits (`softmax - onehot`).
pub fn softmax_ce_grad(logits: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
    check_class(logits, y)?;
    let lse = log_sum_exp(logits);
    let grad = logits
        .iter()
        .enumerate()
        .map(|(k, l)| (l - lse).exp() - if k == y { 1.0 } else { 0.0 })
        .collect();
    Ok((lse - logits[y], grad))
}

pub fn softmax_probs(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

pub fn ranking_loss(s_r: f64, s_s: f64) -> f64 {
    logistic_neg(s_r - s_s)
}

/// Ranking loss and its derivative with respect to `s_r` (the derivative
/// with respect to `s_s` is the negation).
pub fn ranking_loss_grad(s_r: f64, s_s: f64) -> (f64, f64) {
    let l = ranking_loss(s_r, s_s);
    // d/dd [1/(1+e^d)] = -l (1 - l); 1 - l is the logistic of the opposite sign.
    (l, -l * logistic_neg(s_s - s_r))
}

/// Combined pair objective over a batch of `(R, S)` outputs with class labels `(y_R, y_S)`.
pub fn combined_loss(outputs: &[(StreamOutput, StreamOutput)], labels: &[(usize, usize)], lambda: f64) -> Result<LossValue> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if outputs.len() != labels.len() || outputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} output pairs for {} label pairs",
            outputs.len(),
            labels.len()
        )));
    }
    let n = outputs.len() as f64;
    let (mut sm_r, mut sm_s, mut rank) = (0.0, 0.0, 0.0);
    for ((r, s), &(y_r, y_s)) in outputs.iter().zip(labels) {
        sm_r += softmax_ce(&r.logits, y_r)?;
        sm_s += softmax_ce(&s.logits, y_s)?;
        rank += ranking_loss(r.rank_score, s.rank_score);
    }
    Ok(combine(sm_r / n, sm_s / n, rank / n, lambda))
}

pub(crate) fn combine(softmax_r: f64, softmax_s: f64, ranking: f64, lambda: f64) -> LossValue {
    LossValue {
        total: softmax_r + softmax_s + lambda * ranking,
        components: vec![("softmax_r", softmax_r), ("softmax_s", softmax_s), ("ranking", ranking)],
    }
}

fn squared_distance(v_i: &[f64], v_j: &[f64]) -> Result<f64> {
    if v_i.len() != v_j.len() {
        return Err(Error::Shape {
            expected: vec![v_i.len()],
            got: vec![v_j.len()],
        });
    }
    Ok(v_i.iter().zip(v_j).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn contrast_loss(v_i: &[f64], v_j: &[f64], c_i: usize, c_j: usize, margin: f64) -> Result<f64> {
    let d2 = squared_distance(v_i, v_j)?;
    Ok(if c_i == c_j { d2 } else { (margin - d2).max(0.0) })
}

/// Contrastive loss, its gradient with respect to `v_i` (the gradient for
/// `v_j` is the negation) and whether the hinge is active (always true for
/// matching labels).
pub fn contrast_loss_grad(v_i: &[f64], v_j: &[f64], same: bool, margin: f64) -> Result<(f64, Vec<f64>, bool)> {
    let d2 = squared_distance(v_i, v_j)?;
    let diff = v_i.iter().zip(v_j).map(|(a, b)| a - b);
    if same {
        return Ok((d2, diff.map(|d| 2.0 * d).collect(), true));
    }
    if margin - d2 > 0.0 {
        Ok((margin - d2, diff.map(|d| -2.0 * d).collect(), true))
    } else {
        Ok((0.0, vec![0.0; v_i.len()], false))
    }
}

pub fn square_loss(pred: f64, target: f64) -> f64 {
    (pred - target) * (pred - target)
}

pub fn mean_square_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    Ok(preds.iter().zip(targets).map(|(&p, &t)| square_loss(p, t)).sum::<f64>() / preds.len() as f64)
}
