use serde::{Deserialize, Serialize};

use crate::catalog::Dataset;
use crate::error::{Error, Result};
use crate::losses::softmax_probs;
use crate::network::{forward, HeadKind, NetParams};
use crate::solar::SunLabel;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Softmax probability of `class`.
    pub prob: f64,
}

impl Prediction {
    pub fn label(&self) -> SunLabel {
        SunLabel::from_class_index(self.class).expect("two-class head")
    }
}

/// Argmax of the logits; ties go to the lower class index.
pub fn predict_from_logits(logits: &[f64]) -> Result<Prediction> {
    if logits.is_empty() || logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("logits {logits:?}")));
    }
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    let probs = softmax_probs(logits);
    Ok(Prediction {
        class: best,
        prob: probs[best],
    })
}

/// Classifies one image with a single stream's `fc8_1` head.
pub fn predict(params: &NetParams, image: &Tensor) -> Result<Prediction> {
    if params.arch().head != HeadKind::Classifier {
        return Err(Error::InvalidArgument("prediction needs a classifier head".into()));
    }
    predict_from_logits(&forward(params, image)?.logits)
}

pub fn predict_batch(params: &NetParams, images: &[Tensor]) -> Result<Vec<Prediction>> {
    images.iter().map(|x| predict(params, x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: SunLabel,
    pub correct: usize,
    pub total: usize,
    /// Percentage in `[0, 100]`.
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassAccuracy>,
    /// Unweighted mean of the per-class accuracies.
    pub m_acc: f64,
}

impl EvalReport {
    pub fn mean_of(per_class_acc: &[f64]) -> f64 {
        per_class_acc.iter().sum::<f64>() / per_class_acc.len() as f64
    }

    /// Tallies `(truth, predicted)` class indices.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut correct = [0usize; 2];
        let mut total = [0usize; 2];
        for (truth, pred) in outcomes {
            if truth > 1 {
                return Err(Error::InvalidArgument(format!("class index {truth} out of range")));
            }
            total[truth] += 1;
            correct[truth] += usize::from(truth == pred);
        }
        let mut per_class = Vec::with_capacity(2);
        for label in SunLabel::ALL {
            let k = label.class_index();
            if total[k] == 0 {
                return Err(Error::Data(format!("no {label} records to evaluate")));
            }
            per_class.push(ClassAccuracy {
                label,
                correct: correct[k],
                total: total[k],
                acc: 100.0 * correct[k] as f64 / total[k] as f64,
            });
        }
        let accs: Vec<f64> = per_class.iter().map(|c| c.acc).collect();
        Ok(EvalReport {
            m_acc: Self::mean_of(&accs),
            per_class,
        })
    }
}

/// Per-class accuracy and mAcc over the labelled records of `data`.
pub fn evaluate_classification(params: &NetParams, data: &Dataset) -> Result<EvalReport> {
    let mut outcomes = Vec::with_capacity(data.len());
    for (r, x) in data.records.iter().zip(&data.images) {
        if let Some(label) = r.label {
            outcomes.push((label.class_index(), predict(params, x)?.class));
        }
    }
    EvalReport::from_outcomes(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub r2: f64,
    pub rmse: f64,
    pub n: usize,
}

pub fn evaluate_regression(preds: &[f64], targets: &[f64]) -> Result<RegressionReport> {
    if preds.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let n = targets.len();
    if n < 2 {
        return Err(Error::Data("regression metrics need at least 2 samples".into()));
    }
    if preds.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression inputs".into()));
    }
    let mean = targets.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Data("targets are constant; R^2 is undefined".into()));
    }
    let ss_res: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p).powi(2)).sum();
    Ok(RegressionReport {
        r2: 1.0 - ss_res / ss_tot,
        rmse: (ss_res / n as f64).sqrt(),
        n,
    })
}
