//! Accuracy and F1 scores from a 2×2 confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::N_CLASSES;

/// Counts indexed `[true class][predicted class]`.
pub type Confusion = [[u64; N_CLASSES]; N_CLASSES];

/// Percentages in `[0, 100]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub ma_f1: f64,
    pub wa_f1: f64,
}

impl Metrics {
    pub fn from_confusion(c: &Confusion) -> Result<Self> {
        let total: u64 = c.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Empty("test set"));
        }
        let correct: u64 = (0..N_CLASSES).map(|k| c[k][k]).sum();
        let mut f1 = [0.0; N_CLASSES];
        let mut support = [0u64; N_CLASSES];
        for k in 0..N_CLASSES {
            let tp = c[k][k];
            let fn_: u64 = c[k].iter().sum::<u64>() - tp;
            let fp: u64 = (0..N_CLASSES).map(|t| c[t][k]).sum::<u64>() - tp;
            support[k] = tp + fn_;
            // F1 = 2TP / (2TP + FP + FN); zero when the class never occurs or is never predicted correctly.
            let denom = 2 * tp + fp + fn_;
            f1[k] = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
        }
        let ma = f1.iter().sum::<f64>() / N_CLASSES as f64;
        let wa = f1.iter().zip(support).map(|(f, s)| f * s as f64).sum::<f64>() / total as f64;
        Ok(Self {
            acc: 100.0 * correct as f64 / total as f64,
            ma_f1: 100.0 * ma,
            wa_f1: 100.0 * wa,
        })
    }

    /// Arithmetic mean of each metric.
    pub fn mean(items: &[Metrics]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Empty("metrics list"));
        }
        let n = items.len() as f64;
        Ok(Self {
            acc: items.iter().map(|m| m.acc).sum::<f64>() / n,
            ma_f1: items.iter().map(|m| m.ma_f1).sum::<f64>() / n,
            wa_f1: items.iter().map(|m| m.wa_f1).sum::<f64>() / n,
        })
    }
}

/// Index of the largest logit; the lowest index wins ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub fn confusion(truth: &[usize], predicted: &[usize]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
            context: "predictions".into(),
        });
    }
    let mut c = [[0; N_CLASSES]; N_CLASSES];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= N_CLASSES || p >= N_CLASSES {
            return Err(Error::LabelOutOfRange {
                label: t.max(p),
                classes: N_CLASSES,
            });
        }
        c[t][p] += 1;
    }
    Ok(c)
}
