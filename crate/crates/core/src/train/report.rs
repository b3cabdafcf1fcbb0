use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::HeadWeightRow;
use super::metrics::{Confusion, Metrics};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub acc: f64,
    pub ma_f1: f64,
    pub wa_f1: f64,
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head_weights: Vec<HeadWeightRow>,
}

impl FoldReport {
    pub fn metrics(&self) -> Metrics {
        Metrics {
            acc: self.acc,
            ma_f1: self.ma_f1,
            wa_f1: self.wa_f1,
        }
    }
}

/// Cross-validation results. `config` echoes the resolved training config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
}

fn check_metrics(m: &Metrics, what: &str) -> Result<()> {
    for (name, v) in [("acc", m.acc), ("ma_f1", m.ma_f1), ("wa_f1", m.wa_f1)] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::Schema(format!("{what}: {name} = {v} is outside [0, 100]")));
        }
    }
    Ok(())
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if self.folds.is_empty() {
            return Err(Error::Schema("folds array is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.folds {
            if !seen.insert(f.fold) {
                return Err(Error::Schema(format!("fold {} listed twice", f.fold)));
            }
            check_metrics(&f.metrics(), &format!("fold {}", f.fold))?;
            if f.confusion.iter().flatten().sum::<u64>() == 0 {
                return Err(Error::Schema(format!("fold {} has an empty confusion matrix", f.fold)));
            }
        }
        check_metrics(&self.mean, "mean")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Per-fold and mean metrics, two decimals.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        if let Some(model) = self.config.get("model").and_then(|m| m.as_str()) {
            let _ = writeln!(s, "model: {model}  seed: {}", self.seed);
        } else {
            let _ = writeln!(s, "seed: {}", self.seed);
        }
        let _ = writeln!(s, "{:<6} {:>7} {:>7} {:>7}", "fold", "Acc", "MA-F1", "WA-F1");
        let mut folds: Vec<&FoldReport> = self.folds.iter().collect();
        folds.sort_by_key(|f| f.fold);
        for f in folds {
            let _ = writeln!(s, "{:<6} {:>7.2} {:>7.2} {:>7.2}", f.fold, f.acc, f.ma_f1, f.wa_f1);
        }
        let m = &self.mean;
        let _ = writeln!(s, "{:<6} {:>7.2} {:>7.2} {:>7.2}", "mean", m.acc, m.ma_f1, m.wa_f1);
        s
    }
}
