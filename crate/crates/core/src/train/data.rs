//! In-memory datasets built from one or two aligned feature files.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{FeatureRecord, Label};
use crate::nn::batch_tensor;
use crate::tensor::Tensor;

/// Recordings with one feature vector per branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub a: Vec<Vec<f64>>,
    pub b: Option<Vec<Vec<f64>>>,
}

fn check_dims(records: &[FeatureRecord], which: &str) -> Result<usize> {
    let dim = records.first().map_or(0, FeatureRecord::dim);
    if let Some(r) = records.iter().find(|r| r.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.dim(),
            context: format!("record {:?} in {which}", r.recording_id),
        });
    }
    let mut seen = HashSet::new();
    if let Some(r) = records.iter().find(|r| !seen.insert(r.recording_id.as_str())) {
        return Err(Error::InvalidRecord(format!("duplicate recording id {:?} in {which}", r.recording_id)));
    }
    Ok(dim)
}

fn widen(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

impl Dataset {
    pub fn single(records: &[FeatureRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("feature file"));
        }
        check_dims(records, "branch A")?;
        Ok(Self {
            ids: records.iter().map(|r| r.recording_id.clone()).collect(),
            labels: records.iter().map(|r| r.label).collect(),
            a: records.iter().map(|r| widen(&r.values)).collect(),
            b: None,
        })
    }

    /// Pairs records by recording id, keeping branch A's order. Every id must
    /// appear in both inputs with the same label.
    pub fn paired(a: &[FeatureRecord], b: &[FeatureRecord]) -> Result<Self> {
        let mut out = Self::single(a)?;
        check_dims(b, "branch B")?;
        let by_id: HashMap<&str, &FeatureRecord> = b.iter().map(|r| (r.recording_id.as_str(), r)).collect();
        let mut rows = Vec::with_capacity(a.len());
        for ra in a {
            let Some(rb) = by_id.get(ra.recording_id.as_str()) else {
                return Err(Error::Alignment(format!(
                    "recording {:?} is in branch A but not in branch B",
                    ra.recording_id
                )));
            };
            if rb.label != ra.label {
                return Err(Error::Alignment(format!(
                    "recording {:?} is labelled {} in branch A and {} in branch B",
                    ra.recording_id, ra.label, rb.label
                )));
            }
            rows.push(widen(&rb.values));
        }
        if b.len() != a.len() {
            let in_a: HashSet<&str> = a.iter().map(|r| r.recording_id.as_str()).collect();
            let extra = b.iter().find(|r| !in_a.contains(r.recording_id.as_str())).expect("some id only in B");
            return Err(Error::Alignment(format!(
                "recording {:?} is in branch B but not in branch A",
                extra.recording_id
            )));
        }
        out.b = Some(rows);
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dims(&self) -> (usize, Option<usize>) {
        let first = |rows: &Vec<Vec<f64>>| rows.first().map_or(0, Vec::len);
        (first(&self.a), self.b.as_ref().map(first))
    }

    pub fn label_indices(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i].index()).collect()
    }
}

/// Per-dimension `(x − mean) / std`, fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Dimensions with (near) zero spread are only centred.
    pub fn fit(rows: &[Vec<f64>], idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::Empty("training rows"));
        }
        let d = rows[idx[0]].len();
        let n = idx.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in idx {
            for (m, v) in mean.iter_mut().zip(&rows[i]) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for &i in idx {
            for ((s, v), m) in var.iter_mut().zip(&rows[i]).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Feature scaling for each branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub a: Standardizer,
    pub b: Option<Standardizer>,
}

impl Scaling {
    pub fn fit(data: &Dataset, idx: &[usize], enabled: bool) -> Result<Self> {
        let (da, db) = data.dims();
        let make = |rows: &[Vec<f64>], d: usize| {
            if enabled {
                Standardizer::fit(rows, idx)
            } else {
                Ok(Standardizer::identity(d))
            }
        };
        Ok(Self {
            a: make(&data.a, da)?,
            b: match (&data.b, db) {
                (Some(rows), Some(d)) => Some(make(rows, d)?),
                _ => None,
            },
        })
    }

    /// Scaled `[batch×d]` tensors for the rows in `idx`.
    pub fn batch(&self, data: &Dataset, idx: &[usize]) -> Result<(Tensor, Option<Tensor>)> {
        let stack = |s: &Standardizer, rows: &[Vec<f64>]| {
            if let Some(&bad) = idx.iter().find(|&&i| rows[i].len() != s.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: s.dim(),
                    got: rows[bad].len(),
                    context: "scaled batch".into(),
                });
            }
            let scaled: Vec<Vec<f64>> = idx.iter().map(|&i| s.apply(&rows[i])).collect();
            let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
            batch_tensor(&refs)
        };
        let xa = stack(&self.a, &data.a)?;
        let xb = match (&self.b, &data.b) {
            (Some(s), Some(rows)) => Some(stack(s, rows)?),
            (None, None) => None,
            _ => return Err(Error::Config("branch B scaling does not match the dataset".into())),
        };
        Ok((xa, xb))
    }
}
