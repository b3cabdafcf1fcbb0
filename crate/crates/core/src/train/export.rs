use std::fs::File;
use std::path::Path;

use super::fit::HeadWeightRow;
use crate::error::{Error, Result};
use crate::io::Label;

/// `recording_id,label,e0,e1,…` with one row per recording.
pub fn write_embeddings_csv(path: impl AsRef<Path>, ids: &[String], labels: &[Label], rows: &[Vec<f64>]) -> Result<()> {
    if ids.len() != rows.len() || labels.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: rows.len(),
            context: "embedding rows".into(),
        });
    }
    let path = path.as_ref();
    let width = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut header = vec!["recording_id".to_owned(), "label".to_owned()];
    header.extend((0..width).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    for ((id, label), row) in ids.iter().zip(labels).zip(rows) {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: row.len(),
                context: format!("embedding of {id:?}"),
            });
        }
        let mut rec = vec![id.clone(), label.index().to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `epoch,direction,head,weight`.
pub fn write_head_weights_csv(path: impl AsRef<Path>, rows: &[HeadWeightRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_record(["epoch", "direction", "head", "weight"])?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.direction.name().to_owned(),
            r.head.to_string(),
            r.weight.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
