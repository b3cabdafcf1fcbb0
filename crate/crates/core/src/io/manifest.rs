use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::label::{Label, RawLabel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub recording_id: String,
    pub wav_path: PathBuf,
    pub raw_label: RawLabel,
}

/// Rows of a `recording_id,wav_path,label` CSV manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Deserialize)]
struct CsvRow {
    recording_id: String,
    wav_path: String,
    label: String,
}

impl DatasetManifest {
    /// Parses a manifest. Relative WAV paths are resolved against `base_dir`.
    pub fn from_reader<R: std::io::Read>(reader: R, base_dir: &Path) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers()?.clone();
        for col in ["recording_id", "wav_path", "label"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Manifest(format!("missing column {col:?}")));
            }
        }
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for (line, row) in csv.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            if !seen.insert(row.recording_id.clone()) {
                return Err(Error::Manifest(format!("duplicate recording id {:?}", row.recording_id)));
            }
            let raw_label = row
                .label
                .parse()
                .map_err(|e| Error::Manifest(format!("row {}: {e}", line + 2)))?;
            let path = PathBuf::from(&row.wav_path);
            let wav_path = if path.is_absolute() { path } else { base_dir.join(path) };
            rows.push(ManifestRow {
                recording_id: row.recording_id,
                wav_path,
                raw_label,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_reader(file, base)
    }

    /// Splits into Present/Absent rows and the ids of dropped Unknown rows.
    pub fn filter_known(&self) -> (Vec<(&ManifestRow, Label)>, Vec<&str>) {
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for row in &self.rows {
            match row.raw_label {
                RawLabel::Known(label) => kept.push((row, label)),
                RawLabel::Unknown => dropped.push(row.recording_id.as_str()),
            }
        }
        (kept, dropped)
    }
}
