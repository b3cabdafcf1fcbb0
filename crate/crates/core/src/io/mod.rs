//! Feature files, manifests, labels and fold assignment.

mod folds;
mod fvec;
mod label;
mod manifest;

pub use folds::{make_folds, FoldAssignment, N_FOLDS};
pub use fvec::{decode_fvec, encode_fvec, read_fvec, write_fvec, FeatureRecord, FVEC_MAGIC, FVEC_VERSION};
pub use label::{Label, RawLabel};
pub use manifest::{DatasetManifest, ManifestRow};
