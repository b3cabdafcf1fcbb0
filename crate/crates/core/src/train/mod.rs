//! Cross-validated training, evaluation and result export.

mod config;
mod cv;
mod data;
mod export;
mod fit;
mod metrics;
mod model;
mod report;

pub use config::{ModelKind, TrainConfig};
pub use cv::{run_cv, split, CvOutcome, FoldOutcome, THREADS_ENV};
pub use data::{Dataset, Scaling, Standardizer};
pub use export::{write_embeddings_csv, write_head_weights_csv};
pub use fit::{evaluate, fold_rng, train_fold, Evaluation, FoldTraining, HeadWeightRow};
pub use metrics::{argmax, confusion, Confusion, Metrics};
pub use model::{Model, Outputs, TrainedModel};
pub use report::{EvalReport, FoldReport};
