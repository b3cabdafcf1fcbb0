use rayon::prelude::*;

use super::config::TrainConfig;
use super::data::Dataset;
use super::fit::{evaluate, train_fold, Evaluation, FoldTraining};
use super::metrics::Metrics;
use super::report::{EvalReport, FoldReport};
use crate::error::{Error, Result};
use crate::io::{make_folds, FoldAssignment, N_FOLDS};

/// Environment variable capping the number of folds trained at once.
pub const THREADS_ENV: &str = "BAOMI_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub training: FoldTraining,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub assignment: FoldAssignment,
    /// Sorted by fold index.
    pub folds: Vec<FoldOutcome>,
    pub report: EvalReport,
}

/// Row indices of the training and test parts of `fold`.
pub fn split(data: &Dataset, assignment: &FoldAssignment, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, id) in data.ids.iter().enumerate() {
        match assignment.fold_of(id) {
            Some(f) if f == fold => test.push(i),
            Some(_) => train.push(i),
            None => return Err(Error::InvalidRecord(format!("recording {id:?} has no fold"))),
        }
    }
    Ok((train, test))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Five-fold cross-validation: stratified folds from `config.seed`, one
/// model per fold, metrics per fold and their mean.
pub fn run_cv(config: &TrainConfig, data: &Dataset) -> Result<CvOutcome> {
    config.validate()?;
    if data.b.is_some() != config.model.is_fusion() {
        return Err(Error::Config(format!(
            "model {} expects {} feature set(s)",
            config.model,
            if config.model.is_fusion() { 2 } else { 1 }
        )));
    }
    let assignment = make_folds(data.ids.iter().map(String::as_str).zip(data.labels.iter().copied()), config.seed)?;
    let run_fold = |fold: usize| -> Result<FoldOutcome> {
        let (train_idx, test_idx) = split(data, &assignment, fold)?;
        let training = train_fold(config, data, &train_idx, fold)?;
        let evaluation = evaluate(&training.trained, data, &test_idx)?;
        log::info!(
            "fold {fold}: acc {:.2} ma-f1 {:.2} wa-f1 {:.2}",
            evaluation.metrics.acc,
            evaluation.metrics.ma_f1,
            evaluation.metrics.wa_f1
        );
        Ok(FoldOutcome {
            fold,
            train_idx,
            test_idx,
            training,
            evaluation,
        })
    };
    let mut folds = thread_pool()?.install(|| (0..N_FOLDS).into_par_iter().map(run_fold).collect::<Result<Vec<_>>>())?;
    folds.sort_by_key(|f| f.fold);

    let fold_reports: Vec<FoldReport> = folds
        .iter()
        .map(|f| FoldReport {
            fold: f.fold,
            acc: f.evaluation.metrics.acc,
            ma_f1: f.evaluation.metrics.ma_f1,
            wa_f1: f.evaluation.metrics.wa_f1,
            confusion: f.evaluation.confusion,
            epoch_losses: f.training.epoch_losses.clone(),
            head_weights: f.training.head_weights.clone(),
        })
        .collect();
    let mean = Metrics::mean(&folds.iter().map(|f| f.evaluation.metrics).collect::<Vec<_>>())?;
    let report = EvalReport {
        config: serde_json::to_value(config)?,
        seed: config.seed,
        folds: fold_reports,
        mean,
    };
    Ok(CvOutcome {
        assignment,
        folds,
        report,
    })
}
